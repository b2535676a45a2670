#pragma once

#include <cstdint>
#include <vector>

#include "metaadapt/tensor/tensor.h"

namespace metaadapt {

// Betas and epsilon are the customary AdamW defaults; nothing upstream
// pins them.
struct AdamWSettings {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  // Global gradient-norm clipping; <= 0 disables it.
  double clip_norm = 0.0;
};

// Adam with decoupled weight decay. Holds first/second moments per
// parameter; the parameters themselves are borrowed.
class AdamW {
 public:
  AdamW(std::vector<Tensor*> params, AdamWSettings settings);

  // Applies one update from the parameters' gradients, then zeroes them.
  // Throws a state error if any parameter has no gradient.
  void Step();

  std::int64_t step_count() const { return step_; }
  const AdamWSettings& settings() const { return settings_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  AdamWSettings settings_;
  std::int64_t step_ = 0;
};

}  // namespace metaadapt
