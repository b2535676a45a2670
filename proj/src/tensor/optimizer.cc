#include "metaadapt/tensor/optimizer.h"

#include <cmath>

#include "metaadapt/core/error.h"

namespace metaadapt {

AdamW::AdamW(std::vector<Tensor*> params, AdamWSettings settings)
    : params_(std::move(params)), settings_(settings) {
  Require(settings_.learning_rate >= 0.0, ErrorKind::kConfig, "learning rate must be >= 0");
  Require(settings_.beta1 >= 0.0 && settings_.beta1 < 1.0 && settings_.beta2 >= 0.0 &&
              settings_.beta2 < 1.0,
          ErrorKind::kConfig, "AdamW betas must lie in [0, 1)");
  Require(settings_.epsilon > 0.0, ErrorKind::kConfig, "AdamW epsilon must be positive");
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (Tensor* p : params_) {
    first_moment_.emplace_back(p->size(), 0.0);
    second_moment_.emplace_back(p->size(), 0.0);
  }
}

void AdamW::Step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Require(params_[i]->has_grad(), ErrorKind::kState, "optimizer step on a parameter without gradient");
    Require(first_moment_[i].size() == params_[i]->size(), ErrorKind::kState,
            "optimizer moment buffer does not match parameter shape");
  }

  double clip_scale = 1.0;
  if (settings_.clip_norm > 0.0) {
    double sq = 0.0;
    for (Tensor* p : params_)
      for (double g : p->grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > settings_.clip_norm) clip_scale = settings_.clip_norm / norm;
  }

  ++step_;
  const double lr = settings_.learning_rate;
  const double b1 = settings_.beta1;
  const double b2 = settings_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double decay = 1.0 - lr * settings_.weight_decay;

  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto value = params_[i]->data();
    auto grad = params_[i]->grad();
    auto& m = first_moment_[i];
    auto& v = second_moment_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j] * clip_scale;
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] = value[j] * decay - lr * m_hat / (std::sqrt(v_hat) + settings_.epsilon);
    }
    params_[i]->ZeroGrad();
  }
}

}  // namespace metaadapt
