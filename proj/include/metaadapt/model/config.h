#pragma once

#include <cstddef>

namespace metaadapt {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t model_dim = 64;
  std::size_t num_layers = 2;  // per stack: encoder and decoder each
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t max_seq_len = 64;
  double dropout = 0.1;

  // Config error on zero sizes, indivisible heads or bad dropout.
  void Validate() const;
};

struct AdapterConfig {
  std::size_t bottleneck_dim = 16;
  double ln_epsilon = 1e-5;
  // Half-width of the uniform init for the down-projection. The
  // up-projection starts at zero so an inserted adapter is an identity.
  double down_init_range = 1e-2;

  void Validate(const ModelConfig& model) const;
};

// Parameters of one adapter module: 2*D*b weights, b + D biases, 2*D
// layer-norm gain/bias.
std::size_t AdapterParamCount(const ModelConfig& model, const AdapterConfig& adapter);

}  // namespace metaadapt
