#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "metaadapt/core/rng.h"
#include "metaadapt/tensor/tape.h"

namespace metaadapt::ops {

// Elementwise; shapes must match exactly.
Var Add(Var a, Var b);
Var Mul(Var a, Var b);
Var Scale(Var a, double factor);

// x[..., D] + bias[D], broadcast over rows.
Var AddBias(Var x, Var bias);

// a[n, k] x b[k, m]. Leading axes of `a` are flattened into rows.
Var MatMul(Var a, Var b);
// a[n, k] x b[m, k]^T.
Var MatMulNT(Var a, Var b);

Var Relu(Var x);
// Softmax over the last axis.
Var Softmax(Var x);

Var Sum(Var x);

// Rows of table[V, D] selected by ids -> [ids.size(), D].
Var Embedding(Var table, std::span<const int> ids);

// Mean token cross-entropy of logits[N, V] against targets; positions equal
// to ignore_index are excluded. Input error when every position is ignored.
Var CrossEntropy(Var logits, std::span<const int> targets, int ignore_index);

// Inverted dropout as an explicit mask op. Identity when p == 0.
Var Dropout(Var x, double p, Rng& rng);

// Normalizes each row over the last axis, then applies gain and bias.
Var LayerNorm(Var x, Var gain, Var bias, double epsilon);

struct AttentionShape {
  std::size_t batch = 1;
  std::size_t query_len = 1;
  std::size_t key_len = 1;
  std::size_t heads = 1;
};

// Multi-head scaled dot-product attention over pre-projected inputs.
// q is [batch*query_len, D]; k and v are [batch*key_len, D]. key_valid
// holds batch*key_len flags (0 = padding). With `causal`, query t only sees
// keys <= t.
Var Attention(Var q, Var k, Var v, const AttentionShape& shape,
              std::span<const std::uint8_t> key_valid, bool causal);

}  // namespace metaadapt::ops
