#include "metaadapt/model/adapter.h"

#include "metaadapt/core/error.h"
#include "metaadapt/tensor/ops.h"

namespace metaadapt {

Var AdapterForward(Var h, const AdapterVars& a, double ln_epsilon) {
  Require(h.value().cols() == a.down_w.value().dim(0), ErrorKind::kDimension,
          "adapter: hidden width " + std::to_string(h.value().cols()) +
              " does not match down-projection " + ShapeToString(a.down_w.shape()));
  Var normed = ops::LayerNorm(h, a.ln_gain, a.ln_bias, ln_epsilon);
  Var bottleneck = ops::Relu(ops::AddBias(ops::MatMul(normed, a.down_w), a.down_b));
  Var up = ops::AddBias(ops::MatMul(bottleneck, a.up_w), a.up_b);
  return ops::Add(up, h);
}

}  // namespace metaadapt
