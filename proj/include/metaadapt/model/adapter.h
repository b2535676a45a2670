#pragma once

#include "metaadapt/tensor/tape.h"

namespace metaadapt {

// Tape handles for one bottleneck adapter.
struct AdapterVars {
  Var ln_gain;    // [D]
  Var ln_bias;    // [D]
  Var down_w;     // [D, b]
  Var down_b;     // [b]
  Var up_w;       // [b, D]
  Var up_b;       // [D]
};

// up(ReLU(down(LN(h)))) + h, applied row-wise over h[..., D].
Var AdapterForward(Var h, const AdapterVars& adapter, double ln_epsilon);

}  // namespace metaadapt
