#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "metaadapt/tensor/tape.h"

namespace metaadapt {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double denominator_floor = 1e-7;
  // Coordinates whose forward and backward one-sided slopes disagree by
  // more than this relative amount straddle a kink and are skipped.
  double kink_tolerance = 1e-2;
  // 0 checks every coordinate; otherwise a deterministic stride subset.
  std::size_t max_coords_per_tensor = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  bool passed = false;
};

// Builds a scalar on the given tape from the current parameter values.
using ScalarFn = std::function<Var(Tape&)>;

// Compares reverse-mode gradients of `f` w.r.t. `params` against central
// differences. Parameters must have requires_grad set; their values are
// restored afterwards. Throws a numeric error if f is non-finite nearby.
GradCheckReport GradCheck(const ScalarFn& f, std::span<Tensor* const> params,
                          const GradCheckOptions& options = {});

}  // namespace metaadapt
