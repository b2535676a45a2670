#include "metaadapt/tensor/grad_check.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "metaadapt/core/error.h"

namespace metaadapt {
namespace {

double Evaluate(const ScalarFn& f) {
  Tape tape;
  NoGradGuard guard(tape);
  const double value = f(tape).value().item();
  Require(std::isfinite(value), ErrorKind::kNumeric, "grad_check: non-finite function value");
  return value;
}

}  // namespace

GradCheckReport GradCheck(const ScalarFn& f, std::span<Tensor* const> params,
                          const GradCheckOptions& options) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    for (Tensor* p : params) {
      Require(p->requires_grad(), ErrorKind::kState, "grad_check: parameter does not require grad");
      p->ClearGrad();
    }
    Var loss = f(tape);
    tape.Backward(loss);
    for (Tensor* p : params) {
      std::span<double> g = p->EnsureGrad();
      analytic.emplace_back(g.begin(), g.end());
      p->ClearGrad();
    }
  }

  GradCheckReport report;
  const double center = Evaluate(f);
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    const std::size_t n = p.size();
    std::size_t stride = 1;
    if (options.max_coords_per_tensor > 0 && n > options.max_coords_per_tensor)
      stride = (n + options.max_coords_per_tensor - 1) / options.max_coords_per_tensor;
    for (std::size_t i = 0; i < n; i += stride) {
      const double original = p[i];
      p[i] = original + options.step;
      const double plus = Evaluate(f);
      p[i] = original - options.step;
      const double minus = Evaluate(f);
      p[i] = original;

      const double forward = (plus - center) / options.step;
      const double backward = (center - minus) / options.step;
      const double slope_scale =
          std::max({std::abs(forward), std::abs(backward), options.denominator_floor});
      // A jump between one-sided slopes much larger than curvature explains
      // means the perturbation crossed a non-differentiable point.
      if (std::abs(forward - backward) > options.kink_tolerance * slope_scale &&
          std::abs(forward - backward) > 1e-3) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[t][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err =
          abs_err / std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
      report.max_relative_error = std::max(report.max_relative_error, rel_err);
      ++report.checked;
    }
  }
  report.passed = report.checked > 0 && report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace metaadapt
