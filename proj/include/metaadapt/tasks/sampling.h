#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "metaadapt/core/dlp.h"
#include "metaadapt/core/rng.h"

namespace metaadapt {

// d * l * (l - 1). Input error when d < 1 or l < 2.
std::size_t DlpCount(std::size_t domains, std::size_t languages);

// s_i = size_i / sum(sizes). Input error when every size is zero.
std::vector<double> ComputeShares(std::span<const std::size_t> sizes);

// Sampling temperature. The infinite temperature is a flag, not a large
// number, so the uniform case is exact.
class Temperature {
 public:
  static Temperature Finite(double tau);
  static Temperature Infinite() { return Temperature(0.0, true); }
  // Accepts a positive number or "inf". Config error otherwise.
  static Temperature Parse(const std::string& text);

  bool infinite() const { return infinite_; }
  double value() const { return value_; }
  std::string ToString() const;

  bool operator==(const Temperature&) const = default;

 private:
  Temperature(double value, bool infinite) : value_(value), infinite_(infinite) {}
  double value_;
  bool infinite_;
};

// P(i) = s_i^(1/tau) / sum_a s_a^(1/tau). Uniform over all entries for the
// infinite temperature. Input error when tau <= 0 or the shares are not a
// distribution.
std::vector<double> SamplingProbs(std::span<const double> shares, Temperature tau);

struct SamplingPlan {
  std::vector<DlpId> dlps;
  std::vector<double> shares;
  Temperature temperature = Temperature::Finite(1.0);
  std::vector<double> probs;
};

SamplingPlan MakeSamplingPlan(std::vector<DlpId> dlps, std::span<const std::size_t> sizes,
                              Temperature temperature);

enum class Replacement { kWithout, kWith };

// m draws from the plan. Without replacement, each draw renormalizes over
// the DLPs not yet taken, and asking for more DLPs than have nonzero
// probability is an input error.
std::vector<DlpId> SampleDlps(const SamplingPlan& plan, std::size_t m, Rng& rng,
                              Replacement mode = Replacement::kWithout);

// Index of one categorical draw.
std::size_t SampleIndex(std::span<const double> probs, Rng& rng);

}  // namespace metaadapt
