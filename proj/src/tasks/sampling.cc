#include "metaadapt/tasks/sampling.h"

#include <charconv>
#include <cmath>
#include <numeric>

#include "metaadapt/core/error.h"

namespace metaadapt {

std::size_t DlpCount(std::size_t domains, std::size_t languages) {
  Require(domains >= 1, ErrorKind::kInput, "dlp count needs at least one domain");
  Require(languages >= 2, ErrorKind::kInput, "dlp count needs at least two languages");
  return domains * languages * (languages - 1);
}

std::vector<double> ComputeShares(std::span<const std::size_t> sizes) {
  const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0,
                                       [](double acc, std::size_t s) { return acc + static_cast<double>(s); });
  Require(total > 0.0, ErrorKind::kInput, "dataset shares need at least one non-empty dataset");
  std::vector<double> shares;
  shares.reserve(sizes.size());
  for (std::size_t s : sizes) shares.push_back(static_cast<double>(s) / total);
  return shares;
}

Temperature Temperature::Finite(double tau) {
  Require(std::isfinite(tau) && tau > 0.0, ErrorKind::kInput, "temperature must be positive, got " + std::to_string(tau));
  return Temperature(tau, false);
}

Temperature Temperature::Parse(const std::string& text) {
  if (text == "inf" || text == "infinity") return Infinite();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(v > 0.0) || !std::isfinite(v))
    Fail(ErrorKind::kConfig, "bad temperature '" + text + "' (positive number or inf)");
  return Temperature(v, false);
}

std::string Temperature::ToString() const {
  if (infinite_) return "inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, value_);
  return std::string(buf, r.ptr);
}

std::vector<double> SamplingProbs(std::span<const double> shares, Temperature tau) {
  Require(!shares.empty(), ErrorKind::kInput, "sampling over an empty task set");
  Require(tau.infinite() || tau.value() > 0.0, ErrorKind::kInput, "temperature must be positive");
  double sum = 0.0;
  for (double s : shares) {
    Require(s >= 0.0 && std::isfinite(s), ErrorKind::kInput, "shares must be finite and non-negative");
    sum += s;
  }
  Require(std::abs(sum - 1.0) < 1e-9, ErrorKind::kInput, "shares must sum to 1");
  const std::size_t k = shares.size();
  if (tau.infinite()) return std::vector<double>(k, 1.0 / static_cast<double>(k));
  std::vector<double> p(k);
  double z = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = shares[i] > 0.0 ? std::pow(shares[i], 1.0 / tau.value()) : 0.0;
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

SamplingPlan MakeSamplingPlan(std::vector<DlpId> dlps, std::span<const std::size_t> sizes, Temperature temperature) {
  Require(!dlps.empty(), ErrorKind::kInput, "sampling plan over an empty registry");
  Require(dlps.size() == sizes.size(), ErrorKind::kInput, "sampling plan: one size per DLP required");
  SamplingPlan plan;
  plan.shares = ComputeShares(sizes);
  plan.probs = SamplingProbs(plan.shares, temperature);
  plan.temperature = temperature;
  plan.dlps = std::move(dlps);
  return plan;
}

std::size_t SampleIndex(std::span<const double> probs, Rng& rng) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double u = rng.Uniform() * total;
  double acc = 0.0;
  std::size_t last = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  Require(last < probs.size(), ErrorKind::kInput, "categorical draw with no positive probability");
  return last;  // rounding left u just above the running sum
}

std::vector<DlpId> SampleDlps(const SamplingPlan& plan, std::size_t m, Rng& rng, Replacement mode) {
  Require(m >= 1, ErrorKind::kInput, "must sample at least one DLP");
  std::vector<DlpId> out;
  out.reserve(m);
  if (mode == Replacement::kWith) {
    for (std::size_t i = 0; i < m; ++i) out.push_back(plan.dlps[SampleIndex(plan.probs, rng)]);
    return out;
  }
  std::size_t available = 0;
  for (double p : plan.probs) available += p > 0.0 ? 1 : 0;
  Require(m <= available, ErrorKind::kInput,
          "cannot draw " + std::to_string(m) + " distinct DLPs from " + std::to_string(available) +
              " with nonzero probability");
  std::vector<double> probs = plan.probs;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = SampleIndex(probs, rng);
    out.push_back(plan.dlps[j]);
    probs[j] = 0.0;
  }
  return out;
}

}  // namespace metaadapt
