#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace metaadapt {

// Sufficient statistics of corpus BLEU-4. Shards merge by summation.
struct BleuStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  BleuStats& operator+=(const BleuStats& other);
};

BleuStats SentenceBleuStats(const std::string& hypothesis, const std::string& reference);
// Geometric mean of the modified precisions over the orders that have at
// least one hypothesis n-gram, times exp(min(0, 1 - r/c)). No smoothing: a
// zero precision gives 0. Scaled to [0, 100].
double BleuFromStats(const BleuStats& stats);
// Case-sensitive, whitespace-tokenized corpus BLEU. Input error when the
// lists are empty or differ in length.
double CorpusBleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);

inline constexpr std::size_t kChrfOrder = 6;
inline constexpr double kChrfBeta = 2.0;

struct ChrfStats {
  std::array<std::size_t, kChrfOrder> matches{};
  std::array<std::size_t, kChrfOrder> hyp_total{};
  std::array<std::size_t, kChrfOrder> ref_total{};

  ChrfStats& operator+=(const ChrfStats& other);
};

// Character n-grams (n = 1..6) with whitespace removed.
ChrfStats SentenceChrfStats(const std::string& hypothesis, const std::string& reference);
// Per-order F_beta from summed counts, averaged over the orders where both
// hypothesis and reference have n-grams. Scaled to [0, 100].
double ChrfFromStats(const ChrfStats& stats);
double CorpusChrf(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);

}  // namespace metaadapt
