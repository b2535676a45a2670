#include "metaadapt/eval/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "metaadapt/core/error.h"
#include "metaadapt/corpus/sentence.h"

namespace metaadapt {
namespace {

template <typename T>
std::map<std::vector<T>, std::size_t> NGramCounts(const std::vector<T>& seq, std::size_t n) {
  std::map<std::vector<T>, std::size_t> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[std::vector<T>(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

template <typename T>
std::size_t ClippedMatches(const std::map<std::vector<T>, std::size_t>& hyp,
                           const std::map<std::vector<T>, std::size_t>& ref) {
  std::size_t m = 0;
  for (const auto& [gram, c] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

void CheckCorpus(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  Require(!hyps.empty(), ErrorKind::kInput, "metric needs at least one sentence");
  Require(hyps.size() == refs.size(), ErrorKind::kInput,
          "hypothesis/reference count mismatch: " + std::to_string(hyps.size()) + " vs " +
              std::to_string(refs.size()));
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (std::size_t n = 0; n < 4; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

BleuStats SentenceBleuStats(const std::string& hypothesis, const std::string& reference) {
  const Tokens hyp = SplitTokens(hypothesis);
  const Tokens ref = SplitTokens(reference);
  BleuStats s;
  s.hyp_len = hyp.size();
  s.ref_len = ref.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = NGramCounts(hyp, n);
    s.matches[n - 1] = ClippedMatches(h, NGramCounts(ref, n));
    s.totals[n - 1] = hyp.size() >= n ? hyp.size() - n + 1 : 0;
  }
  return s;
}

double BleuFromStats(const BleuStats& s) {
  if (s.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (s.totals[n] == 0) continue;
    if (s.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
    ++orders;
  }
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len)));
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(orders));
}

double CorpusBleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
  CheckCorpus(hypotheses, references);
  BleuStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += SentenceBleuStats(hypotheses[i], references[i]);
  return BleuFromStats(total);
}

ChrfStats& ChrfStats::operator+=(const ChrfStats& o) {
  for (std::size_t n = 0; n < kChrfOrder; ++n) {
    matches[n] += o.matches[n];
    hyp_total[n] += o.hyp_total[n];
    ref_total[n] += o.ref_total[n];
  }
  return *this;
}

ChrfStats SentenceChrfStats(const std::string& hypothesis, const std::string& reference) {
  auto strip = [](const std::string& s) {
    std::vector<char> out;
    for (char c : s)
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r') out.push_back(c);
    return out;
  };
  const auto hyp = strip(hypothesis);
  const auto ref = strip(reference);
  ChrfStats s;
  for (std::size_t n = 1; n <= kChrfOrder; ++n) {
    const auto h = NGramCounts(hyp, n);
    s.matches[n - 1] = ClippedMatches(h, NGramCounts(ref, n));
    s.hyp_total[n - 1] = hyp.size() >= n ? hyp.size() - n + 1 : 0;
    s.ref_total[n - 1] = ref.size() >= n ? ref.size() - n + 1 : 0;
  }
  return s;
}

double ChrfFromStats(const ChrfStats& s) {
  const double beta2 = kChrfBeta * kChrfBeta;
  double sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < kChrfOrder; ++n) {
    if (s.hyp_total[n] == 0 || s.ref_total[n] == 0) continue;
    ++orders;
    const double p = static_cast<double>(s.matches[n]) / static_cast<double>(s.hyp_total[n]);
    const double r = static_cast<double>(s.matches[n]) / static_cast<double>(s.ref_total[n]);
    if (p + r > 0.0) sum += (1.0 + beta2) * p * r / (beta2 * p + r);
  }
  return orders == 0 ? 0.0 : 100.0 * sum / static_cast<double>(orders);
}

double CorpusChrf(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
  CheckCorpus(hypotheses, references);
  ChrfStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += SentenceChrfStats(hypotheses[i], references[i]);
  return ChrfFromStats(total);
}

}  // namespace metaadapt
