#include "metaadapt/corpus/filter.h"

#include <cctype>
#include <set>

namespace metaadapt {

bool IsPunctuationToken(std::string_view token) {
  if (token.empty()) return false;
  for (char c : token)
    if (!std::ispunct(static_cast<unsigned char>(c))) return false;
  return true;
}

double PunctuationRatio(const Tokens& tokens) {
  if (tokens.empty()) return 0.0;
  std::size_t punct = 0;
  for (const auto& t : tokens) punct += IsPunctuationToken(t) ? 1 : 0;
  return static_cast<double>(punct) / static_cast<double>(tokens.size());
}

std::vector<SentencePair> FilterCorpus(const std::vector<SentencePair>& pairs, FilterStats* stats) {
  FilterStats local;
  local.input = pairs.size();
  std::vector<SentencePair> kept;
  std::set<std::pair<Tokens, Tokens>> seen;
  for (const SentencePair& p : pairs) {
    if (p.source.empty() || p.target.empty()) {
      ++local.empty;
      continue;
    }
    if (p.source.size() > kMaxSentenceTokens || p.target.size() > kMaxSentenceTokens) {
      ++local.too_long;
      continue;
    }
    if (PunctuationRatio(p.source) > kMaxPunctuationRatio || PunctuationRatio(p.target) > kMaxPunctuationRatio) {
      ++local.punctuation;
      continue;
    }
    if (!seen.emplace(p.source, p.target).second) {
      ++local.duplicates;
      continue;
    }
    kept.push_back(p);
  }
  local.kept = kept.size();
  if (stats) *stats = local;
  return kept;
}

}  // namespace metaadapt
