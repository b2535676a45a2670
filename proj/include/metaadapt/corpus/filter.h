#pragma once

#include <string_view>
#include <vector>

#include "metaadapt/corpus/sentence.h"

namespace metaadapt {

inline constexpr std::size_t kMaxSentenceTokens = 175;
inline constexpr double kMaxPunctuationRatio = 0.5;

// A token is punctuation when every character belongs to the ASCII
// punctuation class !"#$%&'()*+,-./:;<=>?@[\]^_`{|}~.
bool IsPunctuationToken(std::string_view token);
double PunctuationRatio(const Tokens& tokens);

struct FilterStats {
  std::size_t input = 0;
  std::size_t too_long = 0;
  std::size_t punctuation = 0;
  std::size_t empty = 0;
  std::size_t duplicates = 0;
  std::size_t kept = 0;
};

// Drops pairs with an empty side, a side longer than 175 tokens, or a side
// whose punctuation-token ratio is strictly above 0.5, then removes exact
// duplicates keyed on (source, target). Survivors keep their order.
std::vector<SentencePair> FilterCorpus(const std::vector<SentencePair>& pairs,
                                       FilterStats* stats = nullptr);

}  // namespace metaadapt
