#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "metaadapt/core/dlp.h"

namespace metaadapt {

using Tokens = std::vector<std::string>;

struct SentencePair {
  Tokens source;
  Tokens target;
  DlpId dlp;

  bool operator==(const SentencePair& other) const {
    return source == other.source && target == other.target;
  }
};

// Splits on runs of ASCII whitespace.
Tokens SplitTokens(std::string_view text);
std::string JoinTokens(const Tokens& tokens);

}  // namespace metaadapt
