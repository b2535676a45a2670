#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "metaadapt/core/dlp.h"

namespace metaadapt {

// Reserved ids; the corpus vocabulary places these first.
inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;

struct TokenPair {
  std::vector<int> source;
  std::vector<int> target;
};

// Padded, teacher-forced batch. Source rows are control tokens + source +
// eos; decoder inputs are bos + target; gold outputs are target + eos.
struct Batch {
  std::size_t size = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<int> src;
  std::vector<int> tgt_in;
  std::vector<int> tgt_out;
  std::vector<std::uint8_t> src_valid;
  std::vector<std::uint8_t> tgt_valid;
  DlpId dlp;

  bool empty() const { return size == 0; }
};

// Input error when `pairs` is empty or any side is empty.
Batch MakeBatch(std::span<const TokenPair> pairs, std::span<const int> control_prefix,
                const DlpId& dlp = {});

// Source rows for decoding: control tokens + source + eos, unpadded.
std::vector<int> MakeSourceRow(std::span<const int> source, std::span<const int> control_prefix);

}  // namespace metaadapt
