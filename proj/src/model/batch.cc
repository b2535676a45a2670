#include "metaadapt/model/batch.h"

#include <algorithm>

#include "metaadapt/core/error.h"

namespace metaadapt {

std::vector<int> MakeSourceRow(std::span<const int> source, std::span<const int> control_prefix) {
  std::vector<int> row(control_prefix.begin(), control_prefix.end());
  row.insert(row.end(), source.begin(), source.end());
  row.push_back(kEosId);
  return row;
}

Batch MakeBatch(std::span<const TokenPair> pairs, std::span<const int> control_prefix,
                const DlpId& dlp) {
  Require(!pairs.empty(), ErrorKind::kInput, "cannot build an empty batch");
  Batch batch;
  batch.size = pairs.size();
  batch.dlp = dlp;
  for (const TokenPair& p : pairs) {
    Require(!p.source.empty() && !p.target.empty(), ErrorKind::kInput,
            "sentence pairs must have non-empty sides");
    batch.src_len = std::max(batch.src_len, control_prefix.size() + p.source.size() + 1);
    batch.tgt_len = std::max(batch.tgt_len, p.target.size() + 1);
  }
  batch.src.assign(batch.size * batch.src_len, kPadId);
  batch.src_valid.assign(batch.size * batch.src_len, 0);
  batch.tgt_in.assign(batch.size * batch.tgt_len, kPadId);
  batch.tgt_out.assign(batch.size * batch.tgt_len, kPadId);
  batch.tgt_valid.assign(batch.size * batch.tgt_len, 0);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const std::vector<int> row = MakeSourceRow(pairs[b].source, control_prefix);
    std::copy(row.begin(), row.end(), batch.src.begin() + b * batch.src_len);
    std::fill_n(batch.src_valid.begin() + b * batch.src_len, row.size(), 1);
    const auto& tgt = pairs[b].target;
    int* in = batch.tgt_in.data() + b * batch.tgt_len;
    int* out = batch.tgt_out.data() + b * batch.tgt_len;
    in[0] = kBosId;
    for (std::size_t t = 0; t < tgt.size(); ++t) {
      in[t + 1] = tgt[t];
      out[t] = tgt[t];
    }
    out[tgt.size()] = kEosId;
    std::fill_n(batch.tgt_valid.begin() + b * batch.tgt_len, tgt.size() + 1, 1);
  }
  return batch;
}

}  // namespace metaadapt
