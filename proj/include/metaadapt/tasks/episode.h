#pragma once

#include <cstddef>
#include <vector>

#include "metaadapt/core/rng.h"
#include "metaadapt/corpus/sentence.h"

namespace metaadapt {

struct EpisodeTask {
  DlpId dlp;
  std::vector<SentencePair> support;
  std::vector<SentencePair> query;
  // Set when the pool was smaller than n + q and the support was drawn
  // with replacement from the pairs left after the query.
  bool support_with_replacement = false;
};

struct Episode {
  std::vector<EpisodeTask> tasks;
};

// Draws q query pairs and n support pairs from each pool, all distinct when
// the pool holds at least n + q pairs. Smaller pools take the query first
// (at most size - 1 pairs, so the support keeps a source) and then draw the
// support with replacement from the rest. Input error on an empty pool.
EpisodeTask BuildEpisodeTask(const DlpId& dlp, const std::vector<SentencePair>& pool, std::size_t n,
                             std::size_t q, Rng& rng);

struct EpisodeSource {
  DlpId dlp;
  const std::vector<SentencePair>* pool;
};

Episode BuildEpisode(const std::vector<EpisodeSource>& sources, std::size_t n, std::size_t q, Rng& rng);

}  // namespace metaadapt
