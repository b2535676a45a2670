#include "metaadapt/tasks/episode.h"

#include <algorithm>
#include <numeric>

#include "metaadapt/core/error.h"

namespace metaadapt {

EpisodeTask BuildEpisodeTask(const DlpId& dlp, const std::vector<SentencePair>& pool, std::size_t n, std::size_t q,
                             Rng& rng) {
  Require(!pool.empty(), ErrorKind::kInput, "episode task " + dlp.ToString() + " has no training pairs");
  EpisodeTask task;
  task.dlp = dlp;
  const std::size_t size = pool.size();
  const bool fallback = n + q > size;
  const std::size_t query_size = fallback ? std::min(q, size - 1) : q;
  const std::size_t distinct = fallback ? size : n + q;

  // Partial Fisher-Yates: the first `distinct` slots form a uniform sample.
  std::vector<std::size_t> index(size);
  std::iota(index.begin(), index.end(), 0);
  for (std::size_t i = 0; i < distinct; ++i) std::swap(index[i], index[i + rng.UniformIndex(size - i)]);

  for (std::size_t i = 0; i < query_size; ++i) task.query.push_back(pool[index[i]]);
  if (!fallback) {
    for (std::size_t i = q; i < n + q; ++i) task.support.push_back(pool[index[i]]);
  } else {
    task.support_with_replacement = true;
    const std::size_t rest = size - query_size;
    for (std::size_t i = 0; i < n; ++i) task.support.push_back(pool[index[query_size + rng.UniformIndex(rest)]]);
  }
  return task;
}

Episode BuildEpisode(const std::vector<EpisodeSource>& sources, std::size_t n, std::size_t q, Rng& rng) {
  Require(n >= 1, ErrorKind::kInput, "episode needs at least one support shot");
  Episode episode;
  for (const auto& s : sources) episode.tasks.push_back(BuildEpisodeTask(s.dlp, *s.pool, n, q, rng));
  return episode;
}

}  // namespace metaadapt
