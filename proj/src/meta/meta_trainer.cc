#include "metaadapt/meta/meta_trainer.h"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "metaadapt/core/error.h"

namespace metaadapt {
namespace {

constexpr std::uint64_t kEpisodeStream = 0x45504953;  // per meta-batch sampling
constexpr std::uint64_t kDropoutStream = 0x44524f50;  // per inner loop

void CheckLayout(const Model& model, const Snapshot& snapshot) {
  const auto names = model.TrainableNames();
  Require(names.size() == snapshot.size(), ErrorKind::kState,
          "snapshot has " + std::to_string(snapshot.size()) + " tensors, model trains " +
              std::to_string(names.size()));
  for (const auto& name : names) {
    auto it = snapshot.find(name);
    Require(it != snapshot.end(), ErrorKind::kState, "snapshot lacks trainable parameter " + name);
    Require(it->second.shape() == model.params().at(name).shape(), ErrorKind::kState,
            "snapshot shape mismatch at " + name);
  }
}

// Runs the inner loop and returns the training loss of its last step.
double RunInner(Model& model, const Snapshot& start, const std::vector<TokenPair>& support, std::size_t k,
                const AdamWSettings& settings, std::size_t batch_size, Rng& rng) {
  Require(k >= 1, ErrorKind::kInput, "inner loop needs k >= 1");
  Require(!support.empty(), ErrorKind::kInput, "inner loop on an empty support set");
  CheckLayout(model, start);
  model.SetParams(start);
  const std::size_t bs = batch_size == 0 ? support.size() : std::min(batch_size, support.size());
  AdamW optimizer(model.TrainableParams(), settings);
  std::vector<TokenPair> batch;
  std::size_t cursor = 0;
  double loss = 0.0;
  for (std::size_t step = 0; step < k; ++step) {
    batch.clear();
    for (std::size_t i = 0; i < bs; ++i) {
      batch.push_back(support[cursor]);
      cursor = (cursor + 1) % support.size();
    }
    try {
      loss = TrainStep(model, optimizer, batch, rng);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kNumeric) Fail(ErrorKind::kNumeric, "inner step " + std::to_string(step) + ": " + e.what());
      throw;
    }
    Require(std::isfinite(loss), ErrorKind::kNumeric, "non-finite loss at inner step " + std::to_string(step));
  }
  return loss;
}

}  // namespace

void MetaConfig::Validate() const {
  Require(m >= 1, ErrorKind::kConfig, "meta config: m must be >= 1");
  Require(n >= 1, ErrorKind::kConfig, "meta config: n must be >= 1");
  Require(k >= 1, ErrorKind::kConfig, "meta config: k must be >= 1");
  Require(beta > 0.0 && beta <= 1.0, ErrorKind::kConfig, "meta config: beta must lie in (0, 1]");
  Require(epochs > 0.0, ErrorKind::kConfig, "meta config: epochs must be positive");
  Require(patience >= 1, ErrorKind::kConfig, "meta config: patience must be >= 1");
}

Snapshot TakeSnapshot(const Model& model) { return model.GetParams(model.TrainableNames()); }

Snapshot InnerAdapt(Model& model, const Snapshot& start, const std::vector<TokenPair>& support, std::size_t k,
                    const AdamWSettings& optimizer, std::size_t batch_size, Rng& dropout_rng) {
  RunInner(model, start, support, k, optimizer, batch_size, dropout_rng);
  return TakeSnapshot(model);
}

Snapshot ReptileStep(const Snapshot& psi, const std::vector<Snapshot>& results, double beta) {
  Require(!results.empty(), ErrorKind::kInput, "reptile step needs at least one task result");
  for (const auto& r : results) {
    Require(r.size() == psi.size(), ErrorKind::kState, "reptile step: snapshot layouts differ");
    for (const auto& [name, t] : psi) {
      auto it = r.find(name);
      Require(it != r.end() && it->second.shape() == t.shape(), ErrorKind::kState,
              "reptile step: layout mismatch at " + name);
    }
  }
  const double scale = beta / static_cast<double>(results.size());
  Snapshot out;
  for (const auto& [name, t] : psi) {
    std::vector<double> sum(t.size(), 0.0);
    for (const auto& r : results) {
      const auto src = r.at(name).data();
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += src[i] - t[i];
    }
    std::vector<double> value(t.size());
    for (std::size_t i = 0; i < value.size(); ++i) value[i] = t[i] + scale * sum[i];
    out.emplace(name, Tensor(t.shape(), std::move(value)));
  }
  return out;
}

void WriteMetaLogLine(std::ostream& out, const MetaBatchLog& record) {
  nlohmann::json j;
  j["meta_batch"] = record.meta_batch;
  j["epoch"] = record.epoch;
  j["query_loss"] = record.query_loss;
  j["support_loss"] = record.support_loss;
  j["wall_seconds"] = record.wall_seconds;
  auto& tasks = j["tasks"] = nlohmann::json::array();
  for (const auto& t : record.tasks) {
    tasks.push_back({{"dlp", t.dlp.ToString()},
                     {"support_loss", t.support_loss},
                     {"query_loss", t.query_loss},
                     {"support_with_replacement", t.support_with_replacement}});
  }
  out << j.dump() << '\n';
}

std::size_t MetaBatchesPerEpoch(std::size_t pooled_pairs, const MetaConfig& config) {
  const std::size_t draws = config.m * (config.n + config.q);
  return std::max<std::size_t>(1, (pooled_pairs + draws - 1) / draws);
}

Episode SampleEpisode(const SamplingPlan& plan, const std::vector<DlpDataset>& tasks, const MetaConfig& config,
                      std::size_t index) {
  std::map<DlpId, const DlpDataset*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.id, &t);
  Rng rng(DeriveSeed(config.seed, {kEpisodeStream, index}));
  std::vector<EpisodeSource> sources;
  for (const auto& id : SampleDlps(plan, config.m, rng, config.replacement)) sources.push_back({id, &by_id.at(id)->train});
  return BuildEpisode(sources, config.n, config.q, rng);
}

MetaTrainResult MetaTrain(Model& model, const std::vector<DlpDataset>& tasks, const Vocab& vocab,
                          const MetaConfig& config, const MetaLogSink& sink) {
  config.Validate();
  Require(!tasks.empty(), ErrorKind::kInput, "meta-training needs at least one DLP");
  Require(model.TrainableCount() > 0, ErrorKind::kState, "meta-training with no trainable parameters");
  std::vector<DlpId> ids;
  std::vector<std::size_t> sizes;
  std::size_t pooled = 0;
  for (const auto& t : tasks) {
    ids.push_back(t.id);
    sizes.push_back(t.train.size());
    pooled += t.train.size();
  }
  const SamplingPlan plan = MakeSamplingPlan(ids, sizes, config.temperature);

  MetaTrainResult result;
  result.batches_per_epoch = MetaBatchesPerEpoch(pooled, config);
  std::size_t total = static_cast<std::size_t>(std::ceil(config.epochs * static_cast<double>(result.batches_per_epoch)));
  if (config.max_meta_batches > 0) total = std::min(total, config.max_meta_batches);

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t inner_batch = config.inner_batch == 0 ? config.n : config.inner_batch;
  Snapshot psi = TakeSnapshot(model);
  Snapshot best = psi;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  double epoch_sum = 0.0;
  std::size_t epoch_count = 0;

  for (std::size_t b = 0; b < total; ++b) {
    const Episode episode = SampleEpisode(plan, tasks, config, b);
    MetaBatchLog log;
    log.meta_batch = b;
    log.epoch = b / result.batches_per_epoch;
    std::vector<Snapshot> results;
    std::size_t with_query = 0;
    for (std::size_t t = 0; t < episode.tasks.size(); ++t) {
      const EpisodeTask& task = episode.tasks[t];
      Rng dropout(DeriveSeed(config.seed, {kDropoutStream, b, t}));
      TaskLoss tl;
      tl.dlp = task.dlp;
      tl.support_with_replacement = task.support_with_replacement;
      tl.support_loss = RunInner(model, psi, EncodeExamples(task.support, vocab, config.tags), config.k,
                                 config.inner_optimizer, inner_batch, dropout);
      results.push_back(TakeSnapshot(model));
      if (!task.query.empty()) {
        tl.query_loss = MeanLoss(model, EncodeExamples(task.query, vocab, config.tags));
        Require(std::isfinite(tl.query_loss), ErrorKind::kNumeric, "non-finite query loss at meta-batch " + std::to_string(b));
        log.query_loss += tl.query_loss;
        ++with_query;
      }
      log.support_loss += tl.support_loss;
      log.tasks.push_back(tl);
    }
    psi = ReptileStep(psi, results, config.beta);
    model.SetParams(psi);
    log.support_loss /= static_cast<double>(episode.tasks.size());
    if (with_query > 0) {
      log.query_loss /= static_cast<double>(with_query);
      epoch_sum += log.query_loss;
      ++epoch_count;
    }
    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (sink) sink(log);
    result.log.push_back(std::move(log));
    result.meta_batches = b + 1;

    const bool epoch_end = (b + 1) % result.batches_per_epoch == 0 || b + 1 == total;
    if (!epoch_end) continue;
    const double epoch_loss = epoch_count > 0 ? epoch_sum / static_cast<double>(epoch_count)
                                              : std::numeric_limits<double>::infinity();
    result.epoch_query_losses.push_back(epoch_loss);
    ++result.epochs_run;
    epoch_sum = 0.0;
    epoch_count = 0;
    // Without query sets there is nothing to select on; keep the latest.
    if (epoch_loss < best_loss || !std::isfinite(epoch_loss)) {
      best_loss = epoch_loss;
      best = psi;
      result.best_epoch = result.epochs_run - 1;
      stale = 0;
    } else if (++stale >= config.patience && b + 1 < total) {
      result.stopped_early = true;
      break;
    }
  }
  model.SetParams(best);
  result.params = std::move(best);
  return result;
}

AdaptResult MetaAdapt(Model& model, const Snapshot& start, const std::vector<TokenPair>& adapt,
                      const AdaptSettings& settings, Rng& rng) {
  Require(!adapt.empty(), ErrorKind::kInput, "meta-adaptation on an empty adapt split");
  CheckLayout(model, start);
  model.SetParams(start);
  FitSettings fit;
  fit.optimizer = settings.optimizer;
  fit.batch_size = settings.batch_size;
  fit.epochs = settings.epochs;
  fit.shuffle = settings.shuffle;
  AdaptResult out;
  out.losses = Fit(model, adapt, fit, rng).losses;
  out.params = TakeSnapshot(model);
  return out;
}

}  // namespace metaadapt
