#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "metaadapt/corpus/dataset.h"
#include "metaadapt/corpus/vocab.h"
#include "metaadapt/model/transformer.h"
#include "metaadapt/tasks/episode.h"
#include "metaadapt/tasks/sampling.h"
#include "metaadapt/train/trainer.h"

namespace metaadapt {

// Values of the parameters being meta-learned, keyed by full parameter
// name. Usually the primary adapter bank; all parameters for the
// full-model meta-learning baseline.
using Snapshot = ParamMap;

struct MetaConfig {
  std::size_t m = 8;  // tasks per meta-batch
  std::size_t n = 8;  // support shots
  std::size_t q = 4;  // query shots
  std::size_t k = 3;  // inner steps
  double beta = 1.0;
  Temperature temperature = Temperature::Finite(1.0);
  double epochs = 3.0;
  std::uint64_t seed = 1;
  AdamWSettings inner_optimizer{.learning_rate = 5e-3};
  std::size_t inner_batch = 0;  // 0 = n, one support batch per step
  std::size_t patience = 3;     // meta-epochs without query-loss improvement
  Replacement replacement = Replacement::kWithout;
  std::size_t max_meta_batches = 0;  // 0 = epoch budget only
  TagMode tags = TagMode::kNone;

  // Config error unless m, n, k >= 1, beta in (0, 1] and epochs > 0.
  void Validate() const;
};

// Snapshot of the model's currently trainable parameters.
Snapshot TakeSnapshot(const Model& model);

// k optimizer steps from `start` on batches of the support set, with a fresh
// AdamW state. Batches walk the support in order. `start` must name exactly
// the model's trainable parameters (state error otherwise). Leaves the model
// holding the result, which is also returned. Numeric error with the step
// index on a non-finite loss.
Snapshot InnerAdapt(Model& model, const Snapshot& start, const std::vector<TokenPair>& support, std::size_t k,
                    const AdamWSettings& optimizer, std::size_t batch_size, Rng& dropout_rng);

// psi + (beta / m) * sum_i (results[i] - psi). State error on a layout
// mismatch; input error when results is empty.
Snapshot ReptileStep(const Snapshot& psi, const std::vector<Snapshot>& results, double beta);

struct TaskLoss {
  DlpId dlp;
  double support_loss = 0.0;  // last inner-step training loss
  double query_loss = 0.0;    // of the task-adapted parameters
  bool support_with_replacement = false;
};

struct MetaBatchLog {
  std::size_t meta_batch = 0;
  std::size_t epoch = 0;
  double query_loss = 0.0;  // mean over tasks
  double support_loss = 0.0;
  std::vector<TaskLoss> tasks;
  double wall_seconds = 0.0;
};

using MetaLogSink = std::function<void(const MetaBatchLog&)>;

// One JSON object per line.
void WriteMetaLogLine(std::ostream& out, const MetaBatchLog& record);

struct MetaTrainResult {
  Snapshot params;  // best epoch by mean query loss
  std::size_t meta_batches = 0;
  std::size_t batches_per_epoch = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  std::vector<double> epoch_query_losses;
  std::vector<MetaBatchLog> log;
};

// Number of meta-batches whose expected sentence draws, m * (n + q), add up
// to one pass over the pooled training data.
std::size_t MetaBatchesPerEpoch(std::size_t pooled_pairs, const MetaConfig& config);

// Episode `index` of a run: DLP draws and support/query sampling use a
// stream derived from (seed, index) alone.
Episode SampleEpisode(const SamplingPlan& plan, const std::vector<DlpDataset>& tasks, const MetaConfig& config,
                      std::size_t index);

// Reptile over the training splits of `tasks`, updating the model's
// trainable parameters. The model ends holding the returned parameters.
// Input error when `tasks` is empty.
MetaTrainResult MetaTrain(Model& model, const std::vector<DlpDataset>& tasks, const Vocab& vocab,
                          const MetaConfig& config, const MetaLogSink& sink = nullptr);

struct AdaptSettings {
  AdamWSettings optimizer{.learning_rate = 5e-3};
  std::size_t batch_size = 16;
  double epochs = 1.0;
  bool shuffle = true;
};

struct AdaptResult {
  Snapshot params;
  std::vector<double> losses;
};

// Supervised fine-tuning of the model's trainable parameters from `start`
// on the adapt split. Input error when the split is empty.
AdaptResult MetaAdapt(Model& model, const Snapshot& start, const std::vector<TokenPair>& adapt,
                      const AdaptSettings& settings, Rng& rng);

}  // namespace metaadapt
