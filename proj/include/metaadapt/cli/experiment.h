#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "metaadapt/cli/config.h"
#include "metaadapt/corpus/dataset.h"
#include "metaadapt/corpus/vocab.h"
#include "metaadapt/eval/report.h"
#include "metaadapt/meta/baselines.h"

namespace metaadapt {

// DLPs evaluated by a protocol, in a fixed order.
std::vector<DlpId> ResolveTargets(const ProtocolSpec& protocol, const WorldSpec& world);

struct PretrainReport {
  double dev_bleu = 0.0;
  double dev_chrf = 0.0;
  std::uint64_t checksum = 0;
  bool cached = false;
  double wall_seconds = 0.0;
};

struct SweepRow {
  std::string axis;   // "temperature" or "shots"
  std::string value;
  double bleu = 0.0;  // mean over the protocol's targets
  double chrf = 0.0;
  double test_loss = 0.0;
  std::size_t meta_batches = 0;
  bool best = false;
};

// Output layout under the root directory:
//   manifest.json                     config, seeds, code version
//   world/                            generated corpus and registry
//   backbone/backbone.ckpt            pretrained parameters (+ manifest.json,
//                                     loss.csv)
//   runs/seed-<s>/<strategy>[@<protocol>]/
//                                     trained.ckpt, manifest.json, loss.csv,
//                                     train_log.jsonl (meta strategies)
//   runs/seed-<s>/<protocol>/<strategy>.csv
//                                     metrics rows; adapt curves alongside
//   metrics/<protocol>.csv            every row of the protocol
//   reports/<protocol>/               aggregated tables
//   sweep/                            sweep tables
// Stages reuse files whose recorded key matches the current config.
class Experiment {
 public:
  Experiment(ExperimentConfig config, std::filesystem::path root);

  const ExperimentConfig& config() const { return config_; }
  const std::filesystem::path& root() const { return root_; }

  // Generates the world unless an identical one is already present.
  void GenerateCorpus();
  const Registry& registry();
  const Vocab& vocab();

  // Pretrains (or loads) the backbone and reports dev BLEU on the
  // pretraining valid splits.
  PretrainReport Pretrain();
  const Model& Backbone();

  const std::vector<DlpDataset>& MetaTrainSet();
  const std::vector<DlpDataset>& Targets(const std::string& protocol);

  // Training stage of one strategy and seed; the stack depends on the
  // protocol's targets, other strategies ignore `protocol`.
  const TrainedStrategy& Train(Strategy strategy, std::uint64_t seed, const std::string& protocol);

  // Adaptation and test scoring on every target of the protocol. Writes
  // runs/seed-<s>/<protocol>/<strategy>.csv.
  std::vector<MetricsRecord> Evaluate(Strategy strategy, std::uint64_t seed, const std::string& protocol);

  // Every configured strategy and seed on the protocol, then the reports.
  std::vector<MetricsRecord> RunProtocol(const std::string& protocol);

  // Aggregated tables for a protocol from its metrics file.
  void WriteReports(const std::string& protocol);

  // Temperature and shot sweeps of the m4adapter strategy.
  std::vector<SweepRow> RunSweep();

  void WriteManifest();

 private:
  std::filesystem::path RunDir(Strategy strategy, std::uint64_t seed, const std::string& protocol) const;
  std::string StrategyKey(Strategy strategy, std::uint64_t seed, const std::string& protocol,
                          const StrategyConfig& config) const;
  const TrainedStrategy& TrainWith(Strategy strategy, std::uint64_t seed, const std::string& protocol,
                                   const StrategyConfig& config, const std::filesystem::path& dir);

  ExperimentConfig config_;
  std::filesystem::path root_;
  std::optional<Registry> registry_;
  std::optional<Vocab> vocab_;
  std::unique_ptr<Model> backbone_;
  std::string backbone_key_;
  std::optional<std::vector<DlpDataset>> meta_train_;
  std::map<std::string, std::vector<DlpDataset>> targets_;
  std::map<std::string, TrainedStrategy> trained_;
};

// Tables by strategy, domain, language pair and DLP, plus the efficiency
// table, as CSV files and one report.md. Input error when the reference
// strategy has no records.
void WriteReportDir(const std::vector<MetricsRecord>& records, const std::string& reference,
                    const std::filesystem::path& dir, const std::string& title);

void WriteSweepCsv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace metaadapt
