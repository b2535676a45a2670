#include "metaadapt/cli/experiment.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "metaadapt/core/error.h"
#include "metaadapt/corpus/world.h"
#include "metaadapt/tensor/checkpoint.h"

#ifndef METAADAPT_VERSION
#define METAADAPT_VERSION "unknown"
#endif

namespace metaadapt {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

void Log(const std::string& message) {
  std::fprintf(stderr, "[madapt] %s\n", message.c_str());
  std::fflush(stderr);
}

std::string Fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

std::optional<json> ReadJson(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  json j = json::parse(ReadText(path), nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

void WriteLossCsv(const fs::path& path, const std::vector<double>& losses) {
  std::string text = "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) text += std::to_string(i) + "," + Fixed(losses[i], 6) + "\n";
  WriteText(path, text);
}

std::vector<std::pair<std::string, std::string>> OrderedPairs(const std::vector<std::string>& langs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& a : langs)
    for (const auto& b : langs)
      if (a != b) out.emplace_back(a, b);
  return out;
}

json PartitionJson(const Model& model) {
  const ParamPartition p = model.Partition();
  return {{"backbone", p.backbone}, {"adapters", p.adapters}};
}

}  // namespace

std::vector<DlpId> ResolveTargets(const ProtocolSpec& protocol, const WorldSpec& world) {
  std::vector<std::string> meta_langs, held_langs, meta_domains;
  for (const auto& l : world.LanguageCodes()) (world.IsHeldOutLanguage(l) ? held_langs : meta_langs).push_back(l);
  for (const auto& d : world.domains)
    if (!world.IsHeldOutDomain(d)) meta_domains.push_back(d);
  std::vector<DlpId> out;
  if (!protocol.targets.empty()) {
    const auto domains = world.AllDomains();
    const auto langs = world.LanguageCodes();
    for (const auto& t : protocol.targets) {
      t.Validate();
      Require(std::find(domains.begin(), domains.end(), t.domain) != domains.end() &&
                  std::find(langs.begin(), langs.end(), t.src_lang) != langs.end() &&
                  std::find(langs.begin(), langs.end(), t.tgt_lang) != langs.end(),
              ErrorKind::kConfig, "target " + t.ToString() + " is not part of the world");
      out.push_back(t);
    }
    return out;
  }
  if (protocol.name == "main") {
    Require(!held_langs.empty() && !meta_langs.empty() && !world.held_out_domains.empty(), ErrorKind::kConfig,
            "main protocol needs held-out languages, meta-training languages and a held-out domain");
    for (const auto& d : world.held_out_domains) {
      for (const auto& [a, b] : OrderedPairs(held_langs)) out.push_back({d, a, b});
      for (const auto& h : held_langs) {
        out.push_back({d, h, meta_langs.front()});
        out.push_back({d, meta_langs.front(), h});
      }
    }
  } else if (protocol.name == "domain-transfer") {
    for (const auto& d : world.held_out_domains)
      for (const auto& [a, b] : OrderedPairs(meta_langs)) out.push_back({d, a, b});
  } else if (protocol.name == "language-transfer") {
    for (const auto& d : meta_domains)
      for (const auto& [a, b] : OrderedPairs(held_langs)) out.push_back({d, a, b});
  } else {
    Fail(ErrorKind::kConfig, "unknown protocol '" + protocol.name + "'");
  }
  Require(!out.empty(), ErrorKind::kConfig, "protocol '" + protocol.name + "' selects no DLPs in this world");
  return out;
}

Experiment::Experiment(ExperimentConfig config, fs::path root) : config_(std::move(config)), root_(std::move(root)) {
  config_.Validate();
}

void Experiment::WriteManifest() {
  // One entry per config name, so experiments sharing a root keep theirs.
  json all = ReadJson(root_ / "manifest.json").value_or(json::object());
  if (!all.is_object() || !all.contains("experiments")) all = {{"experiments", json::object()}};
  all["experiments"][config_.name] = {{"code_version", METAADAPT_VERSION},
                                      {"seeds", config_.seeds},
                                      {"config", ExperimentConfigToJson(config_)}};
  WriteText(root_ / "manifest.json", all.dump(2) + "\n");
}

void Experiment::GenerateCorpus() {
  const fs::path dir = root_ / "world";
  const std::string expected = WorldSpecToJson(config_.world).dump(2) + "\n";
  if (fs::exists(dir / "registry.tsv") && fs::exists(dir / "world.json") && ReadText(dir / "world.json") == expected) {
    Log("world: reusing " + dir.string());
    return;
  }
  fs::remove_all(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const GenerateReport r = GenerateWorld(config_.world, dir);
  Log("world: " + std::to_string(r.dlps) + " DLPs, " + std::to_string(r.pairs) + " pairs, " +
      std::to_string(r.filtered) + " filtered, " + Fixed(Seconds(t0), 1) + " s");
  registry_.reset();
  vocab_.reset();
}

const Registry& Experiment::registry() {
  if (!registry_) {
    GenerateCorpus();
    registry_ = ReadRegistry(root_ / "world");
  }
  return *registry_;
}

const Vocab& Experiment::vocab() {
  if (!vocab_) {
    registry();
    vocab_ = Vocab::Load(root_ / "world" / "vocab.tsv");
  }
  return *vocab_;
}

PretrainReport Experiment::Pretrain() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig mc = config_.model;
  mc.vocab_size = vocab().size();
  const json key_json{{"world", WorldSpecToJson(config_.world)},
                      {"model", ModelConfigToJson(mc)},
                      {"adapter", AdapterConfigToJson(config_.adapter)},
                      {"pretrain", PretrainSettingsToJson(config_.pretrain)}};
  backbone_key_ = JsonKey(key_json);
  const fs::path dir = root_ / "backbone";
  PretrainReport report;

  auto model = std::make_unique<Model>(mc, config_.adapter, config_.pretrain.seed);
  const auto manifest = ReadJson(dir / "manifest.json");
  if (manifest && manifest->value("key", "") == backbone_key_ && fs::exists(dir / "backbone.ckpt")) {
    model->SetParams(LoadCheckpoint(dir / "backbone.ckpt"));
    report.cached = true;
    report.dev_bleu = manifest->value("dev_bleu", 0.0);
    report.dev_chrf = manifest->value("dev_chrf", 0.0);
    Log("backbone: reusing " + dir.string());
  } else {
    std::vector<SentencePair> train, dev;
    for (const auto& e : registry().WithRole(DlpRole::kPretrain)) {
      const DlpDataset ds = LoadDlpDataset(registry(), e.id);
      train.insert(train.end(), ds.train.begin(), ds.train.end());
      dev.insert(dev.end(), ds.valid.begin(), ds.valid.end());
    }
    Require(!train.empty(), ErrorKind::kDataIntegrity, "world has no pretraining data");
    ModelConfig train_config = mc;
    train_config.dropout = config_.pretrain.dropout;
    Model trainee(train_config, config_.adapter, config_.pretrain.seed);
    trainee.FreezeAll();
    trainee.SetBackboneTrainable(true);
    trainee.SetActiveBanks({});
    Rng rng(DeriveSeed(config_.pretrain.seed, {0x50524554}));
    Log("backbone: pretraining on " + std::to_string(train.size()) + " pairs");
    const FitResult fit = Fit(trainee, EncodeExamples(train, vocab()), config_.pretrain.fit, rng);
    model->SetParams(trainee.params());
    model->SetActiveBanks({});
    if (!dev.empty()) {
      const TranslationScores s = ScoreTranslations(*model, vocab(), dev, TagMode::kNone, config_.eval_batch);
      report.dev_bleu = s.bleu;
      report.dev_chrf = s.chrf;
    }
    fs::create_directories(dir);
    SaveCheckpoint(dir / "backbone.ckpt", model->params());
    WriteLossCsv(dir / "loss.csv", fit.losses);
    json m{{"key", backbone_key_},
           {"kind", "backbone"},
           {"model", ModelConfigToJson(mc)},
           {"adapter", AdapterConfigToJson(config_.adapter)},
           {"pretrain", PretrainSettingsToJson(config_.pretrain)},
           {"partition", PartitionJson(*model)},
           {"backbone_checksum", ChecksumHex(model->BackboneChecksum())},
           {"dev_bleu", report.dev_bleu},
           {"dev_chrf", report.dev_chrf},
           {"steps", fit.steps}};
    WriteText(dir / "manifest.json", m.dump(2) + "\n");
  }
  model->SetActiveBanks({kPrimaryBank});
  report.checksum = model->BackboneChecksum();
  report.wall_seconds = Seconds(t0);
  if (report.dev_bleu < config_.pretrain.min_dev_bleu)
    Log("warning: backbone dev BLEU " + Fixed(report.dev_bleu, 2) + " is below the learnability gate " +
        Fixed(config_.pretrain.min_dev_bleu, 1));
  else
    Log("backbone: dev BLEU " + Fixed(report.dev_bleu, 2));
  backbone_ = std::move(model);
  return report;
}

const Model& Experiment::Backbone() {
  if (!backbone_) Pretrain();
  return *backbone_;
}

const std::vector<DlpDataset>& Experiment::MetaTrainSet() {
  if (!meta_train_) {
    std::vector<DlpDataset> sets;
    for (const auto& e : registry().WithRole(DlpRole::kMetaTrain)) sets.push_back(LoadDlpDataset(registry(), e.id));
    Require(!sets.empty(), ErrorKind::kDataIntegrity, "registry has no meta-training DLPs");
    meta_train_ = std::move(sets);
  }
  return *meta_train_;
}

const std::vector<DlpDataset>& Experiment::Targets(const std::string& protocol) {
  auto it = targets_.find(protocol);
  if (it == targets_.end()) {
    std::vector<DlpDataset> sets;
    for (const auto& id : ResolveTargets(config_.Protocol(protocol), config_.world))
      sets.push_back(LoadDlpDataset(registry(), id));
    it = targets_.emplace(protocol, std::move(sets)).first;
  }
  return it->second;
}

fs::path Experiment::RunDir(Strategy strategy, std::uint64_t seed, const std::string& protocol) const {
  std::string name(StrategyName(strategy));
  if (strategy == Strategy::kStackAdapter) name += "@" + protocol;
  return root_ / "runs" / ("seed-" + std::to_string(seed)) / name;
}

std::string Experiment::StrategyKey(Strategy strategy, std::uint64_t seed, const std::string& protocol,
                                    const StrategyConfig& config) const {
  json targets = json::array();
  if (strategy == Strategy::kStackAdapter)
    for (const auto& t : ResolveTargets(config_.Protocol(protocol), config_.world)) targets.push_back(t.ToString());
  return JsonKey({{"backbone", backbone_key_},
                  {"strategy", StrategyName(strategy)},
                  {"seed", seed},
                  {"config", StrategyConfigToJson(config)},
                  {"targets", targets}});
}

const TrainedStrategy& Experiment::Train(Strategy strategy, std::uint64_t seed, const std::string& protocol) {
  return TrainWith(strategy, seed, protocol, config_.strategy, RunDir(strategy, seed, protocol));
}

const TrainedStrategy& Experiment::TrainWith(Strategy strategy, std::uint64_t seed, const std::string& protocol,
                                             const StrategyConfig& config, const fs::path& dir) {
  const Model& base = Backbone();
  const std::string key = StrategyKey(strategy, seed, protocol, config);
  if (auto it = trained_.find(key); it != trained_.end()) return it->second;

  const std::string label = std::string(StrategyName(strategy)) + " seed " + std::to_string(seed);
  TrainedStrategy trained;
  const auto manifest = ReadJson(dir / "manifest.json");
  if (manifest && manifest->value("key", "") == key && fs::exists(dir / "trained.ckpt")) {
    trained.strategy = strategy;
    trained.seed = seed;
    trained.params = LoadCheckpoint(dir / "trained.ckpt");
    trained.stack_banks = manifest->value("stack_banks", std::vector<std::string>{});
    trained.losses = manifest->value("losses", std::vector<double>{});
    trained.wall_seconds = manifest->value("wall_seconds", 0.0);
    trained.meta.meta_batches = manifest->value("meta_batches", std::size_t{0});
    Log("train: reusing " + label);
  } else {
    Log("train: " + label);
    fs::create_directories(dir);
    std::ofstream log_file;
    MetaLogSink sink;
    if (strategy == Strategy::kM4Adapter || strategy == Strategy::kFullModelMeta) {
      log_file.open(dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
      sink = [&log_file](const MetaBatchLog& r) { WriteMetaLogLine(log_file, r); };
    }
    const std::vector<DlpDataset> no_targets;
    const auto& targets = strategy == Strategy::kStackAdapter ? Targets(protocol) : no_targets;
    trained = TrainStrategy(strategy, base, MetaTrainSet(), targets, vocab(), config, seed, sink);
    SaveCheckpoint(dir / "trained.ckpt", trained.params);
    WriteLossCsv(dir / "loss.csv", trained.losses);
    Model shape = InstantiateStrategy(base, trained, targets.empty() ? DlpId{} : targets.front().id);
    json m{{"key", key},
           {"kind", "strategy"},
           {"strategy", StrategyName(strategy)},
           {"seed", seed},
           {"config", StrategyConfigToJson(config)},
           {"partition", PartitionJson(shape)},
           {"backbone_checksum", ChecksumHex(base.BackboneChecksum())},
           {"stack_banks", trained.stack_banks},
           {"losses", trained.losses},
           {"meta_batches", trained.meta.meta_batches},
           {"best_epoch", trained.meta.best_epoch},
           {"stopped_early", trained.meta.stopped_early},
           {"epoch_query_losses", trained.meta.epoch_query_losses},
           {"wall_seconds", trained.wall_seconds}};
    WriteText(dir / "manifest.json", m.dump(2) + "\n");
    Log("train: " + label + " done in " + Fixed(trained.wall_seconds, 1) + " s");
  }
  return trained_.emplace(key, std::move(trained)).first->second;
}

namespace {

std::vector<MetricsRecord> EvaluateTrained(const Model& base, const TrainedStrategy& trained,
                                           const std::vector<DlpDataset>& targets, const Vocab& vocab,
                                           const ExperimentConfig& config, const std::string& run_id,
                                           const fs::path& out_dir) {
  std::vector<MetricsRecord> records;
  std::string curves = "dlp,step,loss\n";
  for (const auto& target : targets) {
    TargetResult r = AdaptAndEvaluate(base, trained, target, vocab, config.strategy, config.eval_batch);
    r.record.run_id = run_id;
    for (std::size_t i = 0; i < r.adapt_losses.size(); ++i)
      curves += target.id.ToString() + "," + std::to_string(i) + "," + Fixed(r.adapt_losses[i], 6) + "\n";
    if (!out_dir.empty()) {
      std::string hyp;
      for (const auto& h : r.hypotheses) hyp += h + "\n";
      WriteText(out_dir / "hyp" / std::string(StrategyName(trained.strategy)) / (target.id.ToString() + ".txt"), hyp);
    }
    records.push_back(r.record);
  }
  if (!out_dir.empty()) {
    const std::string name(StrategyName(trained.strategy));
    WriteMetricsCsv(out_dir / (name + ".csv"), records);
    WriteText(out_dir / (name + ".adapt_loss.csv"), curves);
  }
  return records;
}

}  // namespace

std::vector<MetricsRecord> Experiment::Evaluate(Strategy strategy, std::uint64_t seed, const std::string& protocol) {
  const TrainedStrategy& trained = Train(strategy, seed, protocol);
  const std::string run_id = config_.name + "-" + protocol + "-seed" + std::to_string(seed);
  Log("evaluate: " + std::string(StrategyName(strategy)) + " seed " + std::to_string(seed) + " on " + protocol);
  return EvaluateTrained(Backbone(), trained, Targets(protocol), vocab(), config_, run_id,
                         root_ / "runs" / ("seed-" + std::to_string(seed)) / protocol);
}

std::vector<MetricsRecord> Experiment::RunProtocol(const std::string& protocol) {
  std::vector<MetricsRecord> all;
  for (std::uint64_t seed : config_.seeds)
    for (Strategy s : config_.strategies) {
      auto records = Evaluate(s, seed, protocol);
      all.insert(all.end(), records.begin(), records.end());
    }
  WriteMetricsCsv(root_ / "metrics" / (protocol + ".csv"), all);
  WriteReports(protocol);
  return all;
}

void WriteReportDir(const std::vector<MetricsRecord>& records, const std::string& reference, const fs::path& dir,
                    const std::string& title) {
  std::string md = "# " + title + "\n\n";
  for (Grouping g : {Grouping::kStrategy, Grouping::kDomain, Grouping::kLanguagePair, Grouping::kDlp}) {
    const ReportTable table = Aggregate(records, g, reference);
    WriteReportCsv(dir / (GroupingName(g) + ".csv"), table);
    md += "## By " + GroupingName(g) + "\n\n" + FormatReport(table) + "\n";
  }
  std::string eff = "strategy,trainable_params,trainable_ratio\n";
  md += "## Trainable parameters\n\n| strategy | trainable | ratio |\n|---|---|---|\n";
  for (const auto& row : EfficiencyTable(records)) {
    eff += row.strategy + "," + std::to_string(row.trainable_params) + "," + Fixed(row.trainable_ratio, 6) + "\n";
    md += "| " + row.strategy + " | " + std::to_string(row.trainable_params) + " | " +
          Fixed(100.0 * row.trainable_ratio, 2) + "% |\n";
  }
  md += "\nfull-model-meta uses first-order Reptile updates, not second-order MAML.\n";
  WriteText(dir / "efficiency.csv", eff);
  WriteText(dir / "report.md", md);
}

void Experiment::WriteReports(const std::string& protocol) {
  const auto records = ReadMetricsCsv(root_ / "metrics" / (protocol + ".csv"));
  const fs::path dir = root_ / "reports" / protocol;
  WriteReportDir(records, config_.reference, dir, config_.name + ": " + protocol);

  std::string curves = "strategy,seed,step,loss\n";
  std::set<std::string> strategies;
  for (const auto& r : records) strategies.insert(r.strategy);
  for (std::uint64_t seed : config_.seeds) {
    for (Strategy s : AllStrategies()) {
      if (!strategies.count(std::string(StrategyName(s)))) continue;
      const fs::path loss = RunDir(s, seed, protocol) / "loss.csv";
      if (!fs::exists(loss)) continue;
      std::istringstream in(ReadText(loss));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line))
        if (!line.empty()) curves += std::string(StrategyName(s)) + "," + std::to_string(seed) + "," + line + "\n";
    }
  }
  WriteText(dir / "loss_curves.csv", curves);
}

void WriteSweepCsv(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::string text = "axis,value,bleu,chrf,test_loss,meta_batches,best\n";
  for (const auto& r : rows)
    text += r.axis + "," + r.value + "," + Fixed(r.bleu, 4) + "," + Fixed(r.chrf, 4) + "," + Fixed(r.test_loss, 6) +
            "," + std::to_string(r.meta_batches) + "," + (r.best ? "1" : "0") + "\n";
  WriteText(path, text);
}

std::vector<SweepRow> Experiment::RunSweep() {
  const SweepSpec& sweep = config_.sweep;
  Require(!sweep.temperatures.empty() || !sweep.shots.empty(), ErrorKind::kConfig, "sweep grid is empty");
  const auto& targets = Targets(sweep.protocol);
  std::vector<SweepRow> all;
  std::string md = "# " + config_.name + ": sweep on " + sweep.protocol + "\n";

  auto run_axis = [&](const std::string& axis, std::size_t count, auto apply, auto label) {
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < count; ++i) {
      StrategyConfig cfg = config_.strategy;
      cfg.meta.epochs = sweep.meta_epochs;
      apply(cfg.meta, i);
      const std::string value = label(i);
      const fs::path dir = root_ / "sweep" / "runs" / (axis + "-" + value);
      const TrainedStrategy& trained = TrainWith(Strategy::kM4Adapter, sweep.seed, sweep.protocol, cfg, dir);
      ExperimentConfig eval_config = config_;
      eval_config.strategy = cfg;
      const auto records = EvaluateTrained(Backbone(), trained, targets, vocab(), eval_config,
                                           config_.name + "-sweep-" + axis + "-" + value, dir / "eval");
      SweepRow row;
      row.axis = axis;
      row.value = value;
      for (const auto& r : records) {
        row.bleu += r.bleu;
        row.chrf += r.chrf;
        row.test_loss += r.test_loss;
      }
      const double n = static_cast<double>(records.size());
      row.bleu /= n;
      row.chrf /= n;
      row.test_loss /= n;
      row.meta_batches = trained.meta.meta_batches;
      rows.push_back(row);
      Log("sweep: " + axis + "=" + value + " BLEU " + Fixed(row.bleu, 2));
    }
    if (!rows.empty()) {
      auto best = std::max_element(rows.begin(), rows.end(),
                                   [](const SweepRow& a, const SweepRow& b) { return a.bleu < b.bleu; });
      best->best = true;
      WriteSweepCsv(root_ / "sweep" / (axis + ".csv"), rows);
      md += "\n## " + axis + "\n\n| " + axis + " | BLEU | chrF | loss | meta-batches | best |\n|---|---|---|---|---|---|\n";
      for (const auto& r : rows)
        md += "| " + r.value + " | " + Fixed(r.bleu, 2) + " | " + Fixed(r.chrf, 2) + " | " + Fixed(r.test_loss, 3) +
              " | " + std::to_string(r.meta_batches) + " | " + (r.best ? "*" : "") + " |\n";
    }
    all.insert(all.end(), rows.begin(), rows.end());
  };

  run_axis("temperature", sweep.temperatures.size(),
           [&](MetaConfig& m, std::size_t i) { m.temperature = sweep.temperatures[i]; },
           [&](std::size_t i) { return sweep.temperatures[i].ToString(); });
  run_axis("shots", sweep.shots.size(), [&](MetaConfig& m, std::size_t i) { m.n = sweep.shots[i]; },
           [&](std::size_t i) { return std::to_string(sweep.shots[i]); });
  WriteText(root_ / "sweep" / "report.md", md);
  return all;
}

}  // namespace metaadapt
