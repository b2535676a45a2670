#include "metaadapt/cli/cli.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "metaadapt/cli/experiment.h"
#include "metaadapt/eval/metrics.h"
#include "metaadapt/tensor/checkpoint.h"

#ifndef METAADAPT_VERSION
#define METAADAPT_VERSION "unknown"
#endif

namespace metaadapt {
namespace fs = std::filesystem;

int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kDataIntegrity: return 3;
    case ErrorKind::kNumeric: return 4;
    case ErrorKind::kIo: return 5;
    case ErrorKind::kInput: return 6;
    case ErrorKind::kState:
    case ErrorKind::kDimension: return 7;
  }
  return 1;
}

namespace {

std::vector<std::string> ReadLines(const fs::path& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string ReadFileText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
};

void AddCommon(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "experiment config (JSON)")->required();
  cmd->add_option("-o,--out", c.out,
                  "output directory (default: $MADAPT_OUTPUT_ROOT/<name>, or output/<name> when unset)");
  cmd->add_option("--set", c.overrides, "config override key.path=value (repeatable)");
}

Experiment Open(const Common& c) {
  ExperimentConfig config = LoadExperimentConfig(c.config, c.overrides);
  fs::path root = c.out;
  if (root.empty()) {
    const char* env = std::getenv("MADAPT_OUTPUT_ROOT");
    root = fs::path(env && *env ? env : "output") / config.name;
  }
  Experiment e(std::move(config), root);
  e.WriteManifest();
  return e;
}

void PrintRecords(const std::vector<MetricsRecord>& records) {
  for (const auto& r : records)
    std::printf("%-18s %-22s BLEU %6.2f  chrF %6.2f  loss %.3f\n", r.strategy.c_str(), r.dlp.ToString().c_str(),
                r.bleu, r.chrf, r.test_loss);
}

}  // namespace

int RunCli(const std::vector<std::string>& args) {
  CLI::App app{"Meta-learned adapters for domain x language-pair translation tasks on synthetic corpora", "madapt"};
  app.require_subcommand(1);
  app.set_version_flag("--version", METAADAPT_VERSION);

  Common gen, pre, meta, base, adapt, sweep;
  std::uint64_t meta_seed = 1, base_seed = 1, adapt_seed = 1;
  std::string base_strategy, base_protocol = "main", adapt_strategy, adapt_protocol = "main";

  auto* gen_cmd = app.add_subcommand("gen-corpus", "generate the synthetic world and its registry");
  AddCommon(gen_cmd, gen);

  auto* pre_cmd = app.add_subcommand("pretrain", "pretrain the backbone on the general domain");
  AddCommon(pre_cmd, pre);

  auto* meta_cmd = app.add_subcommand("meta-train", "meta-train the shared adapter with Reptile");
  AddCommon(meta_cmd, meta);
  meta_cmd->add_option("--seed", meta_seed, "run seed")->required();

  auto* base_cmd = app.add_subcommand("baseline", "train one baseline strategy");
  AddCommon(base_cmd, base);
  base_cmd->add_option("--strategy", base_strategy,
                       "full-ft | tag-ft | agnostic-adapter | stack-adapter | full-model-meta")->required();
  base_cmd->add_option("--seed", base_seed, "run seed")->required();
  base_cmd->add_option("--protocol", base_protocol, "protocol whose targets the stack adapter covers");

  auto* adapt_cmd = app.add_subcommand("adapt", "adapt a trained strategy to each target DLP and score it");
  AddCommon(adapt_cmd, adapt);
  adapt_cmd->add_option("--strategy", adapt_strategy, "strategy name")->required();
  adapt_cmd->add_option("--seed", adapt_seed, "run seed")->required();
  adapt_cmd->add_option("--protocol", adapt_protocol, "protocol (main, domain-transfer, language-transfer, ...)");

  Common eval;
  std::string eval_protocol, hyp_path, ref_path, eval_out, eval_strategy = "external", eval_dlp = "text-xx-yy";
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "score hypothesis/reference files, or run a whole protocol (all strategies and seeds)");
  eval_cmd->add_option("-c,--config", eval.config, "experiment config for protocol mode");
  eval_cmd->add_option("-o,--out", eval.out, "output directory (protocol mode) or metrics file (file mode)");
  eval_cmd->add_option("--set", eval.overrides, "config override key.path=value (repeatable)");
  eval_cmd->add_option("--protocol", eval_protocol, "protocol to run");
  eval_cmd->add_option("--hyp", hyp_path, "hypotheses, one per line");
  eval_cmd->add_option("--ref", ref_path, "references, one per line");
  eval_cmd->add_option("--strategy", eval_strategy, "strategy label for file mode");
  eval_cmd->add_option("--dlp", eval_dlp, "DLP label for file mode, domain-src-tgt");

  auto* sweep_cmd = app.add_subcommand("sweep", "temperature and shot sweeps of the meta-adapter");
  AddCommon(sweep_cmd, sweep);

  Common rep;
  std::string rep_protocol = "main", rep_reference, rep_out;
  std::vector<std::string> rep_metrics;
  auto* rep_cmd = app.add_subcommand("report", "aggregate metrics into comparison tables");
  rep_cmd->add_option("-c,--config", rep.config, "experiment config (rebuilds its protocol reports)");
  rep_cmd->add_option("-o,--out", rep.out, "experiment output directory");
  rep_cmd->add_option("--set", rep.overrides, "config override key.path=value (repeatable)");
  rep_cmd->add_option("--protocol", rep_protocol, "protocol whose metrics to aggregate");
  rep_cmd->add_option("--metrics", rep_metrics, "metrics CSV files to aggregate instead of an experiment");
  rep_cmd->add_option("--reference", rep_reference, "reference strategy for the delta columns");
  rep_cmd->add_option("--report-dir", rep_out, "destination for --metrics mode");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen_cmd) {
      Experiment e = Open(gen);
      e.GenerateCorpus();
      std::printf("world written to %s\n", (e.root() / "world").string().c_str());
    } else if (*pre_cmd) {
      Experiment e = Open(pre);
      const PretrainReport r = e.Pretrain();
      std::printf("backbone dev BLEU %.2f chrF %.2f checksum %s%s\n", r.dev_bleu, r.dev_chrf,
                  ChecksumHex(r.checksum).c_str(), r.cached ? " (cached)" : "");
    } else if (*meta_cmd) {
      Experiment e = Open(meta);
      const TrainedStrategy& t = e.Train(Strategy::kM4Adapter, meta_seed, "main");
      std::printf("meta-trained adapter: %zu meta-batches, %.1f s\n", t.meta.meta_batches, t.wall_seconds);
    } else if (*base_cmd) {
      const Strategy s = ParseStrategy(base_strategy);
      Require(IsBaseline(s), ErrorKind::kConfig, "'" + base_strategy + "' is not a baseline strategy");
      Experiment e = Open(base);
      const TrainedStrategy& t = e.Train(s, base_seed, base_protocol);
      std::printf("%s trained in %.1f s\n", base_strategy.c_str(), t.wall_seconds);
    } else if (*adapt_cmd) {
      Experiment e = Open(adapt);
      PrintRecords(e.Evaluate(ParseStrategy(adapt_strategy), adapt_seed, adapt_protocol));
    } else if (*eval_cmd) {
      if (!hyp_path.empty() || !ref_path.empty()) {
        Require(!hyp_path.empty() && !ref_path.empty(), ErrorKind::kConfig, "evaluate needs both --hyp and --ref");
        const auto hyps = ReadLines(hyp_path);
        const auto refs = ReadLines(ref_path);
        MetricsRecord r;
        r.run_id = "evaluate";
        r.strategy = eval_strategy;
        r.dlp = ParseDlpId(eval_dlp);
        r.bleu = CorpusBleu(hyps, refs);
        r.chrf = CorpusChrf(hyps, refs);
        r.trainable_ratio = 0.0;
        std::printf("BLEU %.2f\nchrF %.2f\n", r.bleu, r.chrf);
        if (!eval.out.empty()) {
          WriteMetricsCsv(eval.out, {r});
          WriteReportDir({r}, r.strategy, fs::path(eval.out).parent_path() / "report", "evaluate");
        }
      } else {
        Require(!eval.config.empty(), ErrorKind::kConfig, "evaluate needs --hyp/--ref or --config");
        Experiment e = Open(eval);
        const std::string protocol = eval_protocol.empty() ? e.config().protocols.front().name : eval_protocol;
        e.RunProtocol(protocol);
        std::printf("%s", ReadFileText(e.root() / "reports" / protocol / "report.md").c_str());
      }
    } else if (*sweep_cmd) {
      Experiment e = Open(sweep);
      e.RunSweep();
      std::printf("%s", ReadFileText(e.root() / "sweep" / "report.md").c_str());
    } else if (*rep_cmd) {
      if (!rep_metrics.empty()) {
        std::vector<MetricsRecord> records;
        for (const auto& m : rep_metrics) {
          auto r = ReadMetricsCsv(m);
          records.insert(records.end(), r.begin(), r.end());
        }
        Require(!rep_out.empty(), ErrorKind::kConfig, "report --metrics needs --report-dir");
        Require(!records.empty(), ErrorKind::kInput, "no metrics rows to report");
        WriteReportDir(records, rep_reference.empty() ? records.front().strategy : rep_reference, rep_out, "report");
        std::printf("%s", ReadFileText(fs::path(rep_out) / "report.md").c_str());
      } else {
        Require(!rep.config.empty(), ErrorKind::kConfig, "report needs --config or --metrics");
        ExperimentConfig config = LoadExperimentConfig(rep.config, rep.overrides);
        if (!rep_reference.empty()) config.reference = rep_reference;
        fs::path root = rep.out;
        if (root.empty()) {
          const char* env = std::getenv("MADAPT_OUTPUT_ROOT");
          root = fs::path(env && *env ? env : "output") / config.name;
        }
        Experiment e(std::move(config), root);
        e.WriteReports(rep_protocol);
        std::printf("%s", ReadFileText(root / "reports" / rep_protocol / "report.md").c_str());
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(ErrorKindName(e.kind())).c_str(), e.what());
    return ExitCode(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace metaadapt
