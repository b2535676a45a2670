#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "metaadapt/core/dlp.h"
#include "metaadapt/meta/strategy.h"

namespace metaadapt {

class Model;

// One evaluated (strategy, DLP) cell of a run.
struct MetricsRecord {
  std::string run_id;
  std::string strategy;
  DlpId dlp;
  double bleu = 0.0;
  double chrf = 0.0;
  double test_loss = 0.0;
  std::size_t trainable_params = 0;
  double trainable_ratio = 0.0;
  double wall_seconds = 0.0;
};

// Column order of every metrics file.
inline constexpr const char* kMetricsHeader =
    "run_id,strategy,domain,src,tgt,bleu,chrf,test_loss,trainable_params,trainable_ratio,wall_seconds";

void WriteMetricsCsv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);
// I/O error when missing; data-integrity error on a malformed row.
std::vector<MetricsRecord> ReadMetricsCsv(const std::filesystem::path& path);

struct TrainableCount {
  std::size_t count = 0;
  double ratio = 0.0;
};

// Parameters the strategy trains, against the parameters it uses (backbone
// plus the adapter banks it runs). Full fine-tuning gives ratio 1; the
// stack counts every "adapter@" bank present in the model.
TrainableCount CountTrainable(const Model& model, Strategy strategy);

enum class Grouping { kDomain, kLanguagePair, kStrategy, kDlp };
std::string GroupingName(Grouping g);
Grouping ParseGrouping(const std::string& name);

struct ReportRow {
  std::string group;
  std::string strategy;
  std::size_t count = 0;
  double bleu = 0.0;
  double chrf = 0.0;
  double test_loss = 0.0;
  bool has_delta = false;  // false when the group has no reference record
  double delta_bleu = 0.0;
  double delta_chrf = 0.0;
};

struct ReportTable {
  Grouping grouping = Grouping::kDomain;
  std::string reference;
  std::vector<ReportRow> rows;  // sorted by group, then strategy
};

// Unweighted means per (group, strategy) with deltas against the reference
// strategy's mean in the same group. Input error when records are empty or
// the reference strategy never occurs.
ReportTable Aggregate(const std::vector<MetricsRecord>& records, Grouping grouping, const std::string& reference);

void WriteReportCsv(const std::filesystem::path& path, const ReportTable& table);
std::string FormatReport(const ReportTable& table);

struct EfficiencyRow {
  std::string strategy;
  std::size_t trainable_params = 0;
  double trainable_ratio = 0.0;
};

// One row per strategy, taken from its records.
std::vector<EfficiencyRow> EfficiencyTable(const std::vector<MetricsRecord>& records);

}  // namespace metaadapt
