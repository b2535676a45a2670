#include "metaadapt/eval/report.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "metaadapt/core/error.h"
#include "metaadapt/model/transformer.h"

namespace metaadapt {
namespace {

std::string Num(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseDouble(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  Require(used == s.size() && !s.empty(), ErrorKind::kDataIntegrity, where + ": bad number '" + s + "'");
  return v;
}

std::size_t StrategyRank(const std::string& name) {
  const auto& all = AllStrategies();
  for (std::size_t i = 0; i < all.size(); ++i)
    if (StrategyName(all[i]) == name) return i;
  return all.size();
}

bool StrategyLess(const std::string& a, const std::string& b) {
  const auto ra = StrategyRank(a), rb = StrategyRank(b);
  return ra != rb ? ra < rb : a < b;
}

std::size_t BankSize(const Model& model, const std::string& bank) {
  std::size_t n = 0;
  for (const auto& name : model.BankParamNames(bank)) n += model.params().at(name).size();
  return n;
}

}  // namespace

void WriteMetricsCsv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.run_id << ',' << r.strategy << ',' << r.dlp.domain << ',' << r.dlp.src_lang << ',' << r.dlp.tgt_lang
        << ',' << Num(r.bleu, 4) << ',' << Num(r.chrf, 4) << ',' << Num(r.test_loss, 6) << ','
        << r.trainable_params << ',' << Num(r.trainable_ratio, 6) << ',' << Num(r.wall_seconds, 3) << '\n';
  }
}

std::vector<MetricsRecord> ReadMetricsCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorKind::kIo, "missing metrics file " + path.string());
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)) && line == kMetricsHeader, ErrorKind::kDataIntegrity,
          path.string() + ": unexpected metrics header");
  std::vector<MetricsRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(row);
    const auto f = SplitCsv(line);
    Require(f.size() == 11, ErrorKind::kDataIntegrity, where + ": expected 11 fields");
    MetricsRecord r;
    r.run_id = f[0];
    r.strategy = f[1];
    r.dlp = {f[2], f[3], f[4]};
    r.bleu = ParseDouble(f[5], where);
    r.chrf = ParseDouble(f[6], where);
    r.test_loss = ParseDouble(f[7], where);
    r.trainable_params = static_cast<std::size_t>(ParseDouble(f[8], where));
    r.trainable_ratio = ParseDouble(f[9], where);
    r.wall_seconds = ParseDouble(f[10], where);
    out.push_back(std::move(r));
  }
  return out;
}

TrainableCount CountTrainable(const Model& model, Strategy strategy) {
  std::size_t backbone = 0;
  for (const auto& name : model.BackboneNames()) backbone += model.params().at(name).size();
  const std::size_t primary = BankSize(model, kPrimaryBank);
  std::size_t stack = 0;
  for (const auto& bank : model.AdapterBanks())
    if (bank.rfind("adapter@", 0) == 0) stack += BankSize(model, bank);

  std::size_t trained = 0, used = backbone;
  switch (strategy) {
    case Strategy::kFullFt:
    case Strategy::kTagFt:
      trained = backbone;
      break;
    case Strategy::kM4Adapter:
    case Strategy::kAgnosticAdapter:
    case Strategy::kRandomAdapter:
      trained = primary;
      used += primary;
      break;
    case Strategy::kFullModelMeta:
      trained = backbone + primary;
      used += primary;
      break;
    case Strategy::kStackAdapter:
      trained = stack;
      used += stack;
      break;
    case Strategy::kZeroShot:
      break;
  }
  return {trained, static_cast<double>(trained) / static_cast<double>(used)};
}

std::string GroupingName(Grouping g) {
  switch (g) {
    case Grouping::kDomain: return "domain";
    case Grouping::kLanguagePair: return "language-pair";
    case Grouping::kStrategy: return "strategy";
    case Grouping::kDlp: return "dlp";
  }
  return "unknown";
}

Grouping ParseGrouping(const std::string& name) {
  for (Grouping g : {Grouping::kDomain, Grouping::kLanguagePair, Grouping::kStrategy, Grouping::kDlp})
    if (GroupingName(g) == name) return g;
  Fail(ErrorKind::kConfig, "unknown grouping '" + name + "'");
}

ReportTable Aggregate(const std::vector<MetricsRecord>& records, Grouping grouping, const std::string& reference) {
  Require(!records.empty(), ErrorKind::kInput, "aggregate: no records");
  const bool has_reference =
      std::any_of(records.begin(), records.end(), [&](const MetricsRecord& r) { return r.strategy == reference; });
  Require(has_reference, ErrorKind::kInput, "aggregate: reference strategy '" + reference + "' has no records");

  auto key_of = [&](const MetricsRecord& r) -> std::string {
    switch (grouping) {
      case Grouping::kDomain: return r.dlp.domain;
      case Grouping::kLanguagePair: return r.dlp.LanguagePair();
      case Grouping::kStrategy: return "all";
      case Grouping::kDlp: return r.dlp.ToString();
    }
    return "";
  };
  struct Sum {
    std::size_t n = 0;
    double bleu = 0, chrf = 0, loss = 0;
  };
  std::map<std::string, std::map<std::string, Sum>> sums;
  for (const auto& r : records) {
    Sum& s = sums[key_of(r)][r.strategy];
    ++s.n;
    s.bleu += r.bleu;
    s.chrf += r.chrf;
    s.loss += r.test_loss;
  }
  ReportTable table;
  table.grouping = grouping;
  table.reference = reference;
  for (const auto& [group, by_strategy] : sums) {
    std::vector<std::string> names;
    for (const auto& [name, s] : by_strategy) names.push_back(name);
    std::sort(names.begin(), names.end(), StrategyLess);
    const auto ref = by_strategy.find(reference);
    for (const auto& name : names) {
      const Sum& s = by_strategy.at(name);
      ReportRow row;
      row.group = group;
      row.strategy = name;
      row.count = s.n;
      row.bleu = s.bleu / static_cast<double>(s.n);
      row.chrf = s.chrf / static_cast<double>(s.n);
      row.test_loss = s.loss / static_cast<double>(s.n);
      if (ref != by_strategy.end()) {
        row.has_delta = true;
        row.delta_bleu = row.bleu - ref->second.bleu / static_cast<double>(ref->second.n);
        row.delta_chrf = row.chrf - ref->second.chrf / static_cast<double>(ref->second.n);
      }
      table.rows.push_back(row);
    }
  }
  return table;
}

void WriteReportCsv(const std::filesystem::path& path, const ReportTable& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out << GroupingName(table.grouping) << ",strategy,count,bleu,chrf,test_loss,delta_bleu,delta_chrf\n";
  for (const auto& r : table.rows) {
    out << r.group << ',' << r.strategy << ',' << r.count << ',' << Num(r.bleu, 4) << ',' << Num(r.chrf, 4) << ','
        << Num(r.test_loss, 6) << ',' << (r.has_delta ? Num(r.delta_bleu, 4) : "NA") << ','
        << (r.has_delta ? Num(r.delta_chrf, 4) : "NA") << '\n';
  }
}

std::string FormatReport(const ReportTable& table) {
  std::ostringstream out;
  out << "| " << GroupingName(table.grouping) << " | strategy | n | BLEU | chrF | loss | dBLEU vs " << table.reference
      << " | dchrF |\n|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : table.rows) {
    out << "| " << r.group << " | " << r.strategy << " | " << r.count << " | " << Num(r.bleu, 2) << " | "
        << Num(r.chrf, 2) << " | " << Num(r.test_loss, 3) << " | "
        << (r.has_delta ? (r.delta_bleu >= 0 ? "+" : "") + Num(r.delta_bleu, 2) : "NA") << " | "
        << (r.has_delta ? (r.delta_chrf >= 0 ? "+" : "") + Num(r.delta_chrf, 2) : "NA") << " |\n";
  }
  return out.str();
}

std::vector<EfficiencyRow> EfficiencyTable(const std::vector<MetricsRecord>& records) {
  std::map<std::string, EfficiencyRow> rows;
  for (const auto& r : records) rows.try_emplace(r.strategy, EfficiencyRow{r.strategy, r.trainable_params, r.trainable_ratio});
  std::vector<EfficiencyRow> out;
  for (auto& [name, row] : rows) out.push_back(row);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return StrategyLess(a.strategy, b.strategy); });
  return out;
}

}  // namespace metaadapt
