#include "metaadapt/corpus/dataset.h"

#include <fstream>
#include <map>
#include <sstream>

#include "metaadapt/core/error.h"

namespace metaadapt {

const char* SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kAdapt: return "adapt";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

const char* DlpRoleName(DlpRole role) {
  switch (role) {
    case DlpRole::kPretrain: return "pretrain";
    case DlpRole::kMetaTrain: return "meta-train";
    case DlpRole::kHeldOut: return "held-out";
  }
  return "?";
}

DlpRole ParseDlpRole(const std::string& name) {
  if (name == "pretrain") return DlpRole::kPretrain;
  if (name == "meta-train") return DlpRole::kMetaTrain;
  if (name == "held-out") return DlpRole::kHeldOut;
  Fail(ErrorKind::kDataIntegrity, "unknown DLP role: " + name);
}

std::size_t SplitSizes::Get(Split split) const {
  switch (split) {
    case Split::kTrain: return train;
    case Split::kAdapt: return adapt;
    case Split::kValid: return valid;
    case Split::kTest: return test;
  }
  return 0;
}

std::size_t& SplitSizes::Get(Split split) {
  switch (split) {
    case Split::kTrain: return train;
    case Split::kAdapt: return adapt;
    case Split::kValid: return valid;
    case Split::kTest: break;
  }
  return test;
}

const RegistryEntry& Registry::Find(const DlpId& id) const {
  for (const auto& e : entries)
    if (e.id == id) return e;
  Fail(ErrorKind::kInput, "DLP not in registry: " + id.ToString());
}

std::vector<RegistryEntry> Registry::WithRole(DlpRole role) const {
  std::vector<RegistryEntry> out;
  for (const auto& e : entries)
    if (e.role == role) out.push_back(e);
  return out;
}

void WriteRegistry(const Registry& registry) {
  const auto path = registry.root / kRegistryFile;
  std::ofstream out(path);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out << "domain\tsrc\ttgt\trole\ttrain_size\tadapt_size\tvalid_size\ttest_size\tpath\n";
  for (const auto& e : registry.entries) {
    out << e.id.domain << '\t' << e.id.src_lang << '\t' << e.id.tgt_lang << '\t' << DlpRoleName(e.role) << '\t'
        << e.sizes.train << '\t' << e.sizes.adapt << '\t' << e.sizes.valid << '\t' << e.sizes.test << '\t'
        << e.path << '\n';
  }
}

namespace {

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::size_t ParseSize(const std::string& text, const std::string& where) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  Require(pos == text.size() && !text.empty(), ErrorKind::kDataIntegrity, "bad size '" + text + "' in " + where);
  return static_cast<std::size_t>(v);
}

}  // namespace

Registry ReadRegistry(const std::filesystem::path& root) {
  const auto path = root / kRegistryFile;
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot read registry " + path.string());
  Registry registry;
  registry.root = root;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = SplitTabs(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    Require(f.size() == 9, ErrorKind::kDataIntegrity, "expected 9 columns at " + where);
    RegistryEntry e;
    e.id = DlpId{f[0], f[1], f[2]};
    try {
      e.id.Validate();
    } catch (const Error& err) {
      Fail(ErrorKind::kDataIntegrity, std::string(err.what()) + " at " + where);
    }
    e.role = ParseDlpRole(f[3]);
    e.sizes = {ParseSize(f[4], where), ParseSize(f[5], where), ParseSize(f[6], where), ParseSize(f[7], where)};
    e.path = f[8];
    registry.entries.push_back(std::move(e));
  }
  return registry;
}

void WritePairs(const std::filesystem::path& path, const std::vector<SentencePair>& pairs) {
  std::ofstream out(path);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& p : pairs) out << JoinTokens(p.source) << '\t' << JoinTokens(p.target) << '\n';
}

std::vector<SentencePair> ReadPairs(const std::filesystem::path& path, const DlpId& dlp) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot read " + path.string());
  std::vector<SentencePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t tab = line.find('\t');
    Require(tab != std::string::npos && line.find('\t', tab + 1) == std::string::npos, ErrorKind::kDataIntegrity,
            "expected one tab at " + path.string() + ":" + std::to_string(line_no));
    pairs.push_back({SplitTokens(std::string_view(line).substr(0, tab)),
                     SplitTokens(std::string_view(line).substr(tab + 1)), dlp});
  }
  return pairs;
}

const std::vector<SentencePair>& DlpDataset::Get(Split split) const {
  switch (split) {
    case Split::kTrain: return train;
    case Split::kAdapt: return adapt;
    case Split::kValid: return valid;
    case Split::kTest: break;
  }
  return test;
}

void CheckDisjoint(const DlpDataset& dataset) {
  std::map<std::pair<Tokens, Tokens>, Split> owner;
  for (Split split : kAllSplits) {
    for (const auto& p : dataset.Get(split)) {
      auto [it, inserted] = owner.emplace(std::make_pair(p.source, p.target), split);
      if (!inserted && it->second != split) {
        Fail(ErrorKind::kDataIntegrity, dataset.id.ToString() + ": pair '" + JoinTokens(p.source) +
                                            "' appears in both " + SplitName(it->second) + " and " +
                                            SplitName(split));
      }
    }
  }
}

DlpDataset LoadDlpDataset(const Registry& registry, const DlpId& id, const std::optional<SplitSizes>& caps) {
  const RegistryEntry& entry = registry.Find(id);
  DlpDataset ds;
  ds.id = id;
  for (Split split : kAllSplits) {
    if (entry.sizes.Get(split) == 0) continue;
    const auto path = registry.root / entry.path / (std::string(SplitName(split)) + ".tsv");
    auto pairs = ReadPairs(path, id);
    Require(pairs.size() == entry.sizes.Get(split), ErrorKind::kDataIntegrity,
            path.string() + " holds " + std::to_string(pairs.size()) + " pairs, registry says " +
                std::to_string(entry.sizes.Get(split)));
    if (caps && pairs.size() > caps->Get(split)) pairs.resize(caps->Get(split));
    switch (split) {
      case Split::kTrain: ds.train = std::move(pairs); break;
      case Split::kAdapt: ds.adapt = std::move(pairs); break;
      case Split::kValid: ds.valid = std::move(pairs); break;
      case Split::kTest: ds.test = std::move(pairs); break;
    }
  }
  CheckDisjoint(ds);
  return ds;
}

}  // namespace metaadapt
