#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metaadapt/core/dlp.h"
#include "metaadapt/corpus/sentence.h"

namespace metaadapt {

enum class Split { kTrain, kAdapt, kValid, kTest };
inline constexpr Split kAllSplits[] = {Split::kTrain, Split::kAdapt, Split::kValid, Split::kTest};
const char* SplitName(Split split);

// Role of a DLP in the generated world.
//   pretrain  neutral-domain data for the backbone
//   meta-train  seen domain and seen languages
//   held-out  held-out domain or a held-out language
enum class DlpRole { kPretrain, kMetaTrain, kHeldOut };
const char* DlpRoleName(DlpRole role);
DlpRole ParseDlpRole(const std::string& name);

struct SplitSizes {
  std::size_t train = 5000;
  std::size_t adapt = 500;
  std::size_t valid = 500;
  std::size_t test = 500;

  std::size_t Get(Split split) const;
  std::size_t& Get(Split split);
};

// One registry row. Column order of the TSV manifest:
//   domain src tgt role train_size adapt_size valid_size test_size path
// where path is the DLP directory relative to the registry file; split
// files inside it are <split>.tsv.
struct RegistryEntry {
  DlpId id;
  DlpRole role = DlpRole::kMetaTrain;
  SplitSizes sizes;
  std::string path;
};

struct Registry {
  std::filesystem::path root;  // directory containing registry.tsv
  std::vector<RegistryEntry> entries;

  const RegistryEntry& Find(const DlpId& id) const;  // input error if absent
  std::vector<RegistryEntry> WithRole(DlpRole role) const;
};

inline constexpr const char* kRegistryFile = "registry.tsv";
void WriteRegistry(const Registry& registry);
// Missing file -> I/O error; malformed rows -> data-integrity error.
Registry ReadRegistry(const std::filesystem::path& root);

// "source tokens<TAB>target tokens" per line.
void WritePairs(const std::filesystem::path& path, const std::vector<SentencePair>& pairs);
std::vector<SentencePair> ReadPairs(const std::filesystem::path& path, const DlpId& dlp);

struct DlpDataset {
  DlpId id;
  std::vector<SentencePair> train;
  std::vector<SentencePair> adapt;
  std::vector<SentencePair> valid;
  std::vector<SentencePair> test;

  const std::vector<SentencePair>& Get(Split split) const;
  std::size_t size() const { return train.size(); }
};

// Reads every split with a nonzero registered size, truncating each to the
// cap (head of file), and verifies the splits are pairwise disjoint.
DlpDataset LoadDlpDataset(const Registry& registry, const DlpId& id,
                          const std::optional<SplitSizes>& caps = std::nullopt);

// Data-integrity error naming the first shared pair.
void CheckDisjoint(const DlpDataset& dataset);

}  // namespace metaadapt
