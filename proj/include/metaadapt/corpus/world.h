#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "metaadapt/core/rng.h"
#include "metaadapt/corpus/dataset.h"
#include "metaadapt/corpus/sentence.h"

namespace metaadapt {

// Local word-order rule of a synthetic language, applied to every token
// except the sentence-final punctuation. All three rules are involutions.
enum class Reorder { kIdentity, kSwapPairs, kReverseTriples };
const char* ReorderName(Reorder r);
Reorder ParseReorder(const std::string& name);
Tokens ApplyReorder(Reorder r, const Tokens& tokens);

struct LanguageSpec {
  std::string code;
  Reorder reorder = Reorder::kIdentity;
};

struct WorldSpec {
  std::uint64_t seed = 1;
  std::vector<LanguageSpec> languages;
  std::vector<std::string> held_out_languages;
  std::vector<std::string> domains;  // specialized domains
  std::vector<std::string> held_out_domains;
  std::string general_domain = "general";

  std::size_t min_content = 2;  // content words per sentence
  std::size_t max_content = 5;
  double function_rate = 0.6;   // chance a content word is preceded by a function word
  std::size_t function_words = 6;
  std::size_t shared_words = 20;
  std::size_t core_words = 10;  // per specialized domain
  std::size_t jargon_swaps = 2; // swapped core-word pairs per domain
  double core_rate = 0.75;      // content drawn from the domain core
  double formal_rate = 0.2;     // formal function word in the source
  double noise_rate = 0.03;     // raw pairs that the filters must remove
  double min_domain_tv = 0.3;

  SplitSizes splits;                        // specialized DLPs
  SplitSizes pretrain_splits{400, 0, 40, 0};  // general-domain DLPs

  std::vector<std::string> LanguageCodes() const;
  std::vector<std::string> AllDomains() const;  // general first
  bool IsHeldOutLanguage(const std::string& lang) const;
  bool IsHeldOutDomain(const std::string& domain) const;
  DlpRole RoleOf(const DlpId& id) const;

  // Config error on any invariant violation.
  void Validate() const;
};

WorldSpec WorldSpecFromJson(const nlohmann::json& j);
nlohmann::json WorldSpecToJson(const WorldSpec& spec);
WorldSpec LoadWorldSpec(const std::filesystem::path& path);

// Latent lexicon plus per-language surface forms. Latent words are
// "f<i>" (plain function), "F<i>" (formal function), "s<i>" (shared
// content), "<domain>:<i>" (domain core) and the punctuation marks.
class World {
 public:
  explicit World(WorldSpec spec);

  const WorldSpec& spec() const { return spec_; }

  // A latent sentence (source side) for the domain.
  Tokens SampleLatent(const std::string& domain, Rng& rng) const;
  // Target-side latent after the domain's register and jargon shifts.
  Tokens ShiftLatent(const std::string& domain, const Tokens& latent) const;
  Tokens Render(const std::string& lang, const Tokens& latent) const;
  Tokens Parse(const std::string& lang, const Tokens& surface) const;  // inverse of Render

  // Gold translation of a surface sentence.
  Tokens Translate(const DlpId& id, const Tokens& source) const;
  SentencePair SamplePair(const DlpId& id, Rng& rng) const;

  // Unigram distribution of latent content words for a domain (exact,
  // from the sampling weights).
  std::map<std::string, double> ContentDistribution(const std::string& domain) const;

  const std::vector<std::string>& latent_words() const { return latent_; }

 private:
  WorldSpec spec_;
  std::vector<std::string> latent_;
  std::map<std::string, std::map<std::string, std::string>> surface_;  // lang -> latent -> surface
  std::map<std::string, std::map<std::string, std::string>> parse_;    // lang -> surface -> latent
  std::map<std::string, std::map<std::string, std::string>> jargon_;   // domain -> latent -> latent
  std::map<std::string, Reorder> reorder_;
};

double TotalVariation(const std::map<std::string, double>& p, const std::map<std::string, double>& q);

struct GenerateReport {
  std::size_t dlps = 0;
  std::size_t pairs = 0;
  std::size_t filtered = 0;
  std::size_t shortfall_dlps = 0;
};

// Writes <out>/world.json, <out>/registry.tsv, <out>/vocab.tsv and one
// directory per DLP (<domain>/<src>-<tgt>/<split>.tsv). Deterministic.
GenerateReport GenerateWorld(const WorldSpec& spec, const std::filesystem::path& out);

}  // namespace metaadapt
