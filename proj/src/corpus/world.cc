#include "metaadapt/corpus/world.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "metaadapt/core/error.h"
#include "metaadapt/corpus/filter.h"
#include "metaadapt/corpus/vocab.h"

namespace metaadapt {
namespace {

constexpr std::uint64_t kSurfaceStream = 11;
constexpr std::uint64_t kJargonStream = 12;
constexpr std::uint64_t kPairStream = 13;

const std::vector<std::string> kSentencePunct = {".", "?", "!"};
const std::vector<std::string> kNoisePunct = {",", ";", ":", "--", "..."};

bool Contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

std::string Function(std::size_t i, bool formal) { return (formal ? "F" : "f") + std::to_string(i); }
std::string Shared(std::size_t i) { return "s" + std::to_string(i); }
std::string Core(const std::string& domain, std::size_t i) { return domain + ":" + std::to_string(i); }

// Pseudo-word built from consonant-vowel syllables.
std::string PseudoWord(Rng& rng) {
  static const char kConsonants[] = "bdfgklmnprstvz";
  static const char kVowels[] = "aeiou";
  const std::size_t syllables = 2 + rng.UniformIndex(2);
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kConsonants[rng.UniformIndex(sizeof(kConsonants) - 1)];
    w += kVowels[rng.UniformIndex(sizeof(kVowels) - 1)];
  }
  return w;
}

}  // namespace

const char* ReorderName(Reorder r) {
  switch (r) {
    case Reorder::kIdentity: return "identity";
    case Reorder::kSwapPairs: return "swap-pairs";
    case Reorder::kReverseTriples: return "reverse-triples";
  }
  return "?";
}

Reorder ParseReorder(const std::string& name) {
  if (name == "identity") return Reorder::kIdentity;
  if (name == "swap-pairs") return Reorder::kSwapPairs;
  if (name == "reverse-triples") return Reorder::kReverseTriples;
  Fail(ErrorKind::kConfig, "unknown reorder rule: " + name);
}

Tokens ApplyReorder(Reorder r, const Tokens& tokens) {
  Tokens out = tokens;
  std::size_t body = out.size();
  if (body > 0 && IsPunctuationToken(out.back())) --body;
  switch (r) {
    case Reorder::kIdentity: break;
    case Reorder::kSwapPairs:
      for (std::size_t i = 0; i + 1 < body; i += 2) std::swap(out[i], out[i + 1]);
      break;
    case Reorder::kReverseTriples:
      for (std::size_t i = 0; i < body; i += 3) {
        const std::size_t end = std::min(body, i + 3);
        std::reverse(out.begin() + static_cast<std::ptrdiff_t>(i), out.begin() + static_cast<std::ptrdiff_t>(end));
      }
      break;
  }
  return out;
}

std::vector<std::string> WorldSpec::LanguageCodes() const {
  std::vector<std::string> codes;
  for (const auto& l : languages) codes.push_back(l.code);
  return codes;
}

std::vector<std::string> WorldSpec::AllDomains() const {
  std::vector<std::string> all = {general_domain};
  all.insert(all.end(), domains.begin(), domains.end());
  return all;
}

bool WorldSpec::IsHeldOutLanguage(const std::string& lang) const { return Contains(held_out_languages, lang); }
bool WorldSpec::IsHeldOutDomain(const std::string& domain) const { return Contains(held_out_domains, domain); }

DlpRole WorldSpec::RoleOf(const DlpId& id) const {
  if (id.domain == general_domain) return DlpRole::kPretrain;
  if (IsHeldOutDomain(id.domain) || IsHeldOutLanguage(id.src_lang) || IsHeldOutLanguage(id.tgt_lang))
    return DlpRole::kHeldOut;
  return DlpRole::kMetaTrain;
}

void WorldSpec::Validate() const {
  auto require = [](bool c, const std::string& msg) { Require(c, ErrorKind::kConfig, "world spec: " + msg); };
  require(languages.size() >= 2, "need at least 2 languages");
  require(domains.size() >= 2, "need at least 2 specialized domains");
  std::set<std::string> codes;
  for (const auto& l : languages) {
    require(!l.code.empty() && l.code.find_first_of("-\t .:<>") == std::string::npos,
            "bad language code '" + l.code + "'");
    require(codes.insert(l.code).second, "duplicate language " + l.code);
  }
  std::set<std::string> names = {general_domain};
  require(!general_domain.empty(), "general_domain must be named");
  for (const auto& d : domains) {
    require(!d.empty() && d.find_first_of("\t .:<>") == std::string::npos, "bad domain name '" + d + "'");
    require(names.insert(d).second, "duplicate domain " + d);
  }
  for (const auto& l : held_out_languages) require(codes.count(l) > 0, "held-out language " + l + " not declared");
  for (const auto& d : held_out_domains)
    require(Contains(domains, d), "held-out domain " + d + " not a specialized domain");
  require(held_out_languages.size() < languages.size() - 1, "need at least 2 meta-training languages");
  require(held_out_domains.size() < domains.size(), "need at least 1 meta-training domain");
  require(min_content >= 1 && min_content <= max_content, "need 1 <= min_content <= max_content");
  require(2 * max_content + 1 <= kMaxSentenceTokens, "sentences would exceed the token cap");
  require(function_words >= 1 && shared_words >= 1 && core_words >= 1, "lexicon sizes must be >= 1");
  require(2 * jargon_swaps <= core_words, "jargon swaps need 2 core words each");
  for (double r : {function_rate, core_rate, formal_rate, noise_rate})
    require(r >= 0.0 && r <= 1.0, "rates must lie in [0, 1]");
  require(noise_rate < 0.5, "noise_rate must be < 0.5");
  require(splits.train + splits.adapt + splits.valid + splits.test > 0, "splits are all empty");
  require(pretrain_splits.train > 0, "pretrain train split is empty");
}

WorldSpec WorldSpecFromJson(const nlohmann::json& j) {
  WorldSpec s;
  try {
    s.seed = j.value("seed", s.seed);
    const Reorder cycle[] = {Reorder::kIdentity, Reorder::kSwapPairs, Reorder::kReverseTriples};
    std::size_t index = 0;
    for (const auto& l : j.at("languages")) {
      LanguageSpec ls;
      if (l.is_string()) {
        ls.code = l.get<std::string>();
        ls.reorder = cycle[index % 3];
      } else {
        ls.code = l.at("code").get<std::string>();
        ls.reorder = l.contains("reorder") ? ParseReorder(l.at("reorder").get<std::string>()) : cycle[index % 3];
      }
      s.languages.push_back(ls);
      ++index;
    }
    s.held_out_languages = j.value("held_out_languages", s.held_out_languages);
    s.domains = j.at("domains").get<std::vector<std::string>>();
    s.held_out_domains = j.value("held_out_domains", s.held_out_domains);
    s.general_domain = j.value("general_domain", s.general_domain);
    s.min_content = j.value("min_content", s.min_content);
    s.max_content = j.value("max_content", s.max_content);
    s.function_rate = j.value("function_rate", s.function_rate);
    s.function_words = j.value("function_words", s.function_words);
    s.shared_words = j.value("shared_words", s.shared_words);
    s.core_words = j.value("core_words", s.core_words);
    s.jargon_swaps = j.value("jargon_swaps", s.jargon_swaps);
    s.core_rate = j.value("core_rate", s.core_rate);
    s.formal_rate = j.value("formal_rate", s.formal_rate);
    s.noise_rate = j.value("noise_rate", s.noise_rate);
    s.min_domain_tv = j.value("min_domain_tv", s.min_domain_tv);
    auto sizes = [](const nlohmann::json& o, SplitSizes d) {
      return SplitSizes{o.value("train", d.train), o.value("adapt", d.adapt), o.value("valid", d.valid),
                        o.value("test", d.test)};
    };
    if (j.contains("splits")) s.splits = sizes(j.at("splits"), s.splits);
    if (j.contains("pretrain_splits")) s.pretrain_splits = sizes(j.at("pretrain_splits"), s.pretrain_splits);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("world spec: ") + e.what());
  }
  s.Validate();
  return s;
}

nlohmann::json WorldSpecToJson(const WorldSpec& s) {
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& l : s.languages) langs.push_back({{"code", l.code}, {"reorder", ReorderName(l.reorder)}});
  auto sizes = [](const SplitSizes& z) {
    return nlohmann::json{{"train", z.train}, {"adapt", z.adapt}, {"valid", z.valid}, {"test", z.test}};
  };
  return {{"seed", s.seed},
          {"languages", langs},
          {"held_out_languages", s.held_out_languages},
          {"domains", s.domains},
          {"held_out_domains", s.held_out_domains},
          {"general_domain", s.general_domain},
          {"min_content", s.min_content},
          {"max_content", s.max_content},
          {"function_rate", s.function_rate},
          {"function_words", s.function_words},
          {"shared_words", s.shared_words},
          {"core_words", s.core_words},
          {"jargon_swaps", s.jargon_swaps},
          {"core_rate", s.core_rate},
          {"formal_rate", s.formal_rate},
          {"noise_rate", s.noise_rate},
          {"min_domain_tv", s.min_domain_tv},
          {"splits", sizes(s.splits)},
          {"pretrain_splits", sizes(s.pretrain_splits)}};
}

WorldSpec LoadWorldSpec(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot read world spec " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  if (j.contains("world")) j = j.at("world");
  return WorldSpecFromJson(j);
}

World::World(WorldSpec spec) : spec_(std::move(spec)) {
  spec_.Validate();
  for (std::size_t i = 0; i < spec_.function_words; ++i) latent_.push_back(Function(i, false));
  for (std::size_t i = 0; i < spec_.function_words; ++i) latent_.push_back(Function(i, true));
  for (std::size_t i = 0; i < spec_.shared_words; ++i) latent_.push_back(Shared(i));
  for (const auto& d : spec_.domains)
    for (std::size_t i = 0; i < spec_.core_words; ++i) latent_.push_back(Core(d, i));

  std::set<std::string> used(kSentencePunct.begin(), kSentencePunct.end());
  for (const auto& lang : spec_.languages) {
    Rng rng(DeriveSeed(spec_.seed, {kSurfaceStream, HashString(lang.code)}));
    auto& fwd = surface_[lang.code];
    auto& inv = parse_[lang.code];
    for (const auto& w : latent_) {
      std::string s;
      do s = PseudoWord(rng);
      while (used.count(s) > 0);
      used.insert(s);
      fwd[w] = s;
      inv[s] = w;
    }
    for (const auto& p : kSentencePunct) {
      fwd[p] = p;
      inv[p] = p;
    }
    reorder_[lang.code] = lang.reorder;
  }

  for (const auto& d : spec_.domains) {
    Rng rng(DeriveSeed(spec_.seed, {kJargonStream, HashString(d)}));
    std::vector<std::size_t> idx(spec_.core_words);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.Shuffle(std::span<std::size_t>(idx));
    auto& map = jargon_[d];
    for (std::size_t k = 0; k < spec_.jargon_swaps; ++k) {
      const std::string a = Core(d, idx[2 * k]);
      const std::string b = Core(d, idx[2 * k + 1]);
      map[a] = b;
      map[b] = a;
    }
  }

  const auto& ds = spec_.domains;
  for (std::size_t a = 0; a < ds.size(); ++a) {
    for (std::size_t b = a + 1; b < ds.size(); ++b) {
      const double tv = TotalVariation(ContentDistribution(ds[a]), ContentDistribution(ds[b]));
      Require(tv >= spec_.min_domain_tv, ErrorKind::kConfig,
              "domains " + ds[a] + " and " + ds[b] + " are too similar (TV " + std::to_string(tv) + ")");
    }
  }
}

Tokens World::SampleLatent(const std::string& domain, Rng& rng) const {
  const bool general = domain == spec_.general_domain;
  Require(general || Contains(spec_.domains, domain), ErrorKind::kInput, "unknown domain " + domain);
  const std::size_t n = spec_.min_content + rng.UniformIndex(spec_.max_content - spec_.min_content + 1);
  const std::size_t pool = spec_.shared_words + spec_.domains.size() * spec_.core_words;
  Tokens out;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.Uniform() < spec_.function_rate) {
      const std::size_t k = rng.UniformIndex(spec_.function_words);
      out.push_back(Function(k, rng.Uniform() < spec_.formal_rate));
    }
    if (general) {
      const std::size_t k = rng.UniformIndex(pool);
      out.push_back(k < spec_.shared_words
                        ? Shared(k)
                        : Core(spec_.domains[(k - spec_.shared_words) / spec_.core_words],
                               (k - spec_.shared_words) % spec_.core_words));
    } else if (rng.Uniform() < spec_.core_rate) {
      out.push_back(Core(domain, rng.UniformIndex(spec_.core_words)));
    } else {
      out.push_back(Shared(rng.UniformIndex(spec_.shared_words)));
    }
  }
  out.push_back(kSentencePunct[rng.UniformIndex(kSentencePunct.size())]);
  return out;
}

Tokens World::ShiftLatent(const std::string& domain, const Tokens& latent) const {
  if (domain == spec_.general_domain) return latent;
  auto jit = jargon_.find(domain);
  Require(jit != jargon_.end(), ErrorKind::kInput, "unknown domain " + domain);
  Tokens out = latent;
  for (auto& w : out) {
    if (w.size() > 1 && w[0] == 'f' && std::isdigit(static_cast<unsigned char>(w[1]))) {
      w[0] = 'F';
    } else if (auto m = jit->second.find(w); m != jit->second.end()) {
      w = m->second;
    }
  }
  return out;
}

Tokens World::Render(const std::string& lang, const Tokens& latent) const {
  auto it = surface_.find(lang);
  Require(it != surface_.end(), ErrorKind::kInput, "unknown language " + lang);
  Tokens out;
  out.reserve(latent.size());
  for (const auto& w : latent) {
    auto s = it->second.find(w);
    Require(s != it->second.end(), ErrorKind::kInput, "no surface form for latent word " + w);
    out.push_back(s->second);
  }
  return ApplyReorder(reorder_.at(lang), out);
}

Tokens World::Parse(const std::string& lang, const Tokens& surface) const {
  auto it = parse_.find(lang);
  Require(it != parse_.end(), ErrorKind::kInput, "unknown language " + lang);
  Tokens out;
  out.reserve(surface.size());
  for (const auto& w : ApplyReorder(reorder_.at(lang), surface)) {
    auto s = it->second.find(w);
    Require(s != it->second.end(), ErrorKind::kInput, "word '" + w + "' is not in language " + lang);
    out.push_back(s->second);
  }
  return out;
}

Tokens World::Translate(const DlpId& id, const Tokens& source) const {
  return Render(id.tgt_lang, ShiftLatent(id.domain, Parse(id.src_lang, source)));
}

SentencePair World::SamplePair(const DlpId& id, Rng& rng) const {
  const Tokens latent = SampleLatent(id.domain, rng);
  SentencePair pair{Render(id.src_lang, latent), Render(id.tgt_lang, ShiftLatent(id.domain, latent)), id};
  if (rng.Uniform() < spec_.noise_rate) {
    Tokens& side = rng.Uniform() < 0.5 ? pair.source : pair.target;
    if (rng.Uniform() < 0.5) {
      const std::size_t extra = side.size() + 1;
      for (std::size_t i = 0; i < extra; ++i) side.push_back(kNoisePunct[rng.UniformIndex(kNoisePunct.size())]);
    } else {
      const Tokens base = side;
      while (side.size() <= kMaxSentenceTokens) side.insert(side.end(), base.begin(), base.end());
    }
  }
  return pair;
}

std::map<std::string, double> World::ContentDistribution(const std::string& domain) const {
  std::map<std::string, double> p;
  if (domain == spec_.general_domain) {
    const double pool = static_cast<double>(spec_.shared_words + spec_.domains.size() * spec_.core_words);
    for (std::size_t i = 0; i < spec_.shared_words; ++i) p[Shared(i)] = 1.0 / pool;
    for (const auto& d : spec_.domains)
      for (std::size_t i = 0; i < spec_.core_words; ++i) p[Core(d, i)] = 1.0 / pool;
    return p;
  }
  Require(Contains(spec_.domains, domain), ErrorKind::kInput, "unknown domain " + domain);
  for (std::size_t i = 0; i < spec_.shared_words; ++i)
    p[Shared(i)] = (1.0 - spec_.core_rate) / static_cast<double>(spec_.shared_words);
  for (std::size_t i = 0; i < spec_.core_words; ++i)
    p[Core(domain, i)] = spec_.core_rate / static_cast<double>(spec_.core_words);
  return p;
}

double TotalVariation(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
  double tv = 0.0;
  for (const auto& [k, v] : p) {
    auto it = q.find(k);
    tv += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : q)
    if (p.find(k) == p.end()) tv += std::abs(v);
  return 0.5 * tv;
}

GenerateReport GenerateWorld(const WorldSpec& spec, const std::filesystem::path& out) {
  const World world(spec);
  std::filesystem::create_directories(out);
  {
    std::ofstream js(out / "world.json");
    Require(static_cast<bool>(js), ErrorKind::kIo, "cannot write " + (out / "world.json").string());
    js << WorldSpecToJson(spec).dump(2) << '\n';
  }

  GenerateReport report;
  Registry registry;
  registry.root = out;
  std::unordered_map<std::string, std::size_t> counts;
  const auto langs = spec.LanguageCodes();
  for (const auto& domain : spec.AllDomains()) {
    for (const auto& src : langs) {
      for (const auto& tgt : langs) {
        if (src == tgt) continue;
        const DlpId id{domain, src, tgt};
        const SplitSizes want = domain == spec.general_domain ? spec.pretrain_splits : spec.splits;
        const std::size_t need = want.train + want.adapt + want.valid + want.test;
        Rng rng(DeriveSeed(spec.seed, {kPairStream, HashString(id.ToString())}));

        std::vector<SentencePair> raw;
        std::vector<SentencePair> kept;
        FilterStats stats;
        const std::size_t max_raw = 20 * need + 100;
        while (kept.size() < need && raw.size() < max_raw) {
          const std::size_t chunk = (need - kept.size()) + (need - kept.size()) / 8 + 8;
          for (std::size_t i = 0; i < chunk; ++i) raw.push_back(world.SamplePair(id, rng));
          kept = FilterCorpus(raw, &stats);
        }
        if (kept.size() > need) kept.resize(need);
        report.filtered += stats.input - stats.kept;
        if (kept.size() < need) ++report.shortfall_dlps;

        RegistryEntry entry;
        entry.id = id;
        entry.role = spec.RoleOf(id);
        entry.path = domain + "/" + id.LanguagePair();
        std::filesystem::create_directories(out / entry.path);
        std::size_t offset = 0;
        for (Split split : kAllSplits) {
          const std::size_t n = std::min(want.Get(split), kept.size() - offset);
          std::vector<SentencePair> part(kept.begin() + static_cast<std::ptrdiff_t>(offset),
                                         kept.begin() + static_cast<std::ptrdiff_t>(offset + n));
          offset += n;
          entry.sizes.Get(split) = n;
          WritePairs(out / entry.path / (std::string(SplitName(split)) + ".tsv"), part);
          for (const auto& p : part) {
            for (const auto& t : p.source) ++counts[t];
            for (const auto& t : p.target) ++counts[t];
          }
        }
        report.pairs += kept.size();
        ++report.dlps;
        registry.entries.push_back(std::move(entry));
      }
    }
  }
  WriteRegistry(registry);
  BuildVocabFromCounts(counts, langs, spec.AllDomains()).Save(out / "vocab.tsv");
  return report;
}

}  // namespace metaadapt
