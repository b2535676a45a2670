#include "metaadapt/corpus/vocab.h"

#include <algorithm>
#include <fstream>

#include "metaadapt/core/error.h"

namespace metaadapt {

std::string LanguageTag(const std::string& lang) { return "<2" + lang + ">"; }
std::string DomainTag(const std::string& domain) { return "<d:" + domain + ">"; }

int Vocab::Id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocab::Token(int id) const {
  Require(id >= 0 && static_cast<std::size_t>(id) < tokens_.size(), ErrorKind::kInput,
          "token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::Encode(const Tokens& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(Id(t));
  return ids;
}

Tokens Vocab::Decode(const std::vector<int>& ids) const {
  Tokens out;
  for (int id : ids) {
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    out.push_back(Token(id));
  }
  return out;
}

int Vocab::LanguageTagId(const std::string& lang) const {
  auto it = ids_.find(LanguageTag(lang));
  Require(it != ids_.end(), ErrorKind::kInput, "unknown language tag: " + lang);
  return it->second;
}

int Vocab::DomainTagId(const std::string& domain) const {
  auto it = ids_.find(DomainTag(domain));
  Require(it != ids_.end(), ErrorKind::kInput, "unknown domain tag: " + domain);
  return it->second;
}

Vocab Vocab::FromTokens(std::vector<std::string> tokens) {
  Require(tokens.size() >= 4 && tokens[kPadId] == kPadToken && tokens[kBosId] == kBosToken &&
              tokens[kEosId] == kEosToken && tokens[kUnkId] == kUnkToken,
          ErrorKind::kDataIntegrity, "vocabulary must start with <pad> <s> </s> <unk>");
  Vocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    Require(v.ids_.emplace(v.tokens_[i], static_cast<int>(i)).second, ErrorKind::kDataIntegrity,
            "duplicate vocabulary token: " + v.tokens_[i]);
  }
  return v;
}

void Vocab::Save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return FromTokens(std::move(tokens));
}

Vocab BuildVocabFromCounts(const std::unordered_map<std::string, std::size_t>& counts,
                           const std::vector<std::string>& languages, const std::vector<std::string>& domains) {
  std::vector<std::string> tokens = {kPadToken, kBosToken, kEosToken, kUnkToken};
  std::vector<std::string> tags;
  for (const auto& l : languages) tags.push_back(LanguageTag(l));
  for (const auto& d : domains) tags.push_back(DomainTag(d));
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
  tokens.insert(tokens.end(), tags.begin(), tags.end());

  std::vector<std::pair<std::string, std::size_t>> content;
  for (const auto& [t, c] : counts)
    if (std::find(tokens.begin(), tokens.end(), t) == tokens.end()) content.emplace_back(t, c);
  std::sort(content.begin(), content.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (auto& [t, c] : content) tokens.push_back(t);
  return Vocab::FromTokens(std::move(tokens));
}

Vocab BuildVocab(const std::vector<SentencePair>& corpus, const std::vector<std::string>& languages,
                 const std::vector<std::string>& domains) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& p : corpus) {
    for (const auto& t : p.source) ++counts[t];
    for (const auto& t : p.target) ++counts[t];
  }
  return BuildVocabFromCounts(counts, languages, domains);
}

std::vector<int> Tokenize(const std::string& text, const Vocab& vocab) {
  return vocab.Encode(SplitTokens(text));
}

std::string Detokenize(const std::vector<int>& ids, const Vocab& vocab) {
  return JoinTokens(vocab.Decode(ids));
}

std::vector<int> ControlPrefix(const Vocab& vocab, const std::string& tgt_lang, const std::string* domain) {
  std::vector<int> prefix;
  if (domain) prefix.push_back(vocab.DomainTagId(*domain));
  prefix.push_back(vocab.LanguageTagId(tgt_lang));
  return prefix;
}

TokenPair EncodePair(const SentencePair& pair, const Vocab& vocab) {
  return {vocab.Encode(pair.source), vocab.Encode(pair.target)};
}

std::vector<TokenPair> EncodePairs(const std::vector<SentencePair>& pairs, const Vocab& vocab) {
  std::vector<TokenPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(EncodePair(p, vocab));
  return out;
}

}  // namespace metaadapt
