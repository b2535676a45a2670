#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "metaadapt/corpus/sentence.h"
#include "metaadapt/model/batch.h"

namespace metaadapt {

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kBosToken = "<s>";
inline constexpr const char* kEosToken = "</s>";
inline constexpr const char* kUnkToken = "<unk>";

std::string LanguageTag(const std::string& lang);  // "<2xx>"
std::string DomainTag(const std::string& domain);   // "<d:name>"

// Dense token <-> id map. Ids 0..3 are pad/bos/eos/unk, then one tag per
// language and per domain (sorted), then content tokens ordered by
// descending frequency with lexicographic tie-breaking.
class Vocab {
 public:
  Vocab() = default;

  std::size_t size() const { return tokens_.size(); }
  int Id(const std::string& token) const;  // kUnkId when absent
  bool Contains(const std::string& token) const { return ids_.count(token) > 0; }
  const std::string& Token(int id) const;

  std::vector<int> Encode(const Tokens& tokens) const;
  // Skips pad/bos/eos; keeps unk as its token text.
  Tokens Decode(const std::vector<int>& ids) const;

  // Input error when the language has no tag in this vocabulary.
  int LanguageTagId(const std::string& lang) const;
  int DomainTagId(const std::string& domain) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

  void Save(const std::filesystem::path& path) const;
  static Vocab Load(const std::filesystem::path& path);
  static Vocab FromTokens(std::vector<std::string> tokens);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

Vocab BuildVocab(const std::vector<SentencePair>& corpus, const std::vector<std::string>& languages,
                 const std::vector<std::string>& domains);
Vocab BuildVocabFromCounts(const std::unordered_map<std::string, std::size_t>& counts,
                           const std::vector<std::string>& languages, const std::vector<std::string>& domains);

std::vector<int> Tokenize(const std::string& text, const Vocab& vocab);
std::string Detokenize(const std::vector<int>& ids, const Vocab& vocab);

// Control tokens prepended to every source row: the target-language tag,
// optionally preceded by a domain tag.
std::vector<int> ControlPrefix(const Vocab& vocab, const std::string& tgt_lang,
                               const std::string* domain = nullptr);

TokenPair EncodePair(const SentencePair& pair, const Vocab& vocab);
std::vector<TokenPair> EncodePairs(const std::vector<SentencePair>& pairs, const Vocab& vocab);

}  // namespace metaadapt
