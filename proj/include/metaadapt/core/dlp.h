#pragma once

#include <compare>
#include <string>

namespace metaadapt {

// One translation task: a textual domain plus an ordered language pair.
struct DlpId {
  std::string domain;
  std::string src_lang;
  std::string tgt_lang;

  // Input error when a field is empty or the languages coincide.
  void Validate() const;

  std::string LanguagePair() const { return src_lang + "-" + tgt_lang; }
  std::string ToString() const { return domain + "-" + src_lang + "-" + tgt_lang; }

  auto operator<=>(const DlpId&) const = default;
  bool operator==(const DlpId&) const = default;
};

// Inverse of DlpId::ToString. Domain names may contain '-', so the last two
// dash-separated fields are the languages.
DlpId ParseDlpId(const std::string& text);

}  // namespace metaadapt
