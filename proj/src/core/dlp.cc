#include "metaadapt/core/dlp.h"

#include "metaadapt/core/error.h"

namespace metaadapt {

void DlpId::Validate() const {
  Require(!domain.empty() && !src_lang.empty() && !tgt_lang.empty(), ErrorKind::kInput,
          "DLP fields must be non-empty: '" + ToString() + "'");
  Require(src_lang != tgt_lang, ErrorKind::kInput,
          "DLP source and target language are identical: " + ToString());
}

DlpId ParseDlpId(const std::string& text) {
  const auto last = text.rfind('-');
  Require(last != std::string::npos && last > 0, ErrorKind::kInput, "malformed DLP id: " + text);
  const auto middle = text.rfind('-', last - 1);
  Require(middle != std::string::npos, ErrorKind::kInput, "malformed DLP id: " + text);
  DlpId id{text.substr(0, middle), text.substr(middle + 1, last - middle - 1), text.substr(last + 1)};
  id.Validate();
  return id;
}

}  // namespace metaadapt
