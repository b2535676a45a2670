#include "metaadapt/core/error.h"

namespace metaadapt {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kState: return "state";
    case ErrorKind::kInput: return "input";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kDataIntegrity: return "data-integrity";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(ErrorKindName(kind)) + " error: " + message),
      kind_(kind) {}

void Fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace metaadapt
