#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metaadapt {

// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kDimension,
  kNumeric,
  kState,
  kInput,
  kConfig,
  kDataIntegrity,
  kIo,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& message);

inline void Require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) Fail(kind, message);
}

}  // namespace metaadapt
