#pragma once

#include <string>
#include <vector>

#include "metaadapt/core/error.h"

namespace metaadapt {

// Process exit code of a failure category: config 2, data integrity 3,
// numeric 4, I/O 5, input 6, internal state or dimension errors 7.
int ExitCode(ErrorKind kind);

// The madapt command line. Returns the process exit code.
int RunCli(const std::vector<std::string>& args);

}  // namespace metaadapt
