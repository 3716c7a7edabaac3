#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace berd::cli {

enum ExitCode : int {
  kSuccess = 0,
  kCheckFailure = 1,
  kUsageError = 2,
  kNumericError = 3,
};

// Runs one command line (args exclude the program name). Normal output goes
// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Thread count from BERD_THREADS, or 1.
std::size_t default_threads();

}  // namespace berd::cli
