#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace arst::cli {

// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kTrainingNumericError = 3,
  kFormatError = 4,
  kEvalMismatch = 5,
};

// Runs one `arst` command line (args excludes the program name). Normal output
// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace arst::cli
