#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace repur {

/// Process exit codes, one per error class.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,         // unknown flag, bad flag value
  kExitMissingFile = 3,   // an input path does not exist
  kExitBadConfig = 4,     // flags or checkpoints contradict each other
  kExitDataError = 5,     // malformed or empty input data
};

class MissingFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs one subcommand (prep, pretrain, train, generate, eval, demo). args
/// excludes the program name. Returns an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace repur
