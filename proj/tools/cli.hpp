#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace otcd::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kNotConverged = 3,
};

// Runs `otcd <subcommand> ...`. args excludes the program name. Normal output
// goes to `out`, messages to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace otcd::cli
