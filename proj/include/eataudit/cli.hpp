#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eataudit {

// Exit codes of the eat_audit tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitDegenerate = 4,
};

// Runs the command line (args excludes the program name). Data goes to `out`
// unless --out is given; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace eataudit
