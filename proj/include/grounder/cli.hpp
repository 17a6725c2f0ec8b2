#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace grounder {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitProvider = 3 };

// Entry point of the `grounder` binary. args excludes the program name.
// Machine-readable results go to `out` as JSON lines; diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace grounder
