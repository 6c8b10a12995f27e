#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace icar::cli {

// Parses `args` (without the program name) and runs one subcommand.
// Returns 0 on success, 1 on a runtime failure, 2 on a usage or config error.
// Diagnostics go to `err`; progress lines go to `out` unless --quiet.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace icar::cli
