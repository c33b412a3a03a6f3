#pragma once

// Command-line front end. The binary is a thin wrapper around run() so the
// full argument-to-exit-code path is testable in process.

#include <string>
#include <vector>

namespace pinit::cli {

// Executes one invocation given argv-style arguments (program name
// excluded). Returns the process exit code: 0 on success (including
// --help), 1 on any error. Error messages go to stderr and name the flag
// or file at fault.
int run(const std::vector<std::string>& args);

}  // namespace pinit::cli
