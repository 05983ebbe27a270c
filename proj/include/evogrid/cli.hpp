#pragma once

#include <string>
#include <vector>

namespace evogrid::cli {

/// Entry point behind the binary: parses subcommands and flags, runs the
/// requested command. Exit codes: 0 ok, 2 configuration error, 3 numeric
/// failure. All commands are non-interactive.
int run(const std::vector<std::string>& args);

} // namespace evogrid::cli
