#pragma once

#include <string>
#include <vector>

namespace joinsample {

// Command-line entry point; returns the process exit code
// (0 ok, 2 spec error, 3 data error, 4 statistical stall, 5 size guard).
int run_cli(const std::vector<std::string>& args);

}  // namespace joinsample
