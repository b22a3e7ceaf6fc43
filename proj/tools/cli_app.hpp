#pragma once

#include <string>
#include <vector>

namespace e2 {

// Full CLI entry point (argv without the program name). Returns the process
// exit code: 0 success, 1 runtime failure, 2 configuration error.
int run_cli(const std::vector<std::string>& args);

}  // namespace e2
