#pragma once

#include <string>
#include <vector>

namespace nextloc {

// Full command-line entry point; returns the process exit code.
// 0: success, 2: missing input file, 1: any other failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace nextloc
