#pragma once

#include <string>
#include <vector>

namespace adamct::cli {

// Exit codes: 0 success, 1 verification or metric failure, 2 configuration
// error, 3 data error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

// Runs one CLI command (train | evaluate | gradcheck | ablate | stats) and
// returns its exit code. args excludes the program name.
int run(const std::vector<std::string>& args);

int run(int argc, char** argv);

}  // namespace adamct::cli
