#pragma once

#include <string>
#include <vector>

namespace headsplat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Parses and runs one subcommand; returns the process exit code.
int run(const std::vector<std::string>& args);

int run(int argc, char** argv);

} // namespace headsplat::cli
