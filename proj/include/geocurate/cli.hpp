#pragma once

#include <string>
#include <vector>

namespace geocurate::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

/// Parses and runs one subcommand. Progress goes to stderr, data to files only.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace geocurate::cli
