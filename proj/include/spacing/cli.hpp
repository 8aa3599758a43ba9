#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace spacing::cli {

inline constexpr std::string_view kVersion = "0.1.0";

/// Exit statuses of `run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spacing::cli
