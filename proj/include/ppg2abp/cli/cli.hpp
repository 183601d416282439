#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ppg2abp::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

inline constexpr std::uint64_t kDefaultSeed = 2020;

/// Runs one subcommand. `args` excludes the program name. Results go to files
/// or `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace ppg2abp::cli
