#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace corral {

/// Exit codes of the command-line tool.
inline constexpr int kExitClean = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAnomalies = 2;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitSchema = 65;

/// Runs `corral <args...>` (args excludes the program name).
auto run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) -> int;

}  // namespace corral
