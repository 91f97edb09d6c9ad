#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rgae {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitUsage = 2;

/// Full command-line entry point. `args` excludes the program name.
/// Logs and diagnostics go to `err`, help text to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The text printed by `--help`.
std::string cli_help_text();

}  // namespace rgae
