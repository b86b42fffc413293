#pragma once

#include <string>
#include <vector>

namespace thermoid::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { ok = 0, usage_error = 1, data_error = 2, numerical_failure = 3 };

/// Environment variable holding the log level (trace, debug, info, warn,
/// error, critical, off). Defaults to warn; logs go to stderr.
inline constexpr const char* log_level_env = "THERMOID_LOG_LEVEL";

/// Parses and runs one subcommand: nmi, fit, simulate, compare, synth or
/// report. Diagnostics are one line on stderr.
int run(int argc, const char* const* argv);
/// Same, with args excluding the program name.
int run(const std::vector<std::string>& args);

} // namespace thermoid::cli
