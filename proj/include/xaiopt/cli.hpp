#pragma once

#include <iosfwd>

namespace xaiopt {

/// Exit codes: 0 success, 2 configuration or validation error, 3 runtime abort.
enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_runtime = 3 };

/// Subcommands: optimize, explain, evaluate, validate, report. Data goes to
/// `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace xaiopt
