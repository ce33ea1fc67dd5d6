#pragma once

#include <string>
#include <vector>

namespace echo {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitNumerical = 4 };

/// Runs `echo_cli <args...>` in-process (args excludes the program name).
int cli_main(const std::vector<std::string>& args);

/// Trajectory repeating the last of the first `context` frames (persistence baseline).
struct Trajectory;
Trajectory persistence_forecast(const Trajectory& t, std::int64_t context);

}  // namespace echo
