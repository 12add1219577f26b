#pragma once

#include <string>
#include <vector>

namespace beliefdyn {

/// Process exit codes of the command-line front end.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;        // runtime failure or failed validation check
inline constexpr int kConfigError = 2;    // unreadable or invalid scenario / arguments
inline constexpr int kNotConverged = 3;   // results written but flagged
inline constexpr int kUnsupported = 4;    // transient solve of a belief-dependent scenario
inline constexpr int kStepTooLarge = 5;
}  // namespace exit_code

std::string tool_version();

/// Entry point; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace beliefdyn
