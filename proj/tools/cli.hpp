#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rescbf::cli {

// Exit codes shared by every verb.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;   // runtime fatal, property failed, or not robust
inline constexpr int kExitInvalid = 2;   // bad config, flags or input file
inline constexpr int kExitOversized = 3; // graph above the enumeration cap

/// Entry point behind the `rescbf` binary. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rescbf::cli
