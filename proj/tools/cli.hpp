#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace krylyap::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;       // bad input, dimension mismatch, breakdown
inline constexpr int kNotConverged = 2;  // max_m reached above tolerance
inline constexpr int kUsage = 64;

// Runs the command line `args` (args[0] is the program name). Diagnostics go
// to `err`, progress lines to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace krylyap::cli
