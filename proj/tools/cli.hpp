#pragma once

#include <iosfwd>

#include "memvad/error.hpp"

namespace memvad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInternal = 70;

/// Exit code for a library error category (3 through 14).
int exit_code(ErrorCategory category) noexcept;

/// Runs the memvad command line. Results go to `out`; structured log lines
/// and machine-readable errors go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace memvad::cli
