#pragma once

#include <iosfwd>

namespace cplus {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitTimeout = 2;
inline constexpr int kExitUsage = 3;

/// Subcommands synth, check, simulate, gen, export-dot.
int cli_main(int argc, char const* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cplus
