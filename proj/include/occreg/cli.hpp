#pragma once

#include <iosfwd>

namespace occreg {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitFrameFailures = 2;

inline constexpr const char* kToolVersion = "0.1.0";

/// Entry point of the `occreg` executable. Subcommands: run, synth,
/// eval-traj, eval-map, info.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace occreg
