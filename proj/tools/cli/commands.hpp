#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "cli/config.hpp"

namespace tsmfg::cli {

inline constexpr std::array<std::string_view, 6> kCommands{"solve-nplayer", "solve-mfg",          "simulate",
                                                           "converge",      "check-monotonicity", "verify-value"};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitSolverFailure = 2;

struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> N;
};

// Applies command-line overrides and re-validates.
void apply_overrides(RunConfig& cfg, const Overrides& overrides);

// Runs one command and writes its artifacts under cfg.out. Returns an exit status.
int dispatch(const RunConfig& cfg, std::string_view command, std::ostream& err);

// Full command-line entry point.
int run(int argc, const char* const* argv, std::ostream& err);

}  // namespace tsmfg::cli
