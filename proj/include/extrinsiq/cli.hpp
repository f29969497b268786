#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "extrinsiq/error.hpp"
#include "extrinsiq/sim.hpp"

namespace extrinsiq {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitInsufficient = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitUsage = 64;

int exit_code_for(ErrorCode code);

/// Everything a command needs; filled from flags.
struct ExperimentConfig {
  std::string rig = "default";  // "default" or a rig/dataset JSON path
  int poses = 30;
  std::map<std::string, NoiseModel> noise;
  std::vector<std::string> methods;
  int trials = 100;
  double sigma_rot_deg = 90.0;
  double sigma_t = 0.5;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = ".";
};

/// EXTRINSIQ_SEED when set (and parseable), otherwise `fallback`.
std::uint64_t seed_from_env(std::uint64_t fallback);

/// Whole command line, argv[0] included. Never throws; returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace extrinsiq
