#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lcbf/cbf.hpp"
#include "lcbf/config.hpp"
#include "lcbf/learn.hpp"
#include "lcbf/verify.hpp"

namespace lcbf {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitInfeasible = 3,
  kExitSolver = 4,
  kExitVerification = 5,
  kExitIo = 6,
};

/// Writes through a temporary sibling file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

PolytopicCbf load_cbf(const std::filesystem::path& path);

/// Writes cbf.json (when feasible), learn_log.jsonl and safe_set_boundary.csv.
int cmd_learn(const RunConfig& config, const std::filesystem::path& out_dir,
              LearnRun* run = nullptr);

struct SimulateRequest {
  Vec x0;
  Vec u_nominal;
  double horizon = 10.0;
  double dt = 0.01;
  bool qp_diagnostics = false;
};

/// Writes trajectory_filtered.csv and trajectory_unfiltered.csv.
int cmd_simulate(const RunConfig& config, const PolytopicCbf& cbf,
                 const SimulateRequest& request, const std::filesystem::path& out_dir);

/// Writes verify_report.json; kExitVerification when any check fails.
int cmd_verify(const RunConfig& config, const PolytopicCbf& cbf,
               const std::filesystem::path& out_dir, VerificationReport* report = nullptr);

struct SweepRow {
  double bound = 0.0;
  bool feasible = false;
  long volume_score = 0;
  double objective = 0.0;
};

/// One learning run per symmetric bound magnitude, each in its own
/// subdirectory; writes sweep_summary.csv.
int cmd_sweep_bounds(const RunConfig& config, const std::vector<double>& bounds,
                     const std::filesystem::path& out_dir,
                     std::vector<SweepRow>* rows = nullptr);

/// Full command-line front end; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace lcbf
