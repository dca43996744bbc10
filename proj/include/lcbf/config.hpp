#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "lcbf/dynamics.hpp"
#include "lcbf/geometry.hpp"
#include "lcbf/learn.hpp"
#include "lcbf/verify.hpp"

namespace lcbf {

/// Stand-in magnitude for the "unbounded" input-bound token.
inline constexpr double kUnboundedInput = 1e6;

struct SimulateSettings {
  Vec x0;
  Vec u_nominal;
  double horizon = 10.0;
  double dt = 0.01;
};

struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  std::string system = "moore_greitzer";
  Vec u_min;
  Vec u_max;
  RegionSpec region;
  double grid_resolution = 0.1;
  int samples = 200;
  std::uint64_t seed = 0;
  int halfspaces = 6;
  double alpha_gain = 1.0;
  Vec start_state;
  SolverOptions solver;
  VerifyOptions verify;
  SimulateSettings simulate;
  std::string output_dir = "out";

  /// Throws ConfigError when a field breaks a module precondition.
  void validate() const;
};

/// Strict parse: unknown keys and wrong types raise ConfigError.
RunConfig parse_config(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// Parses a symmetric bound magnitude ("9", "unbounded").
double parse_bound_token(const std::string& token);
std::string bound_label(double magnitude);

ControlAffineSystem make_system(const RunConfig& config);
LearnProblem make_problem(const RunConfig& config);

}  // namespace lcbf
