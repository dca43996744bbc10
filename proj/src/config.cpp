#include "lcbf/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lcbf/errors.hpp"

namespace lcbf {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

const json& require(const json& j, const std::string& where, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key);
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<int>();
}

Vec as_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    v[static_cast<int>(k)] = as_number(j[k], where + "[" + std::to_string(k) + "]");
  }
  return v;
}

double bound_entry(const json& j, const std::string& where, double sign) {
  if (j.is_string()) {
    if (j.get<std::string>() != "unbounded") {
      throw ConfigError(where + ": only the string 'unbounded' is accepted");
    }
    return sign * kUnboundedInput;
  }
  return as_number(j, where);
}

Vec bound_vector(const json& j, const std::string& where, double sign) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    v[static_cast<int>(k)] = bound_entry(j[k], where, sign);
  }
  return v;
}

json bound_json(const Vec& v) {
  json arr = json::array();
  for (int k = 0; k < v.size(); ++k) {
    if (std::abs(v[k]) >= kUnboundedInput) {
      arr.push_back("unbounded");
    } else {
      arr.push_back(v[k]);
    }
  }
  return arr;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Box parse_box(const json& j, const std::string& where) {
  reject_unknown(j, where, {"lower", "upper"});
  try {
    return Box(as_vector(require(j, where, "lower"), where + ".lower"),
               as_vector(require(j, where, "upper"), where + ".upper"));
  } catch (const ContractViolation& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

json box_json(const Box& b) { return {{"lower", to_std(b.lower)}, {"upper", to_std(b.upper)}}; }

template <typename T>
void maybe(const json& j, const char* key, T& field, const std::string& where) {
  if (!j.contains(key)) return;
  const std::string at = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.at(key).is_boolean()) throw ConfigError(at + ": expected a boolean");
    field = j.at(key).get<bool>();
  } else if constexpr (std::is_same_v<T, int>) {
    field = as_int(j.at(key), at);
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!j.at(key).is_number_unsigned()) {
      throw ConfigError(at + ": expected a non-negative integer");
    }
    field = j.at(key).get<std::uint64_t>();
  } else {
    field = as_number(j.at(key), at);
  }
}

SolverOptions parse_solver(const json& j) {
  const std::string w = "solver";
  reject_unknown(j, w,
                 {"max_rounds", "objective_tol", "stall_rounds", "margin", "separation",
                  "frame_gap", "frame_width", "trust_region", "slack_weight",
                  "certify_resolution", "edge_probe_spacing", "threads",
                  "retry_from_incumbent", "solve_every", "dense_prefix", "search_evals",
                  "search_work", "search_restarts",
                  "search_all_restarts", "search_step"});
  SolverOptions o;
  maybe(j, "max_rounds", o.max_rounds, w);
  maybe(j, "objective_tol", o.objective_tol, w);
  maybe(j, "stall_rounds", o.stall_rounds, w);
  maybe(j, "margin", o.margin, w);
  maybe(j, "separation", o.separation, w);
  maybe(j, "frame_gap", o.frame_gap, w);
  maybe(j, "frame_width", o.frame_width, w);
  maybe(j, "trust_region", o.trust_region, w);
  maybe(j, "slack_weight", o.slack_weight, w);
  maybe(j, "certify_resolution", o.certify_resolution, w);
  maybe(j, "edge_probe_spacing", o.edge_probe_spacing, w);
  maybe(j, "threads", o.threads, w);
  maybe(j, "retry_from_incumbent", o.retry_from_incumbent, w);
  maybe(j, "solve_every", o.solve_every, w);
  maybe(j, "dense_prefix", o.dense_prefix, w);
  maybe(j, "search_evals", o.search_evals, w);
  maybe(j, "search_work", o.search_work, w);
  maybe(j, "search_restarts", o.search_restarts, w);
  maybe(j, "search_all_restarts", o.search_all_restarts, w);
  maybe(j, "search_step", o.search_step, w);
  return o;
}

json solver_json(const SolverOptions& o) {
  return {{"max_rounds", o.max_rounds},
          {"objective_tol", o.objective_tol},
          {"stall_rounds", o.stall_rounds},
          {"margin", o.margin},
          {"separation", o.separation},
          {"frame_gap", o.frame_gap},
          {"frame_width", o.frame_width},
          {"trust_region", o.trust_region},
          {"slack_weight", o.slack_weight},
          {"certify_resolution", o.certify_resolution},
          {"edge_probe_spacing", o.edge_probe_spacing},
          {"threads", o.threads},
          {"retry_from_incumbent", o.retry_from_incumbent},
          {"solve_every", o.solve_every},
          {"dense_prefix", o.dense_prefix},
          {"search_evals", o.search_evals},
          {"search_work", o.search_work},
          {"search_restarts", o.search_restarts},
          {"search_all_restarts", o.search_all_restarts},
          {"search_step", o.search_step}};
}

VerifyOptions parse_verify(const json& j) {
  const std::string w = "verify";
  reject_unknown(j, w,
                 {"resolution", "admissibility_tol", "trials", "horizon", "dt",
                  "penetration_tol"});
  VerifyOptions o;
  maybe(j, "resolution", o.resolution, w);
  maybe(j, "admissibility_tol", o.admissibility_tol, w);
  maybe(j, "trials", o.trials, w);
  maybe(j, "horizon", o.horizon, w);
  maybe(j, "dt", o.dt, w);
  maybe(j, "penetration_tol", o.penetration_tol, w);
  return o;
}

json verify_json(const VerifyOptions& o) {
  return {{"resolution", o.resolution}, {"admissibility_tol", o.admissibility_tol},
          {"trials", o.trials},         {"horizon", o.horizon},
          {"dt", o.dt},                 {"penetration_tol", o.penetration_tol}};
}

}  // namespace

RunConfig parse_config(const json& j) {
  const std::string w = "config";
  reject_unknown(j, w,
                 {"schema_version", "system", "input_bounds", "region", "grid_resolution",
                  "samples", "seed", "halfspaces", "alpha_gain", "start_state", "solver",
                  "verify", "simulate", "output_dir"});
  const int version = as_int(require(j, w, "schema_version"), "schema_version");
  if (version != RunConfig::kSchemaVersion) {
    throw ConfigError("config: unsupported schema_version " + std::to_string(version));
  }
  RunConfig c;
  const json& sys = require(j, w, "system");
  if (!sys.is_string()) throw ConfigError("system: expected a string");
  c.system = sys.get<std::string>();

  const json& bounds = require(j, w, "input_bounds");
  if (bounds.is_string()) {
    if (bounds.get<std::string>() != "unbounded") {
      throw ConfigError("input_bounds: only the string 'unbounded' is accepted");
    }
    // Input dimension is filled in by the system below.
    c.u_min = Vec::Constant(1, -kUnboundedInput);
    c.u_max = Vec::Constant(1, kUnboundedInput);
  } else {
    reject_unknown(bounds, "input_bounds", {"lower", "upper"});
    c.u_min = bound_vector(require(bounds, "input_bounds", "lower"), "input_bounds.lower", -1);
    c.u_max = bound_vector(require(bounds, "input_bounds", "upper"), "input_bounds.upper", 1);
  }

  const json& region = require(j, w, "region");
  reject_unknown(region, "region", {"state_space", "unsafe"});
  c.region.state_space = parse_box(require(region, "region", "state_space"),
                                   "region.state_space");
  if (region.contains("unsafe")) {
    const json& unsafe = region.at("unsafe");
    if (!unsafe.is_array()) throw ConfigError("region.unsafe: expected an array");
    for (std::size_t k = 0; k < unsafe.size(); ++k) {
      c.region.unsafe.push_back(
          parse_box(unsafe[k], "region.unsafe[" + std::to_string(k) + "]"));
    }
  }

  maybe(j, "grid_resolution", c.grid_resolution, w);
  maybe(j, "samples", c.samples, w);
  maybe(j, "seed", c.seed, w);
  maybe(j, "halfspaces", c.halfspaces, w);
  maybe(j, "alpha_gain", c.alpha_gain, w);
  c.start_state = as_vector(require(j, w, "start_state"), "start_state");
  if (j.contains("solver")) c.solver = parse_solver(j.at("solver"));
  if (j.contains("verify")) c.verify = parse_verify(j.at("verify"));
  c.verify.seed = c.seed;
  c.verify.threads = c.solver.threads;
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    reject_unknown(s, "simulate", {"x0", "u_nominal", "horizon", "dt"});
    if (s.contains("x0")) c.simulate.x0 = as_vector(s.at("x0"), "simulate.x0");
    if (s.contains("u_nominal")) {
      c.simulate.u_nominal = as_vector(s.at("u_nominal"), "simulate.u_nominal");
    }
    maybe(s, "horizon", c.simulate.horizon, "simulate");
    maybe(s, "dt", c.simulate.dt, "simulate");
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("output_dir: expected a string");
    c.output_dir = j.at("output_dir").get<std::string>();
  }
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  json unsafe = json::array();
  for (const Box& b : c.region.unsafe) unsafe.push_back(box_json(b));
  json out = {
      {"schema_version", RunConfig::kSchemaVersion},
      {"system", c.system},
      {"input_bounds", {{"lower", bound_json(c.u_min)}, {"upper", bound_json(c.u_max)}}},
      {"region", {{"state_space", box_json(c.region.state_space)}, {"unsafe", unsafe}}},
      {"grid_resolution", c.grid_resolution},
      {"samples", c.samples},
      {"seed", c.seed},
      {"halfspaces", c.halfspaces},
      {"alpha_gain", c.alpha_gain},
      {"start_state", to_std(c.start_state)},
      {"solver", solver_json(c.solver)},
      {"verify", verify_json(c.verify)},
      {"output_dir", c.output_dir},
  };
  json sim = {{"horizon", c.simulate.horizon}, {"dt", c.simulate.dt}};
  if (c.simulate.x0.size() > 0) sim["x0"] = to_std(c.simulate.x0);
  if (c.simulate.u_nominal.size() > 0) sim["u_nominal"] = to_std(c.simulate.u_nominal);
  out["simulate"] = sim;
  return out;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

double parse_bound_token(const std::string& token) {
  if (token == "unbounded" || token == "inf") return kUnboundedInput;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad bound '" + token + "'");
  }
  if (used != token.size() || !(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError("bad bound '" + token + "'");
  }
  return std::min(v, kUnboundedInput);
}

std::string bound_label(double magnitude) {
  if (magnitude >= kUnboundedInput) return "unbounded";
  std::ostringstream out;
  out << magnitude;
  return out.str();
}

void RunConfig::validate() const {
  if (system != "moore_greitzer") throw ConfigError("system: unknown system '" + system + "'");
  try {
    region.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("region: ") + e.what());
  }
  const int n = region.dim();
  if (n != 2) throw ConfigError("region: moore_greitzer is two-dimensional");
  if (u_min.size() != 1 || u_max.size() != 1) {
    throw ConfigError("input_bounds: moore_greitzer has one input");
  }
  if ((u_min.array() > u_max.array()).any()) {
    throw ConfigError("input_bounds: lower exceeds upper");
  }
  if (!(grid_resolution > 0.0)) throw ConfigError("grid_resolution: must be positive");
  if (samples < 1) throw ConfigError("samples: must be at least 1");
  if (halfspaces < n + 1) throw ConfigError("halfspaces: must be at least n + 1");
  if (!(alpha_gain > 0.0)) throw ConfigError("alpha_gain: must be positive");
  if (start_state.size() != n) throw ConfigError("start_state: wrong dimension");
  if (!contains(region, start_state)) {
    throw ConfigError("start_state: not in the allowable set");
  }
  const SolverOptions& s = solver;
  if (s.max_rounds < 1 || s.stall_rounds < 1 || s.threads < 1 || s.solve_every < 1 ||
      s.dense_prefix < 0 || s.search_evals < 0 || s.search_work < 0 || s.search_restarts < 1 || !(s.search_step > 0.0)) {
    throw ConfigError("solver: counts must be positive");
  }
  if (!(s.trust_region > 0.0) || !(s.slack_weight > 0.0) || !(s.certify_resolution > 0.0) ||
      !(s.edge_probe_spacing > 0.0) || !(s.frame_width > 0.0) || s.frame_gap < 0.0 ||
      s.separation < 0.0 || s.margin < 0.0 || s.objective_tol < 0.0) {
    throw ConfigError("solver: tolerances out of range");
  }
  if (!(verify.resolution > 0.0) || verify.trials < 1 || !(verify.dt > 0.0) ||
      !(verify.horizon >= verify.dt) || verify.admissibility_tol < 0.0 ||
      verify.penetration_tol < 0.0) {
    throw ConfigError("verify: settings out of range");
  }
  if (simulate.x0.size() != 0 && simulate.x0.size() != n) {
    throw ConfigError("simulate.x0: wrong dimension");
  }
  if (simulate.u_nominal.size() != 0 && simulate.u_nominal.size() != 1) {
    throw ConfigError("simulate.u_nominal: wrong dimension");
  }
  if (!(simulate.dt > 0.0) || !(simulate.horizon > 0.0)) {
    throw ConfigError("simulate: horizon and dt must be positive");
  }
}

ControlAffineSystem make_system(const RunConfig& config) {
  ControlAffineSystem sys = moore_greitzer();
  sys.set_input_bounds(config.u_min, config.u_max);
  sys.state_space = config.region.state_space;
  return sys;
}

LearnProblem make_problem(const RunConfig& config) {
  LearnProblem p;
  p.system = make_system(config);
  p.region = config.region;
  p.samples = sample_interior(config.region, config.samples, config.seed);
  p.L = config.halfspaces;
  p.alpha_gain = config.alpha_gain;
  p.options = config.solver;
  p.options.search_seed = config.seed;
  return p;
}

}  // namespace lcbf
