#include "lcbf/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include "lcbf/errors.hpp"
#include "lcbf/safectrl.hpp"

namespace lcbf {
namespace fs = std::filesystem;
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string boundary_csv(const PolytopicCbf& cbf, const RegionSpec& region) {
  std::ostringstream out;
  for (int d = 0; d < cbf.dim(); ++d) out << (d ? "," : "") << "x" << d + 1;
  out << "\n";
  if (cbf.dim() != 2) return out.str();
  const auto poly = clip_polygon(cbf.A(), cbf.b(), region.state_space);
  for (std::size_t k = 0; k <= poly.size() && !poly.empty(); ++k) {
    const auto& p = poly[k % poly.size()];
    out << num(p[0]) << "," << num(p[1]) << "\n";
  }
  return out.str();
}

struct CsvTrajectory {
  std::ostringstream out;
  bool diagnostics = false;

  void header(int n, int m) {
    out << "t";
    for (int d = 0; d < n; ++d) out << ",x" << d + 1;
    for (int j = 0; j < m; ++j) out << ",u" << j + 1;
    out << ",min_h,fallback";
    if (diagnostics) out << ",active_rows,min_slack";
    out << "\n";
  }

  void row(double t, const Vec& x, const Vec& u, double h, const FilterStep* step) {
    out << num(t);
    for (int d = 0; d < x.size(); ++d) out << "," << num(x[d]);
    for (int j = 0; j < u.size(); ++j) out << "," << num(u[j]);
    out << "," << num(h) << "," << (step && step->fallback ? 1 : 0);
    if (diagnostics) {
      out << ",";
      if (step) {
        for (std::size_t k = 0; k < step->active.size(); ++k) {
          out << (k ? ";" : "") << step->active[k];
        }
      }
      out << "," << (step ? num(step->min_slack) : "");
    }
    out << "\n";
  }
};

bool enters_unsafe(const RegionSpec& region, const Trajectory& traj) {
  for (const Vec& x : traj.states) {
    for (const Box& u : region.unsafe) {
      if (u.contains(x)) return true;
    }
  }
  return false;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const ContractViolation& e) {
    spdlog::error("invalid input: {}", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    spdlog::error("I/O error: {}", e.what());
    return kExitIo;
  } catch (const SolverFailure& e) {
    spdlog::error("solver failure: {}", e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
}

}  // namespace

void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

PolytopicCbf load_cbf(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CBF artifact " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("CBF artifact " + path.string() + " is not valid JSON: " + e.what());
  }
  return cbf_from_json(j);
}

int cmd_learn(const RunConfig& config, const fs::path& out_dir, LearnRun* run_out) {
  config.validate();
  const LearnProblem problem = make_problem(config);
  const AllowableGrid grid =
      build_grid(config.region, Vec::Constant(config.region.dim(), config.grid_resolution));
  const StateGraph graph = gen_graph(grid);
  LearnRun run = iterative_learn(problem, grid, graph, config.start_state);

  std::ostringstream log;
  for (const LearnLogEntry& e : run.log) {
    log << nlohmann::json{{"iteration", e.iteration},
                          {"visited", e.visited},
                          {"feasible", e.feasible},
                          {"objective", e.objective},
                          {"volume_score", e.volume_score},
                          {"best_volume_score", e.best_volume_score},
                          {"from_incumbent", e.from_incumbent}}
               .dump()
        << "\n";
  }
  ensure_dir(out_dir);
  write_atomic(out_dir / "learn_log.jsonl", log.str());
  const bool feasible = run.best.feasible;
  if (feasible) {
    write_atomic(out_dir / "cbf.json", cbf_to_json(run.best.cbf).dump(2) + "\n");
    write_atomic(out_dir / "safe_set_boundary.csv", boundary_csv(run.best.cbf, config.region));
    spdlog::info("learn: feasible CBF with {} rows, volume score {}, objective {:.6g}",
                 run.best.cbf.rows(), run.best.volume_score, run.best.objective);
  } else {
    spdlog::error("learn: no iteration produced a feasible CBF");
  }
  if (run_out) *run_out = std::move(run);
  return feasible ? kExitOk : kExitInfeasible;
}

int cmd_simulate(const RunConfig& config, const PolytopicCbf& cbf,
                 const SimulateRequest& req, const fs::path& out_dir) {
  const ControlAffineSystem sys = make_system(config);
  if (req.x0.size() != sys.state_dim || !config.region.state_space.contains(req.x0)) {
    throw ConfigError("simulate: x0 must lie in the state space");
  }
  if (req.u_nominal.size() != sys.input_dim) {
    throw ConfigError("simulate: u_nominal has the wrong dimension");
  }
  if (!(req.horizon > 0.0) || !(req.dt > 0.0) || req.horizon < req.dt) {
    throw ConfigError("simulate: horizon must be positive and at least one step");
  }
  if (!contains(config.region, req.x0)) {
    spdlog::warn("simulate: x0 lies outside the allowable set");
  }
  const Vec u_nom = req.u_nominal;
  Controller nominal = [u_nom](double, const Vec&) { return u_nom; };

  std::vector<FilterStep> steps;
  Controller filtered = safe_controller(
      cbf, sys, nominal, [&steps](double, const Vec&, const FilterStep& s) { steps.push_back(s); });
  const Trajectory safe = simulate(sys, filtered, req.x0, req.dt, req.horizon);
  const Trajectory raw = simulate(sys, nominal, req.x0, req.dt, req.horizon);

  CsvTrajectory filtered_csv;
  filtered_csv.diagnostics = req.qp_diagnostics;
  filtered_csv.header(sys.state_dim, sys.input_dim);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < safe.states.size(); ++k) {
    FilterStep last;
    const FilterStep* step = nullptr;
    if (k < steps.size()) {
      step = &steps[k];
    } else {
      last = safe_control(cbf, sys, safe.states[k], u_nom);
      step = &last;
    }
    const double h = min_h(cbf, safe.states[k]);
    worst = std::min(worst, h);
    filtered_csv.row(safe.times[k], safe.states[k], step->u, h, step);
  }
  CsvTrajectory raw_csv;
  raw_csv.diagnostics = req.qp_diagnostics;
  raw_csv.header(sys.state_dim, sys.input_dim);
  for (std::size_t k = 0; k < raw.states.size(); ++k) {
    raw_csv.row(raw.times[k], raw.states[k], u_nom, min_h(cbf, raw.states[k]), nullptr);
  }
  ensure_dir(out_dir);
  write_atomic(out_dir / "trajectory_filtered.csv", filtered_csv.out.str());
  write_atomic(out_dir / "trajectory_unfiltered.csv", raw_csv.out.str());
  spdlog::info("simulate: filtered min h {:.4g}; unfiltered enters unsafe set: {}", worst,
               enters_unsafe(config.region, raw));
  return kExitOk;
}

int cmd_verify(const RunConfig& config, const PolytopicCbf& cbf, const fs::path& out_dir,
               VerificationReport* report_out) {
  const ControlAffineSystem sys = make_system(config);
  if (cbf.dim() != sys.state_dim) throw ConfigError("verify: CBF dimension mismatch");
  VerificationReport report = verify_cbf(cbf, sys, config.region, config.verify);
  ensure_dir(out_dir);
  write_atomic(out_dir / "verify_report.json", report_to_json(report).dump(2) + "\n");
  spdlog::info("verify: containment {} ({}), admissibility {} ({}), invariance {}",
               report.containment_passed() ? "pass" : "FAIL",
               report.containment_violations.size(),
               report.admissibility_passed() ? "pass" : "FAIL",
               report.admissibility_failures.size(),
               report.invariance_passed() ? "pass" : "FAIL");
  const bool ok = report.passed();
  if (report_out) *report_out = std::move(report);
  return ok ? kExitOk : kExitVerification;
}

int cmd_sweep_bounds(const RunConfig& config, const std::vector<double>& bounds,
                     const fs::path& out_dir, std::vector<SweepRow>* rows_out) {
  if (bounds.size() < 2) throw ConfigError("sweep-bounds: need at least two bound settings");
  std::vector<SweepRow> rows;
  std::ostringstream csv;
  csv << "bound,feasible,volume_score,objective\n";
  int worst = kExitOk;
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    RunConfig c = config;
    c.u_min = Vec::Constant(1, -bounds[k]);
    c.u_max = Vec::Constant(1, bounds[k]);
    const std::string label = bound_label(bounds[k]);
    LearnRun run;
    const int code =
        cmd_learn(c, out_dir / ("bound_" + std::to_string(k) + "_" + label), &run);
    if (code != kExitOk && code != kExitInfeasible) return code;
    if (code != kExitOk) worst = code;
    SweepRow row{bounds[k], run.best.feasible, run.best.volume_score, run.best.objective};
    csv << label << "," << (row.feasible ? 1 : 0) << "," << row.volume_score << ","
        << num(row.objective) << "\n";
    rows.push_back(row);
  }
  ensure_dir(out_dir);
  write_atomic(out_dir / "sweep_summary.csv", csv.str());
  if (rows_out) *rows_out = std::move(rows);
  return worst;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Learn, verify and simulate polytopic control barrier functions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string cbf_path;
  std::int64_t seed = -1;
  int threads = 0;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--out-dir", out_dir, "Output directory (default: config output_dir)");
    sub->add_option("--seed", seed, "Override the sampling seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  };
  CLI::App* learn = app.add_subcommand("learn", "Run the iterative CBF learning procedure");
  common(learn);
  CLI::App* sim = app.add_subcommand("simulate", "Simulate filtered and unfiltered runs");
  common(sim);
  std::vector<double> x0;
  std::vector<double> u_nom;
  double horizon = -1.0;
  bool diagnostics = false;
  sim->add_option("--cbf", cbf_path, "CBF artifact")->required();
  sim->add_option("--x0", x0, "Initial state")->delimiter(',');
  sim->add_option("--u-nominal", u_nom, "Constant nominal input")->delimiter(',');
  sim->add_option("--horizon", horizon, "Horizon in seconds");
  sim->add_flag("--qp-diagnostics", diagnostics, "Add active-row and slack columns");
  CLI::App* ver = app.add_subcommand("verify", "Verify a CBF artifact");
  common(ver);
  ver->add_option("--cbf", cbf_path, "CBF artifact")->required();
  CLI::App* sweep = app.add_subcommand("sweep-bounds", "Learn under several input bounds");
  common(sweep);
  std::vector<std::string> bound_tokens;
  sweep->add_option("--bounds", bound_tokens, "Symmetric bound magnitudes or 'unbounded'")
      ->delimiter(',')
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  return guarded([&]() -> int {
    RunConfig config = load_config(config_path);
    if (seed >= 0) {
      config.seed = static_cast<std::uint64_t>(seed);
      config.verify.seed = config.seed;
    }
    if (threads > 0) {
      config.solver.threads = threads;
      config.verify.threads = threads;
    }
    const fs::path out = out_dir.empty() ? fs::path(config.output_dir) : fs::path(out_dir);

    if (*learn) return cmd_learn(config, out);
    if (*ver) return cmd_verify(config, load_cbf(cbf_path), out);
    if (*sim) {
      SimulateRequest req;
      req.x0 = x0.empty() ? config.simulate.x0
                          : Eigen::Map<const Vec>(x0.data(), static_cast<int>(x0.size()));
      req.u_nominal = u_nom.empty() ? config.simulate.u_nominal
                                    : Eigen::Map<const Vec>(u_nom.data(),
                                                            static_cast<int>(u_nom.size()));
      req.horizon = horizon >= 0.0 ? horizon : config.simulate.horizon;
      req.dt = config.simulate.dt;
      req.qp_diagnostics = diagnostics;
      return cmd_simulate(config, load_cbf(cbf_path), req, out);
    }
    std::vector<double> bounds;
    for (const std::string& t : bound_tokens) bounds.push_back(parse_bound_token(t));
    return cmd_sweep_bounds(config, bounds, out);
  });
}

}  // namespace lcbf
