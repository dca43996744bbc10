#include "lcbf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lcbf/errors.hpp"
#include "lcbf/parallel.hpp"
#include "lcbf/safectrl.hpp"
#include "lcbf/solvers.hpp"

namespace lcbf {
namespace {

std::vector<Vec> lattice(const Box& space, double resolution) {
  if (!(resolution > 0.0)) throw ContractViolation("verify: resolution must be positive");
  RegionSpec whole{space, {}};
  return build_grid(whole, Vec::Constant(space.dim(), resolution)).nodes;
}

std::vector<Vec> to_points(const std::vector<Vec>& all, const std::vector<char>& keep) {
  std::vector<Vec> out;
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (keep[k]) out.push_back(all[k]);
  }
  return out;
}

// Bounding box of the safe set intersected with `space`, or nullopt if empty.
std::optional<Box> safe_set_bounds(const PolytopicCbf& cbf, const Box& space) {
  const int n = cbf.dim();
  const int L = cbf.rows();
  Mat G(L + 2 * n, n);
  Vec h(L + 2 * n);
  G.topRows(L) = -cbf.A();
  h.head(L) = cbf.b();
  G.middleRows(L, n) = Mat::Identity(n, n);
  h.segment(L, n) = space.upper;
  G.bottomRows(n) = -Mat::Identity(n, n);
  h.tail(n) = -space.lower;
  Vec lo(n), hi(n);
  for (int d = 0; d < n; ++d) {
    Vec c = Vec::Zero(n);
    c[d] = 1.0;
    const LpResult low = solve_lp(G, h, c);
    if (low.status != LpStatus::kOptimal) return std::nullopt;
    const LpResult high = solve_lp(G, h, -c);
    if (high.status != LpStatus::kOptimal) return std::nullopt;
    lo[d] = low.x[d];
    hi[d] = std::max(high.x[d], lo[d]);
  }
  return Box(lo, hi);
}

Vec adversarial_input(const ControlAffineSystem& system, const Vec& a, const Vec& x) {
  const Mat g = system.actuation(x);
  Vec u(system.input_dim);
  for (int j = 0; j < system.input_dim; ++j) {
    u[j] = a.dot(g.col(j)) > 0.0 ? system.u_min[j] : system.u_max[j];
  }
  return u;
}

}  // namespace

bool VerificationReport::invariance_passed() const {
  return std::none_of(invariance_trials.begin(), invariance_trials.end(),
                      [](const InvarianceTrial& t) { return t.exited; });
}

bool VerificationReport::passed() const {
  return containment_passed() && admissibility_passed() && invariance_passed();
}

std::vector<Vec> check_containment(const PolytopicCbf& cbf, const RegionSpec& region,
                                   double resolution) {
  const std::vector<Vec> probes = lattice(region.state_space, resolution);
  std::vector<char> bad(probes.size());
  for (std::size_t k = 0; k < probes.size(); ++k) {
    bad[k] = in_safe_set(cbf, probes[k]) && !contains(region, probes[k]);
  }
  return to_points(probes, bad);
}

std::vector<Vec> check_admissibility(const PolytopicCbf& cbf,
                                     const ControlAffineSystem& system,
                                     const RegionSpec& region, double resolution,
                                     double tol, int threads) {
  const std::vector<Vec> probes = lattice(region.state_space, resolution);
  std::vector<char> bad(probes.size(), 0);
  parallel_for(probes.size(), threads, [&](std::size_t k) {
    if (in_safe_set(cbf, probes[k])) {
      bad[k] = admissible_input(cbf, system, probes[k], tol) ? 0 : 1;
    }
  });
  return to_points(probes, bad);
}

std::vector<InvarianceTrial> check_invariance(const PolytopicCbf& cbf,
                                              const ControlAffineSystem& system,
                                              const RegionSpec& region,
                                              const VerifyOptions& options) {
  if (options.trials < 1) throw ContractViolation("check_invariance: trials must be >= 1");
  const auto bounds = safe_set_bounds(cbf, region.state_space);
  if (!bounds) return {};

  std::mt19937_64 rng(options.seed);
  std::vector<std::uniform_real_distribution<double>> axis;
  for (int d = 0; d < cbf.dim(); ++d) axis.emplace_back(bounds->lower[d], bounds->upper[d]);
  std::vector<Vec> starts;
  const long max_draws = 1000000L * options.trials;
  for (long draw = 0; draw < max_draws && static_cast<int>(starts.size()) < options.trials;
       ++draw) {
    Vec x(cbf.dim());
    for (int d = 0; d < cbf.dim(); ++d) x[d] = axis[d](rng);
    if (in_safe_set(cbf, x, 0.0) && contains(region, x)) starts.push_back(std::move(x));
  }
  if (starts.empty()) return {};

  std::vector<InvarianceTrial> trials(starts.size());
  parallel_for(starts.size(), options.threads, [&](std::size_t k) {
    InvarianceTrial& trial = trials[k];
    trial.x0 = starts[k];
    trial.facet = static_cast<int>(k % static_cast<std::size_t>(cbf.rows()));
    const Vec a = cbf.A().row(trial.facet).transpose();
    Controller nominal = [&system, a](double, const Vec& x) {
      return adversarial_input(system, a, x);
    };
    bool fallback = false;
    Controller filtered = safe_controller(
        cbf, system, nominal,
        [&fallback](double, const Vec&, const FilterStep& s) { fallback |= s.fallback; });
    const Trajectory traj = simulate(system, filtered, trial.x0, options.dt, options.horizon);
    double worst = 0.0;
    for (const Vec& x : traj.states) worst = std::max(worst, -min_h(cbf, x));
    trial.penetration = worst;
    trial.exited = worst > options.penetration_tol || traj.left_state_space;
    trial.fallback = fallback;
  });
  return trials;
}

VerificationReport verify_cbf(const PolytopicCbf& cbf, const ControlAffineSystem& system,
                              const RegionSpec& region, const VerifyOptions& options) {
  VerificationReport report;
  report.options = options;
  report.containment_violations = check_containment(cbf, region, options.resolution);
  report.admissibility_failures =
      check_admissibility(cbf, system, region, options.resolution,
                          options.admissibility_tol, options.threads);
  for (const Vec& x : lattice(region.state_space, options.resolution)) {
    if (in_safe_set(cbf, x)) ++report.probes_in_safe_set;
  }
  report.invariance_trials = check_invariance(cbf, system, region, options);
  return report;
}

nlohmann::json report_to_json(const VerificationReport& report) {
  auto points = [](const std::vector<Vec>& xs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Vec& x : xs) arr.push_back(std::vector<double>(x.data(), x.data() + x.size()));
    return arr;
  };
  nlohmann::json trials = nlohmann::json::array();
  double worst = 0.0;
  for (const InvarianceTrial& t : report.invariance_trials) {
    worst = std::max(worst, t.penetration);
    trials.push_back({{"x0", std::vector<double>(t.x0.data(), t.x0.data() + t.x0.size())},
                      {"facet", t.facet},
                      {"penetration", t.penetration},
                      {"exited", t.exited},
                      {"fallback", t.fallback}});
  }
  const VerifyOptions& o = report.options;
  return {
      {"passed", report.passed()},
      {"settings",
       {{"resolution", o.resolution},
        {"admissibility_tol", o.admissibility_tol},
        {"trials", o.trials},
        {"horizon", o.horizon},
        {"dt", o.dt},
        {"penetration_tol", o.penetration_tol},
        {"seed", o.seed}}},
      {"probes_in_safe_set", report.probes_in_safe_set},
      {"containment", {{"passed", report.containment_passed()},
                       {"violations", points(report.containment_violations)}}},
      {"admissibility", {{"passed", report.admissibility_passed()},
                         {"failures", points(report.admissibility_failures)}}},
      {"invariance", {{"passed", report.invariance_passed()},
                      {"max_penetration", worst},
                      {"trials", trials}}},
  };
}

}  // namespace lcbf
