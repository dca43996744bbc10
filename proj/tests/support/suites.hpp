#pragma once

// Seeded property suites that compare the library against the oracles. Both
// the unit tests and the acceptance binary run them.

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lcbf/cbf.hpp"
#include "lcbf/errors.hpp"
#include "lcbf/geometry.hpp"
#include "lcbf/learn.hpp"
#include "lcbf/safectrl.hpp"
#include "support/oracles.hpp"

namespace lcbf::suites {

struct SuiteResult {
  int cases = 0;
  int failures = 0;
  std::string first_failure;

  bool passed() const { return cases > 0 && failures == 0; }
  void fail(const std::string& what) {
    if (failures++ == 0) first_failure = what;
  }
};

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

inline RegionSpec jet_engine_region() {
  RegionSpec r;
  r.state_space = Box(vec2(-1.0, -4.0), vec2(3.0, 4.0));
  r.unsafe.emplace_back(vec2(-1.0, -4.0), vec2(0.0, 2.5));
  r.unsafe.emplace_back(vec2(-1.0, 2.0), vec2(3.0, 4.0));
  return r;
}

/// Graham scan against the exhaustive hull: same vertex set, CCW, starting at
/// the lowest (then leftmost) vertex.
inline SuiteResult hull_suite(int sets = 100, int max_points = 50, std::uint64_t seed = 101) {
  oracle::Rng rng(seed);
  SuiteResult res;
  for (int s = 0; s < sets; ++s) {
    const int n = 3 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_points - 2));
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < n; ++i) {
      pts.emplace_back(oracle::uniform(rng, -1.0, 1.0), oracle::uniform(rng, -1.0, 1.0));
    }
    ++res.cases;
    const std::vector<Eigen::Vector2d> hull = graham_scan(pts);
    std::vector<Eigen::Vector2d> sorted = hull;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
    });
    const std::vector<Eigen::Vector2d> expect = oracle::brute_force_hull(pts);
    bool same = sorted.size() == expect.size();
    for (std::size_t i = 0; same && i < sorted.size(); ++i) same = sorted[i] == expect[i];
    bool ccw = true;
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const auto& a = hull[i];
      const auto& b = hull[(i + 1) % hull.size()];
      const auto& c = hull[(i + 2) % hull.size()];
      ccw = ccw && oracle::orient(a, b, c) > 0.0;
    }
    bool start = true;
    for (const auto& v : hull) {
      start = start && (hull[0].y() < v.y() || (hull[0].y() == v.y() && hull[0].x() <= v.x()));
    }
    if (!same || !ccw || !start) {
      std::ostringstream os;
      os << "set " << s << " (" << n << " points): " << hull.size() << " vertices vs "
         << expect.size() << (ccw ? "" : ", not CCW") << (start ? "" : ", wrong start");
      res.fail(os.str());
    }
  }
  return res;
}

/// Random feasible projection QP with `L` barrier rows and the 2m box rows
/// last. A strictly interior point keeps every row at least 0.02 slack.
inline QpInstance random_qp(oracle::Rng& rng, int m, Vec* lo_out, Vec* hi_out) {
  const int L = 1 + static_cast<int>(rng() % 4);
  const Vec lo = -oracle::uniform_vec(rng, m, 0.2, 1.0);
  const Vec hi = oracle::uniform_vec(rng, m, 0.2, 1.0);
  Vec c(m);
  for (int j = 0; j < m; ++j) c[j] = oracle::uniform(rng, lo[j] + 0.05, hi[j] - 0.05);
  QpInstance qp;
  qp.barrier_rows = L;
  qp.rows = Mat::Zero(L + 2 * m, m);
  qp.rhs.resize(L + 2 * m);
  for (int i = 0; i < L; ++i) {
    const Vec a = oracle::unit_vec(rng, m);
    qp.rows.row(i) = a.transpose();
    qp.rhs[i] = a.dot(c) + oracle::uniform(rng, 0.02, 0.5);
  }
  for (int j = 0; j < m; ++j) {
    qp.rows(L + 2 * j, j) = 1.0;
    qp.rhs[L + 2 * j] = hi[j];
    qp.rows(L + 2 * j + 1, j) = -1.0;
    qp.rhs[L + 2 * j + 1] = -lo[j];
  }
  qp.nominal = oracle::uniform_vec(rng, m, -1.5, 1.5);
  *lo_out = lo;
  *hi_out = hi;
  return qp;
}

/// solve_qp against the refined grid oracle (coarse spacing 1e-3) within
/// 2e-3, plus exact passthrough of a feasible nominal.
inline SuiteResult qp_suite(int instances = 500, std::uint64_t seed = 202) {
  oracle::Rng rng(seed);
  SuiteResult res;
  for (int t = 0; t < instances; ++t) {
    const int m = 1 + t % 2;
    Vec lo, hi;
    QpInstance qp = random_qp(rng, m, &lo, &hi);
    ++res.cases;
    const auto u = solve_qp(qp);
    const auto g = oracle::refined_grid_projection(qp.rows, qp.rhs, qp.nominal, lo, hi, 1e-3);
    if (!u || !g || (*u - *g).norm() > 2e-3) {
      std::ostringstream os;
      os << "instance " << t << " (m=" << m << "): ";
      if (!u || !g) {
        os << (u ? "grid" : "solver") << " found nothing";
      } else {
        os << "|u - grid| = " << (*u - *g).norm();
      }
      res.fail(os.str());
      continue;
    }
    // Any feasible point is returned unchanged.
    qp.nominal = *g;
    const auto same = solve_qp(qp);
    if (!same || *same != *g) res.fail("instance " + std::to_string(t) + ": passthrough");
  }
  return res;
}

/// Stacked form against the barrier condition and box evaluated directly.
inline SuiteResult stacking_suite(int tuples = 10000, std::uint64_t seed = 303) {
  constexpr double kTol = 1e-10;
  oracle::Rng rng(seed);
  SuiteResult res;
  for (int t = 0; t < tuples; ++t) {
    const int n = 2;
    const int m = 1 + t % 2;
    const int L = 1 + static_cast<int>(rng() % 6);
    const ControlAffineSystem sys = oracle::random_affine_system(rng, n, m, 3.0);
    const PolytopicCbf cbf = oracle::random_cbf(rng, L, n, oracle::uniform_vec(rng, n, -1, 1),
                                                2.0, oracle::uniform(rng, 0.2, 3.0));
    const Vec x = oracle::uniform_vec(rng, n, -2.0, 2.0);
    Vec u(m);
    for (int j = 0; j < m; ++j) u[j] = oracle::uniform(rng, sys.u_min[j] - 1.0, sys.u_max[j] + 1.0);
    const StackedConstraint sc = stacked(cbf, sys, x);
    const bool via_stack = ((sc.A_bar * u - sc.B_bar).array() <= kTol).all();
    const bool direct =
        oracle::direct_barrier_ok(cbf, sys, x, u, kTol) && oracle::direct_box_ok(sys, u, kTol);
    ++res.cases;
    if (via_stack != direct) res.fail("tuple " + std::to_string(t));
  }
  return res;
}

/// volume_score against a plain double loop over nodes and rows.
inline SuiteResult volume_suite(int polytopes = 50, std::uint64_t seed = 404) {
  oracle::Rng rng(seed);
  const AllowableGrid grid = build_grid(jet_engine_region(), Vec::Constant(2, 0.1));
  SuiteResult res;
  for (int t = 0; t < polytopes; ++t) {
    const int L = 3 + static_cast<int>(rng() % 6);
    Vec center(2);
    center << oracle::uniform(rng, -1.0, 3.0), oracle::uniform(rng, -4.0, 4.0);
    const PolytopicCbf cbf = oracle::random_cbf(rng, L, 2, center, 3.0);
    const long got = volume_score(cbf, grid);
    const long expect = oracle::recount_inside(cbf, grid.nodes, 1e-9);
    ++res.cases;
    if (got != expect) {
      res.fail("polytope " + std::to_string(t) + ": " + std::to_string(got) + " vs " +
               std::to_string(expect));
    }
  }
  return res;
}

/// BFS reach against union-find component size on random boxed regions.
inline SuiteResult bfs_suite(int grids = 20, std::uint64_t seed = 505) {
  oracle::Rng rng(seed);
  SuiteResult res;
  for (int t = 0; t < grids; ++t) {
    const double res_step = 0.1;
    RegionSpec region;
    Vec upper(2);
    upper << oracle::uniform(rng, 1.0, 4.0), oracle::uniform(rng, 1.0, 4.0);
    region.state_space = Box(Vec::Zero(2), upper);
    const int boxes = 2 + static_cast<int>(rng() % 6);
    for (int k = 0; k < boxes; ++k) {
      Vec lo(2), hi(2);
      for (int d = 0; d < 2; ++d) {
        lo[d] = oracle::uniform(rng, 0.0, upper[d]);
        hi[d] = std::min(upper[d], lo[d] + oracle::uniform(rng, 0.05, 1.5));
      }
      region.unsafe.emplace_back(lo, hi);
    }
    AllowableGrid grid;
    try {
      grid = build_grid(region, Vec::Constant(2, res_step));
    } catch (const DegenerateRegion&) {
      --t;  // fully covered; draw another region
      continue;
    }
    const StateGraph graph = gen_graph(grid);
    const int start = static_cast<int>(rng() % grid.size());
    const std::vector<int> order = bfs_traverse(graph, start);
    const std::set<int> unique(order.begin(), order.end());
    const std::size_t expect =
        oracle::lattice_component_size(region, res_step, grid.nodes[static_cast<std::size_t>(start)]);
    ++res.cases;
    if (order.size() != expect || unique.size() != order.size()) {
      res.fail("grid " + std::to_string(t) + ": visited " + std::to_string(order.size()) +
               " vs component " + std::to_string(expect));
    }
  }
  return res;
}

/// Single-input admissibility: the LP and interval paths must agree with each
/// other and with the oracle's interval intersection.
inline SuiteResult lp_interval_suite(int instances = 10000, std::uint64_t seed = 606) {
  constexpr double kTol = 1e-8;
  oracle::Rng rng(seed);
  SuiteResult res;
  for (int t = 0; t < instances; ++t) {
    const int L = 1 + static_cast<int>(rng() % 6);
    const ControlAffineSystem sys = oracle::random_affine_system(rng, 2, 1, 2.0);
    const PolytopicCbf cbf =
        oracle::random_cbf(rng, L, 2, oracle::uniform_vec(rng, 2, -1, 1), 1.5);
    const Vec x = oracle::uniform_vec(rng, 2, -2.0, 2.0);
    const bool lp = admissible_input(cbf, sys, x, kTol, SlackMethod::kLinearProgram).has_value();
    const bool iv = admissible_input(cbf, sys, x, kTol, SlackMethod::kInterval).has_value();
    const bool ref = oracle::interval_admissible(cbf, sys, x, kTol);
    ++res.cases;
    if (lp != iv || iv != ref) {
      res.fail("instance " + std::to_string(t) + ": lp " + std::to_string(lp) + " interval " +
               std::to_string(iv) + " oracle " + std::to_string(ref));
    }
  }
  return res;
}

}  // namespace lcbf::suites
