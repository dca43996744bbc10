#pragma once

#include <optional>
#include <vector>

#include "lcbf/types.hpp"

namespace lcbf {

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  Vec x;
  double objective = 0.0;
  /// Rows of G that define the optimal vertex.
  std::vector<int> basis;
};

/// Minimizes c.x subject to G x <= h.
///
/// The problem is solved through its dual (min h.y s.t. G^T y = -c, y >= 0)
/// with a two-phase tableau simplex, so the tableau has one row per variable
/// and one column per constraint. This suits the small-dimension,
/// many-constraint programs used throughout the library. Every variable must
/// be bounded by some rows of G; otherwise kUnbounded may be reported for a
/// problem that is merely infeasible.
LpResult solve_lp(const Mat& G, const Vec& h, const Vec& c);

/// Same problem as solve_lp, solved by constraint generation: a working set
/// seeded with `seed_rows` (which must bound every variable) grows by the most
/// violated rows until the working-set optimum satisfies all rows within
/// `tol`.
LpResult solve_lp_incremental(const Mat& G, const Vec& h, const Vec& c,
                              const std::vector<int>& seed_rows,
                              double tol = 1e-9);

struct QpResult {
  Vec u;
  std::vector<int> active;
};

/// argmin 0.5 |u - target|^2 subject to G u <= h, by a primal active-set
/// method started from an LP-feasible point. Returns nullopt if no u
/// satisfies the rows within `feas_tol`. When `target` itself satisfies every
/// row it is returned unchanged.
std::optional<QpResult> solve_projection_qp(const Mat& G, const Vec& h,
                                            const Vec& target,
                                            double feas_tol = 1e-8);

}  // namespace lcbf
