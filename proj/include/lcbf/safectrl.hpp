#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "lcbf/cbf.hpp"
#include "lcbf/dynamics.hpp"
#include "lcbf/types.hpp"

namespace lcbf {

/// min 0.5 |u - nominal|^2  s.t.  rows u <= rhs.
/// The first `barrier_rows` rows are the barrier condition
/// -A g(x) u <= A f(x) + alpha(A x + b); the last 2m rows are the input box.
struct QpInstance {
  Vec nominal;
  Mat rows;
  Vec rhs;
  int barrier_rows = 0;
};

QpInstance build_qp(const PolytopicCbf& cbf, const ControlAffineSystem& system,
                    const Vec& x, const Vec& u_nom);

/// Unique minimizer, or nullopt when no input satisfies every row within 1e-8.
std::optional<Vec> solve_qp(const QpInstance& qp);

/// Closed-form projection onto the feasible interval; single input only.
std::optional<Vec> solve_qp_interval(const QpInstance& qp);

struct FilterStep {
  Vec u;
  Vec u_nominal;
  /// True when the QP was infeasible and the max-min-slack input was used.
  bool fallback = false;
  std::vector<int> active;
  /// Smallest barrier-row slack at u (+inf when there are no barrier rows).
  double min_slack = 0.0;
};

FilterStep safe_control(const PolytopicCbf& cbf, const ControlAffineSystem& system,
                        const Vec& x, const Vec& u_nom);

using FilterObserver = std::function<void(double t, const Vec& x, const FilterStep&)>;

/// Wraps `nominal` with the CBF-QP filter. `observer`, if set, sees every call.
Controller safe_controller(const PolytopicCbf& cbf, const ControlAffineSystem& system,
                           Controller nominal, FilterObserver observer = {});

}  // namespace lcbf
