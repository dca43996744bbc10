#include "lcbf/safectrl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "lcbf/errors.hpp"
#include "lcbf/solvers.hpp"

namespace lcbf {
namespace {

constexpr double kFeasTol = 1e-8;

double barrier_slack(const QpInstance& qp, const Vec& u) {
  if (qp.barrier_rows == 0) return std::numeric_limits<double>::infinity();
  return (qp.rhs.head(qp.barrier_rows) - qp.rows.topRows(qp.barrier_rows) * u)
      .minCoeff();
}

std::vector<int> active_rows(const QpInstance& qp, const Vec& u) {
  std::vector<int> active;
  const Vec residual = qp.rhs - qp.rows * u;
  for (int i = 0; i < residual.size(); ++i) {
    if (std::abs(residual[i]) <= kFeasTol * (1.0 + std::abs(qp.rhs[i]))) {
      active.push_back(i);
    }
  }
  return active;
}

}  // namespace

QpInstance build_qp(const PolytopicCbf& cbf, const ControlAffineSystem& system,
                    const Vec& x, const Vec& u_nom) {
  if (u_nom.size() != system.input_dim) {
    throw ContractViolation("build_qp: nominal input has wrong dimension");
  }
  StackedConstraint st = stacked(cbf, system, x);
  QpInstance qp;
  qp.nominal = u_nom;
  qp.rows = std::move(st.A_bar);
  qp.rhs = std::move(st.B_bar);
  qp.barrier_rows = st.barrier_rows;
  return qp;
}

std::optional<Vec> solve_qp(const QpInstance& qp) {
  if (!qp.rows.allFinite() || !qp.rhs.allFinite() || !qp.nominal.allFinite()) {
    throw SolverFailure("solve_qp: non-finite problem data");
  }
  auto result = solve_projection_qp(qp.rows, qp.rhs, qp.nominal, kFeasTol);
  if (!result) return std::nullopt;
  return result->u;
}

std::optional<Vec> solve_qp_interval(const QpInstance& qp) {
  if (qp.nominal.size() != 1) {
    throw ContractViolation("solve_qp_interval: single input only");
  }
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < qp.rows.rows(); ++i) {
    const double a = qp.rows(i, 0);
    const double r = qp.rhs[i];
    if (a > 0.0) {
      hi = std::min(hi, r / a);
    } else if (a < 0.0) {
      lo = std::max(lo, r / a);
    } else if (r < -kFeasTol) {
      return std::nullopt;
    }
  }
  if (lo > hi) {
    // Tolerate intervals that are empty only by rounding.
    if (lo - hi > kFeasTol * (1.0 + std::abs(lo))) return std::nullopt;
    return Vec::Constant(1, 0.5 * (lo + hi));
  }
  return Vec::Constant(1, std::clamp(qp.nominal[0], lo, hi));
}

FilterStep safe_control(const PolytopicCbf& cbf, const ControlAffineSystem& system,
                        const Vec& x, const Vec& u_nom) {
  const QpInstance qp = build_qp(cbf, system, x, u_nom);
  FilterStep step;
  step.u_nominal = u_nom;
  if (auto u = solve_qp(qp)) {
    step.u = *u;
  } else {
    const int L = qp.barrier_rows;
    const Vec prefer = u_nom.cwiseMax(system.u_min).cwiseMin(system.u_max);
    step.u = max_min_slack_input(qp.rows.topRows(L), qp.rhs.head(L), system.u_min,
                                 system.u_max, prefer)
                 .u;
    step.fallback = true;
  }
  // The box is enforced exactly on every path.
  step.u = step.u.cwiseMax(system.u_min).cwiseMin(system.u_max);
  step.active = active_rows(qp, step.u);
  step.min_slack = barrier_slack(qp, step.u);
  return step;
}

Controller safe_controller(const PolytopicCbf& cbf, const ControlAffineSystem& system,
                           Controller nominal, FilterObserver observer) {
  return [cbf, system, nominal = std::move(nominal),
          observer = std::move(observer)](double t, const Vec& x) -> Vec {
    FilterStep step = safe_control(cbf, system, x, nominal(t, x));
    if (step.fallback) {
      spdlog::debug("safety filter infeasible at t={:.4f}; max-slack fallback", t);
    }
    if (observer) observer(t, x, step);
    return step.u;
  };
}

}  // namespace lcbf
