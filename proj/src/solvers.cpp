#include "lcbf/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lcbf/errors.hpp"

namespace lcbf {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kPivotTol = 1e-9;

// Dense tableau for  min cost.y  s.t.  M y = rhs, y >= 0, with one artificial
// column per equation appended after the structural columns.
class DualTableau {
 public:
  DualTableau(const Mat& M, const Vec& rhs) : rows_(static_cast<int>(M.rows())),
                                              structural_(static_cast<int>(M.cols())) {
    const int cols = structural_ + rows_ + 1;
    t_ = RowMat::Zero(rows_ + 1, cols);
    basis_.resize(rows_);
    for (int r = 0; r < rows_; ++r) {
      const double sign = rhs[r] >= 0.0 ? 1.0 : -1.0;
      t_.row(r).head(structural_) = sign * M.row(r);
      t_(r, structural_ + r) = 1.0;
      t_(r, cols - 1) = sign * rhs[r];
      basis_[r] = structural_ + r;
    }
  }

  int rhs_col() const { return static_cast<int>(t_.cols()) - 1; }

  // Loads reduced costs for the given column costs (size = all columns but
  // rhs) relative to the current basis.
  void set_costs(const Vec& cost) {
    auto obj = t_.row(rows_);
    obj.setZero();
    obj.head(cost.size()) = cost.transpose();
    for (int r = 0; r < rows_; ++r) {
      if (dead_row(r)) continue;
      const double cb = cost[basis_[r]];
      if (cb != 0.0) obj -= cb * t_.row(r);
    }
  }

  // Runs simplex iterations over columns [0, allowed); column k prices in
  // when its reduced cost is below -cost_tol[k]. Returns false if the
  // objective is unbounded below.
  bool optimize(int allowed, const Vec& cost_tol) {
    int degenerate_run = 0;
    const long max_iter = 50L * (static_cast<long>(t_.cols()) + rows_) + 1000;
    for (long iter = 0; iter < max_iter; ++iter) {
      const bool bland = degenerate_run > 50;
      int enter = -1;
      double best = 0.0;
      for (int k = 0; k < allowed; ++k) {
        const double rc = t_(rows_, k);
        if (rc < -cost_tol[k] && rc < best) {
          enter = k;
          if (bland) break;
          best = rc;
        }
      }
      if (enter < 0) return true;

      int leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (int r = 0; r < rows_; ++r) {
        if (dead_row(r)) continue;
        const double a = t_(r, enter);
        if (a <= kPivotTol) continue;
        const double q = t_(r, rhs_col()) / a;
        if (q < ratio - 1e-12 ||
            (q <= ratio + 1e-12 && leave >= 0 && basis_[r] < basis_[leave])) {
          if (q < ratio) ratio = q;
          leave = r;
        }
      }
      if (leave < 0) return false;
      degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(leave, enter);
    }
    throw SolverFailure("solve_lp: iteration limit reached");
  }

  void pivot(int r, int k) {
    t_.row(r) /= t_(r, k);
    for (int i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double f = t_(i, k);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[r] = k;
  }

  // Pivots basic artificials out of the basis; rows whose structural part
  // vanishes are redundant and marked dead.
  void expel_artificials() {
    for (int r = 0; r < rows_; ++r) {
      if (basis_[r] < structural_) continue;
      int best = -1;
      double mag = 1e-9;
      for (int k = 0; k < structural_; ++k) {
        const double a = std::abs(t_(r, k));
        if (a > mag) {
          mag = a;
          best = k;
        }
      }
      if (best >= 0) {
        pivot(r, best);
      } else {
        dead_.push_back(r);
      }
    }
  }

  bool dead_row(int r) const {
    return std::find(dead_.begin(), dead_.end(), r) != dead_.end();
  }
  double objective_value() const { return -t_(rows_, rhs_col()); }
  const std::vector<int>& basis() const { return basis_; }
  bool has_dead_rows() const { return !dead_.empty(); }

 private:
  int rows_;
  int structural_;
  RowMat t_;
  std::vector<int> basis_;
  std::vector<int> dead_;
};

}  // namespace

LpResult solve_lp(const Mat& G, const Vec& h, const Vec& c) {
  const int d = static_cast<int>(G.cols());
  if (c.size() != d || h.size() != G.rows()) {
    throw ContractViolation("solve_lp: dimension mismatch");
  }

  // Unit-normalize rows; drop empty ones (checking they are satisfiable).
  std::vector<int> kept;
  kept.reserve(G.rows());
  std::vector<double> scale;
  scale.reserve(G.rows());
  for (int i = 0; i < G.rows(); ++i) {
    const double s = G.row(i).norm();
    if (s < 1e-14) {
      if (h[i] < -1e-12) return LpResult{LpStatus::kInfeasible, Vec(), 0.0, {}};
      continue;
    }
    kept.push_back(i);
    scale.push_back(s);
  }
  const int m = static_cast<int>(kept.size());
  Mat Gs(m, d);
  Vec hs(m);
  for (int k = 0; k < m; ++k) {
    Gs.row(k) = G.row(kept[k]) / scale[k];
    hs[k] = h[kept[k]] / scale[k];
  }

  DualTableau tab(Gs.transpose(), -c);
  // Reduced costs in phase 2 are primal slacks, so each is judged against its
  // own row's scale; one huge rhs must not loosen the others.
  const Vec cost_tol = 1e-11 * hs.cwiseAbs().cwiseMax(1.0);

  // Phase 1: minimize the sum of artificials.
  Vec phase1 = Vec::Zero(m + d);
  phase1.tail(d).setOnes();
  tab.set_costs(phase1);
  tab.optimize(m + d, Vec::Constant(m + d, 1e-12));
  if (tab.objective_value() > 1e-9 * std::max(1.0, c.cwiseAbs().maxCoeff())) {
    // Dual infeasible: the primal is unbounded (or infeasible).
    return LpResult{LpStatus::kUnbounded, Vec(), 0.0, {}};
  }
  tab.expel_artificials();
  if (tab.has_dead_rows()) {
    throw SolverFailure("solve_lp: constraint rows do not bound every variable");
  }

  // Phase 2.
  Vec phase2 = Vec::Zero(m + d);
  phase2.head(m) = hs;
  tab.set_costs(phase2);
  if (!tab.optimize(m, cost_tol)) {
    return LpResult{LpStatus::kInfeasible, Vec(), 0.0, {}};
  }

  Mat GB(d, d);
  Vec hB(d);
  LpResult out;
  out.status = LpStatus::kOptimal;
  for (int r = 0; r < d; ++r) {
    const int k = tab.basis()[r];
    GB.row(r) = Gs.row(k);
    hB[r] = hs[k];
    out.basis.push_back(kept[k]);
  }
  out.x = GB.fullPivLu().solve(hB);
  if (!out.x.allFinite()) throw SolverFailure("solve_lp: singular optimal basis");
  out.objective = c.dot(out.x);
  std::sort(out.basis.begin(), out.basis.end());
  return out;
}

LpResult solve_lp_incremental(const Mat& G, const Vec& h, const Vec& c,
                              const std::vector<int>& seed_rows, double tol) {
  const int n_rows = static_cast<int>(G.rows());
  std::vector<char> in_set(n_rows, 0);
  std::vector<int> working;
  for (int i : seed_rows) {
    if (i < 0 || i >= n_rows) throw ContractViolation("solve_lp_incremental: bad seed row");
    if (!in_set[i]) {
      in_set[i] = 1;
      working.push_back(i);
    }
  }
  Vec norms = G.rowwise().norm();
  constexpr int kBatch = 24;
  for (int round = 0; round < 1000; ++round) {
    std::sort(working.begin(), working.end());
    Mat Gw(working.size(), G.cols());
    Vec hw(working.size());
    for (std::size_t k = 0; k < working.size(); ++k) {
      Gw.row(static_cast<int>(k)) = G.row(working[k]);
      hw[static_cast<int>(k)] = h[working[k]];
    }
    LpResult sub = solve_lp(Gw, hw, c);
    if (sub.status != LpStatus::kOptimal) return sub;
    for (int& b : sub.basis) b = working[static_cast<std::size_t>(b)];
    std::sort(sub.basis.begin(), sub.basis.end());

    std::vector<std::pair<double, int>> violated;
    const Vec resid = G * sub.x - h;
    for (int i = 0; i < n_rows; ++i) {
      if (in_set[i]) continue;
      const double v = resid[i] / std::max(norms[i], 1e-300);
      if (v > tol) violated.emplace_back(-v, i);
    }
    if (violated.empty()) return sub;
    const std::size_t take = std::min<std::size_t>(kBatch, violated.size());
    std::partial_sort(violated.begin(), violated.begin() + static_cast<long>(take),
                      violated.end());
    for (std::size_t k = 0; k < take; ++k) {
      in_set[violated[k].second] = 1;
      working.push_back(violated[k].second);
    }
  }
  throw SolverFailure("solve_lp_incremental: constraint generation did not converge");
}

std::optional<QpResult> solve_projection_qp(const Mat& G, const Vec& h,
                                            const Vec& target, double feas_tol) {
  const int m = static_cast<int>(target.size());
  const int rows = static_cast<int>(G.rows());
  if (G.cols() != m || h.size() != rows) {
    throw ContractViolation("solve_projection_qp: dimension mismatch");
  }
  if (((G * target - h).array() <= 0.0).all()) {
    return QpResult{target, {}};
  }

  // Phase 1: maximize t subject to G u + t <= h, inside a large box around
  // the target so the LP is bounded.
  constexpr double kRange = 1e9;
  Mat Gp = Mat::Zero(rows + 2 * m + 2, m + 1);
  Vec hp(rows + 2 * m + 2);
  Gp.topLeftCorner(rows, m) = G;
  Gp.block(0, m, rows, 1).setOnes();
  hp.head(rows) = h;
  for (int j = 0; j < m; ++j) {
    Gp(rows + 2 * j, j) = 1.0;
    hp[rows + 2 * j] = target[j] + kRange;
    Gp(rows + 2 * j + 1, j) = -1.0;
    hp[rows + 2 * j + 1] = -(target[j] - kRange);
  }
  Gp(rows + 2 * m, m) = 1.0;
  hp[rows + 2 * m] = 1.0;
  Gp(rows + 2 * m + 1, m) = -1.0;
  hp[rows + 2 * m + 1] = kRange;
  Vec cost = Vec::Zero(m + 1);
  cost[m] = -1.0;
  const LpResult feas = solve_lp(Gp, hp, cost);
  if (feas.status != LpStatus::kOptimal) {
    throw SolverFailure("solve_projection_qp: phase-1 program failed");
  }
  if (feas.x[m] < -feas_tol) return std::nullopt;

  Vec x = feas.x.head(m);
  std::vector<int> working;
  const int max_iter = 100 * (rows + m) + 100;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Vec grad = x - target;
    Vec p = -grad;
    Vec mu;
    if (!working.empty()) {
      Mat GWt(m, working.size());
      for (std::size_t k = 0; k < working.size(); ++k) {
        GWt.col(static_cast<int>(k)) = G.row(working[k]).transpose();
      }
      // Working rows stay linearly independent, so the QR has full column
      // rank; a full working set leaves no null space and p is exactly zero.
      const Eigen::HouseholderQR<Mat> qr(GWt);
      const int k = static_cast<int>(working.size());
      const Mat Q = qr.householderQ() * Mat::Identity(m, k);
      mu = qr.solve(-grad);
      if (!mu.allFinite()) throw SolverFailure("solve_projection_qp: singular working set");
      p = k >= m ? Vec::Zero(m) : Vec(-grad + Q * (Q.transpose() * grad));
    }

    if (p.norm() <= 1e-12 * (1.0 + grad.norm())) {
      if (working.empty()) return QpResult{x, {}};
      // Lowest row index among negative multipliers, which rules out cycling.
      int drop = -1;
      for (std::size_t k = 0; k < working.size(); ++k) {
        if (mu[static_cast<int>(k)] < -1e-12 && (drop < 0 || working[k] < working[drop])) {
          drop = static_cast<int>(k);
        }
      }
      if (drop < 0) {
        std::vector<int> active = working;
        std::sort(active.begin(), active.end());
        return QpResult{x, active};
      }
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    const double pn = p.norm();
    for (int i = 0; i < rows; ++i) {
      if (std::find(working.begin(), working.end(), i) != working.end()) continue;
      const double gp = G.row(i).dot(p);
      if (gp <= 1e-12 * G.row(i).norm() * pn) continue;
      const double step = std::max(0.0, (h[i] - G.row(i).dot(x)) / gp);
      if (step < alpha) {
        alpha = step;
        blocking = i;
      }
    }
    x += alpha * p;
    if (blocking >= 0) working.push_back(blocking);
  }
  throw SolverFailure("solve_projection_qp: active-set iteration limit reached");
}

}  // namespace lcbf
