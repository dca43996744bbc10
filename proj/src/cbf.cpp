#include "lcbf/cbf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "lcbf/errors.hpp"
#include "lcbf/solvers.hpp"

namespace lcbf {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec clamp_to(const Vec& v, const Vec& lo, const Vec& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

// Interval closed form for a single input. The concave piecewise-linear
// phi(u) = min_i (B_i - a_i u) is maximized by walking right from lo while
// its right slope is non-negative.
SlackInput max_min_slack_interval(const Vec& a, const Vec& B, double lo, double hi,
                                  double prefer) {
  const int rows = static_cast<int>(a.size());
  auto phi = [&](double u) {
    double m = kInf;
    for (int i = 0; i < rows; ++i) m = std::min(m, B[i] - a[i] * u);
    return m;
  };
  prefer = std::clamp(prefer, lo, hi);
  if (rows == 0) return SlackInput{Vec::Constant(1, prefer), kInf};

  double u = lo;
  for (int step = 0; step <= rows + 1; ++step) {
    const double value = phi(u);
    const double tie = 1e-12 * (1.0 + std::abs(value));
    int steepest = -1;
    for (int i = 0; i < rows; ++i) {
      if (B[i] - a[i] * u <= value + tie && (steepest < 0 || a[i] > a[steepest])) {
        steepest = i;
      }
    }
    if (a[steepest] > 0.0) break;  // phi decreases to the right
    double next = hi;
    for (int j = 0; j < rows; ++j) {
      if (a[j] <= a[steepest]) continue;
      const double gap = (B[j] - a[j] * u) - (B[steepest] - a[steepest] * u);
      next = std::min(next, u + std::max(gap, 0.0) / (a[j] - a[steepest]));
    }
    if (next >= hi) {
      u = hi;
      break;
    }
    if (next <= u) break;
    u = next;
  }

  const double best = phi(u);
  const double level = best - 1e-12 * (1.0 + std::abs(best));
  double p = lo;
  double q = hi;
  for (int i = 0; i < rows; ++i) {
    if (a[i] > 0.0) q = std::min(q, (B[i] - level) / a[i]);
    if (a[i] < 0.0) p = std::max(p, (B[i] - level) / a[i]);
  }
  const double chosen = p <= q ? std::clamp(prefer, p, q) : u;
  return SlackInput{Vec::Constant(1, chosen), phi(chosen)};
}

SlackInput max_min_slack_lp(const Mat& A, const Vec& B, const Vec& lo, const Vec& hi,
                            const Vec& prefer) {
  const int rows = static_cast<int>(A.rows());
  const int m = static_cast<int>(lo.size());
  const Vec target = clamp_to(prefer, lo, hi);
  if (rows == 0) return SlackInput{target, kInf};

  const double reach = std::max(lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff());
  double t_hi = kInf;
  double t_lo = 0.0;
  for (int i = 0; i < rows; ++i) {
    const double swing = A.row(i).cwiseAbs().sum() * reach;
    t_hi = std::min(t_hi, B[i] + swing + 1.0);
    t_lo = std::min(t_lo, B[i] - swing - 1.0);
  }

  const int n_rows = rows + 2 * m + 2;
  Mat G = Mat::Zero(n_rows, m + 1);
  Vec h(n_rows);
  G.topLeftCorner(rows, m) = A;
  G.block(0, m, rows, 1).setOnes();
  h.head(rows) = B;
  for (int j = 0; j < m; ++j) {
    G(rows + 2 * j, j) = 1.0;
    h[rows + 2 * j] = hi[j];
    G(rows + 2 * j + 1, j) = -1.0;
    h[rows + 2 * j + 1] = -lo[j];
  }
  G(n_rows - 2, m) = 1.0;
  h[n_rows - 2] = t_hi;
  G(n_rows - 1, m) = -1.0;
  h[n_rows - 1] = -t_lo;
  Vec c = Vec::Zero(m + 1);
  c[m] = -1.0;
  const LpResult lp = solve_lp(G, h, c);
  if (lp.status != LpStatus::kOptimal) {
    throw SolverFailure("max_min_slack_input: slack program failed");
  }
  const double best = lp.x[m];
  Vec u = clamp_to(lp.x.head(m), lo, hi);

  // Closest maximizer to the preferred input.
  Mat Gq(rows + 2 * m, m);
  Vec hq(rows + 2 * m);
  Gq.topRows(rows) = A;
  hq.head(rows) = (B.array() - best + 1e-12 * (1.0 + std::abs(best))).matrix();
  Gq.middleRows(rows, m) = Mat::Identity(m, m);
  hq.segment(rows, m) = hi;
  Gq.bottomRows(m) = -Mat::Identity(m, m);
  hq.tail(m) = -lo;
  if (auto proj = solve_projection_qp(Gq, hq, target, 1e-9)) {
    u = clamp_to(proj->u, lo, hi);
  }
  const double slack = (B - A * u).minCoeff();
  return SlackInput{u, slack};
}

}  // namespace

PolytopicCbf::PolytopicCbf(Mat A, Vec b, double alpha_gain)
    : A_(std::move(A)), b_(std::move(b)), alpha_gain_(alpha_gain) {
  if (A_.rows() != b_.size()) {
    throw ContractViolation("PolytopicCbf: A and b row counts differ");
  }
  if (A_.rows() < 1) throw ContractViolation("PolytopicCbf: need at least one row");
  if (!(alpha_gain_ > 0.0)) {
    throw ContractViolation("PolytopicCbf: alpha_gain must be positive");
  }
  for (int i = 0; i < A_.rows(); ++i) {
    if (std::abs(A_.row(i).norm() - 1.0) > kNormTol) {
      throw ContractViolation("PolytopicCbf: row " + std::to_string(i) +
                              " is not unit norm");
    }
  }
  if (!A_.allFinite() || !b_.allFinite()) {
    throw ContractViolation("PolytopicCbf: non-finite coefficients");
  }
}

PolytopicCbf PolytopicCbf::from_unnormalized(const Mat& A, const Vec& b,
                                             double alpha_gain) {
  if (A.rows() != b.size()) {
    throw ContractViolation("PolytopicCbf: A and b row counts differ");
  }
  Mat An = A;
  Vec bn = b;
  for (int i = 0; i < A.rows(); ++i) {
    const double norm = A.row(i).norm();
    if (!(norm > 0.0)) {
      throw ContractViolation("PolytopicCbf: row " + std::to_string(i) + " is zero");
    }
    An.row(i) /= norm;
    bn[i] /= norm;
  }
  return PolytopicCbf(std::move(An), std::move(bn), alpha_gain);
}

Vec eval_h(const PolytopicCbf& cbf, const Vec& x) {
  if (x.size() != cbf.dim()) throw ContractViolation("eval_h: dimension mismatch");
  return cbf.A() * x + cbf.b();
}

double min_h(const PolytopicCbf& cbf, const Vec& x) { return eval_h(cbf, x).minCoeff(); }

bool in_safe_set(const PolytopicCbf& cbf, const Vec& x, double tol) {
  return min_h(cbf, x) >= -tol;
}

StackedConstraint stacked(const PolytopicCbf& cbf, const ControlAffineSystem& system,
                          const Vec& x) {
  if (x.size() != system.state_dim || cbf.dim() != system.state_dim) {
    throw ContractViolation("stacked: dimension mismatch");
  }
  const int L = cbf.rows();
  const int m = system.input_dim;
  const Vec f = system.drift(x);
  const Mat g = system.actuation(x);
  StackedConstraint out;
  out.barrier_rows = L;
  out.A_bar = Mat::Zero(L + 2 * m, m);
  out.B_bar = Vec(L + 2 * m);
  out.A_bar.topRows(L) = -cbf.A() * g;
  out.B_bar.head(L) = cbf.A() * f + cbf.alpha_gain() * (cbf.A() * x + cbf.b());
  out.A_bar.middleRows(L, m) = Mat::Identity(m, m);
  out.B_bar.segment(L, m) = system.u_max;
  out.A_bar.bottomRows(m) = -Mat::Identity(m, m);
  out.B_bar.tail(m) = -system.u_min;
  return out;
}

bool satisfies_barrier_condition(const PolytopicCbf& cbf,
                                 const ControlAffineSystem& system, const Vec& x,
                                 const Vec& u, double tol) {
  const Vec h = cbf.A() * x + cbf.b();
  const Vec hdot = cbf.A() * system.drift(x) + cbf.A() * (system.actuation(x) * u);
  for (int i = 0; i < h.size(); ++i) {
    if (hdot[i] < -cbf.alpha_gain() * h[i] - tol) return false;
  }
  for (int j = 0; j < u.size(); ++j) {
    if (u[j] > system.u_max[j] + tol || u[j] < system.u_min[j] - tol) return false;
  }
  return true;
}

SlackInput max_min_slack_input(const Mat& barrier_A, const Vec& barrier_B,
                               const Vec& u_min, const Vec& u_max, const Vec& prefer,
                               SlackMethod method) {
  if (barrier_A.rows() != barrier_B.size() || barrier_A.cols() != u_min.size() ||
      u_min.size() != u_max.size() || prefer.size() != u_min.size()) {
    throw ContractViolation("max_min_slack_input: dimension mismatch");
  }
  const bool scalar = u_min.size() == 1;
  if (method == SlackMethod::kInterval && !scalar) {
    throw ContractViolation("max_min_slack_input: interval form needs one input");
  }
  if (scalar && method != SlackMethod::kLinearProgram) {
    return max_min_slack_interval(barrier_A.col(0), barrier_B, u_min[0], u_max[0],
                                  prefer[0]);
  }
  return max_min_slack_lp(barrier_A, barrier_B, u_min, u_max, prefer);
}

std::optional<Vec> admissible_input(const PolytopicCbf& cbf,
                                    const ControlAffineSystem& system, const Vec& x,
                                    double tol, SlackMethod method) {
  const StackedConstraint st = stacked(cbf, system, x);
  const int L = st.barrier_rows;
  const Vec prefer = clamp_to(Vec::Zero(system.input_dim), system.u_min, system.u_max);
  const SlackInput best =
      max_min_slack_input(st.A_bar.topRows(L), st.B_bar.head(L), system.u_min,
                          system.u_max, prefer, method);
  if (best.slack >= -tol) return best.u;
  return std::nullopt;
}

nlohmann::json cbf_to_json(const PolytopicCbf& cbf) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < cbf.rows(); ++i) {
    std::vector<double> a;
    for (int j = 0; j < cbf.dim(); ++j) a.push_back(cbf.A()(i, j));
    rows.push_back({{"a", a}, {"b", cbf.b()[i]}});
  }
  return {{"rows", rows}, {"alpha_gain", cbf.alpha_gain()}};
}

PolytopicCbf cbf_from_json(const nlohmann::json& j) {
  try {
    const auto& rows = j.at("rows");
    if (!rows.is_array() || rows.empty()) {
      throw ContractViolation("cbf artifact: 'rows' must be a non-empty array");
    }
    const auto n = rows.front().at("a").size();
    Mat A(rows.size(), n);
    Vec b(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto a = rows[i].at("a").get<std::vector<double>>();
      if (a.size() != n) throw ContractViolation("cbf artifact: ragged rows");
      for (std::size_t k = 0; k < n; ++k) A(static_cast<int>(i), static_cast<int>(k)) = a[k];
      b[static_cast<int>(i)] = rows[i].at("b").get<double>();
      const double norm = A.row(static_cast<int>(i)).norm();
      if (std::abs(norm - 1.0) > 1e-6) {
        spdlog::warn("cbf artifact: row {} has norm {:.6g}; renormalizing", i, norm);
      }
      // Rows already unit to kNormTol are kept bit for bit.
      if (std::abs(norm - 1.0) > PolytopicCbf::kNormTol) {
        if (!(norm > 0.0)) throw ContractViolation("cbf artifact: zero row");
        A.row(static_cast<int>(i)) /= norm;
        b[static_cast<int>(i)] /= norm;
      }
    }
    const double gain = j.value("alpha_gain", 1.0);
    return PolytopicCbf(A, b, gain);
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("cbf artifact: ") + e.what());
  }
}

}  // namespace lcbf
