#include "lcbf/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>

#include <spdlog/spdlog.h>

#include "lcbf/errors.hpp"
#include "lcbf/parallel.hpp"
#include "lcbf/solvers.hpp"

namespace lcbf {
namespace {

constexpr double kCheckTol = 1e-9;
constexpr double kSlackCap = 1e3;

struct Point {
  Vec x;
  Vec f;
  Mat g;
};

Vec clamp_zero(const ControlAffineSystem& sys) {
  return Vec::Zero(sys.input_dim).cwiseMax(sys.u_min).cwiseMin(sys.u_max);
}

Point make_point(const ControlAffineSystem& sys, const Vec& x) {
  Point p;
  p.x = x;
  p.f = sys.drift(x);
  p.g = sys.actuation(x);
  if (!p.f.allFinite() || !p.g.allFinite()) {
    throw ContractViolation("learn: non-finite dynamics at a sample");
  }
  return p;
}

// Excluded boxes: unsafe boxes clipped to the state space, and a frame just
// outside the state space that keeps every iterate bounded.
std::vector<Box> exclusion_boxes(const LearnProblem& problem) {
  const Box& space = problem.region.state_space;
  const SolverOptions& opt = problem.options;
  std::vector<Box> boxes;
  for (const Box& u : problem.region.unsafe) {
    if (auto clipped = u.intersection(space)) boxes.push_back(*clipped);
  }
  const Box outer = space.inflated(opt.frame_gap + opt.frame_width);
  for (int d = 0; d < space.dim(); ++d) {
    Box low = outer;
    low.upper[d] = space.lower[d] - opt.frame_gap;
    Box high = outer;
    high.lower[d] = space.upper[d] + opt.frame_gap;
    boxes.push_back(low);
    boxes.push_back(high);
  }
  return boxes;
}

// Point of `box` maximizing min_i h_i, with that value.
std::pair<Vec, double> deepest_point(const Mat& A, const Vec& b, const Box& box) {
  const int n = static_cast<int>(A.cols());
  const int L = static_cast<int>(A.rows());
  constexpr double kCap = 1e6;
  Mat G = Mat::Zero(L + 2 * n + 2, n + 1);
  Vec h(L + 2 * n + 2);
  G.topLeftCorner(L, n) = -A;
  G.block(0, n, L, 1).setOnes();
  h.head(L) = b;
  for (int j = 0; j < n; ++j) {
    G(L + 2 * j, j) = 1.0;
    h[L + 2 * j] = box.upper[j];
    G(L + 2 * j + 1, j) = -1.0;
    h[L + 2 * j + 1] = -box.lower[j];
  }
  G(L + 2 * n, n) = 1.0;
  h[L + 2 * n] = kCap;
  G(L + 2 * n + 1, n) = -1.0;
  h[L + 2 * n + 1] = kCap;
  Vec c = Vec::Zero(n + 1);
  c[n] = -1.0;
  const LpResult lp = solve_lp(G, h, c);
  if (lp.status != LpStatus::kOptimal) {
    throw SolverFailure("learn: exclusion depth program failed");
  }
  const Vec x = lp.x.head(n);
  return {x, (A * x + b).minCoeff()};
}

// Rows of G z <= h assembled incrementally in a flat row-major buffer; seed
// rows must bound every variable so the incremental solve starts bounded.
class LpBuilder {
 public:
  explicit LpBuilder(int vars) : vars_(vars) {}

  /// Appends a zero row and returns a pointer to its coefficients.
  double* add_row(double rhs, bool seed = false) {
    if (seed) seed_.push_back(static_cast<int>(rhs_.size()));
    rhs_.push_back(rhs);
    coef_.resize(coef_.size() + static_cast<std::size_t>(vars_), 0.0);
    return coef_.data() + coef_.size() - static_cast<std::size_t>(vars_);
  }
  void add(const Vec& coef, double rhs, bool seed = false) {
    double* row = add_row(rhs, seed);
    for (int j = 0; j < vars_; ++j) row[j] = coef[j];
  }
  void bound(int var, double lo, double hi) {
    add_row(hi, true)[var] = 1.0;
    add_row(-lo, true)[var] = -1.0;
  }

  LpResult solve(const Vec& cost) const {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto rows = static_cast<Eigen::Index>(rhs_.size());
    const Mat G = Eigen::Map<const RowMajor>(coef_.data(), rows, vars_);
    const Vec h = Eigen::Map<const Vec>(rhs_.data(), rows);
    LpResult lp = solve_lp_incremental(G, h, cost, seed_);
    if (lp.status == LpStatus::kOptimal && !lp.x.allFinite()) {
      throw SolverFailure("learn: non-finite LP iterate");
    }
    return lp;
  }

 private:
  int vars_;
  std::vector<double> coef_;
  std::vector<double> rhs_;
  std::vector<int> seed_;
};

struct Offsets {
  Vec b;
  double barrier = 0.0;
  double geometry = 0.0;
};

struct Cut {
  Vec x;
  int row = 0;
};

// One candidate normal matrix with its best offsets.
struct Evaluation {
  Mat A;
  Vec b;
  bool feasible = false;
  /// 0 when certified; otherwise the residual slack (or a penalty).
  double merit = std::numeric_limits<double>::infinity();
  double objective = std::numeric_limits<double>::infinity();
  std::vector<Cut> cuts;
  std::vector<Vec> probes;
};

constexpr double kLpTol = 1e-9;
constexpr double kHardInfeasible = 1e3;
constexpr double kUncertified = 1e-4;
constexpr double kGeometryWeight = 1e3;
constexpr double kGeometryTol = 1e-8;
constexpr int kInnerLimit = 40;

bool improves(const Evaluation& cand, const Evaluation& inc) {
  if (cand.feasible != inc.feasible) return cand.feasible;
  if (!cand.feasible) return cand.merit < inc.merit - 1e-12;
  return cand.objective < inc.objective - 1e-12;
}

class Solver {
 public:
  Solver(const LearnProblem& problem, const std::vector<Vec>& visited)
      : problem_(problem),
        sys_(problem.system),
        opt_(problem.options),
        gamma_(problem.alpha_gain),
        n_(problem.system.state_dim),
        boxes_(exclusion_boxes(problem)) {
    for (const Vec& v : visited) points_.push_back(make_point(sys_, v));
    const PolytopicCbf hull = initial_polytope(visited, gamma_);
    for (const Vec& s : problem.samples) {
      if (in_safe_set(hull, s, kCheckTol)) points_.push_back(make_point(sys_, s));
    }
    const Box& space = problem.region.state_space;
    beta_cap_ = 10.0 * (1.0 + std::max(space.lower.cwiseAbs().maxCoeff(),
                                       space.upper.cwiseAbs().maxCoeff()));
    mean_point_ = Vec::Zero(n_);
    for (const Point& p : points_) mean_point_ += p.x;
    mean_point_ /= static_cast<double>(points_.size());
  }

  LearnResult run(const PolytopicCbf& init) {
    Evaluation best = evaluate(init.A());
    spdlog::debug("solve: initial merit {:.3e}", best.merit);
    alternate(best);
    spdlog::debug("solve: alternation merit {:.3e} feasible {}", best.merit, best.feasible);
    if ((!best.feasible || opt_.search_all_restarts) && opt_.search_evals > 0) {
      if (best.feasible) certified_.push_back(best);
      search(best);
      if (best.feasible) alternate(best);
    }
    spdlog::debug(
        "solve: {} points, feasible {}, merit {:.3e}, {} evaluations ({} slack, {} slack "
        "after probes, {} uncertified)",
        points_.size(), best.feasible, best.merit, evaluations_, slack_exits_,
        probe_slack_exits_, uncertified_);
    LearnResult out = package(best);
    for (const Evaluation& e : certified_) {
      if (e.A != best.A || e.b != best.b) {
        out.alternatives.emplace_back(e.A, e.b, gamma_);
      }
    }
    return out;
  }

 private:
  // Alternation of the normal update with the offset solve; a rejected step
  // is retried with a halved trust region.
  void alternate(Evaluation& best) {
    double radius = opt_.trust_region;
    int stall = 0;
    for (int round = 1; round <= opt_.max_rounds; ++round) {
      ++rounds_;
      Evaluation cand = evaluate(normal_step(best, radius));
      if (!improves(cand, best)) {
        if (++stall >= opt_.stall_rounds) break;
        radius *= 0.5;
        continue;
      }
      const bool settle = best.feasible && best.objective - cand.objective < opt_.objective_tol;
      best = std::move(cand);
      stall = 0;
      if (settle) break;
    }
  }

  // Offsets for fixed normals, then exclusion cuts and certification probes
  // until the candidate is certified or a fixed point is reached.
  Evaluation evaluate(const Mat& A) {
    ++evaluations_;
    Evaluation e;
    e.A = A;
    std::vector<Vec> inputs(points_.size(), clamp_zero(sys_));
    std::vector<Vec> probe_inputs;
    double last_slack = std::numeric_limits<double>::infinity();
    int alternations = 0;
    std::size_t failing = 0;
    for (int it = 0; it < kInnerLimit; ++it) {
      const std::optional<Offsets> off =
          solve_offsets(A, e.cuts, e.probes, inputs, probe_inputs);
      if (!off) {
        e.merit = kHardInfeasible;
        return e;
      }
      e.b = off->b;
      const double slack = (off->barrier > kLpTol ? off->barrier : 0.0) +
                           kGeometryWeight * (off->geometry > kGeometryTol ? off->geometry : 0.0);
      if (slack > 0.0) {
        // Several inputs: re-center the fixed inputs on the new offsets.
        if (sys_.input_dim > 1 && alternations < opt_.max_rounds &&
            slack < last_slack - opt_.objective_tol) {
          last_slack = slack;
          ++alternations;
          refresh_inputs(A, e.b, inputs, probe_inputs, e.probes);
          continue;
        }
        ++(e.probes.empty() ? slack_exits_ : probe_slack_exits_);
        e.merit = slack;
        return e;
      }
      bool cut = false;
      for (const Box& box : boxes_) {
        auto [x, depth] = deepest_point(A, e.b, box);
        if (depth <= -0.5 * opt_.separation) continue;
        e.cuts.push_back({x, separating_row(A, x)});
        cut = true;
      }
      if (cut) continue;
      const PolytopicCbf cbf(A, e.b, gamma_);
      std::vector<Vec> bad;
      for (const Point& p : points_) {
        if (!admissible_input(cbf, sys_, p.x, kCheckTol)) bad.push_back(p.x);
      }
      if (bad.empty()) bad = certify(cbf);
      failing = bad.size();
      if (bad.empty()) {
        e.feasible = true;
        e.merit = 0.0;
        e.objective = objective(cbf, reported_points());
        return e;
      }
      std::size_t added = 0;
      for (Vec& x : bad) added += add_probe(e.probes, probe_inputs, std::move(x)) ? 1 : 0;
      if (added == 0) break;
    }
    ++uncertified_;
    e.merit = kUncertified * (1.0 + 1e-3 * static_cast<double>(failing));
    return e;
  }

  // Row with the widest gap between the contained states and x; a cut on any
  // other row would fight the containment rows first.
  int separating_row(const Mat& A, const Vec& x) const {
    int best = 0;
    double best_gap = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < A.rows(); ++i) {
      double low = std::numeric_limits<double>::infinity();
      for (const Point& p : points_) low = std::min(low, A.row(i).dot(p.x));
      const double gap = low - A.row(i).dot(x);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    return best;
  }

  // Offsets for fixed normals. The first program minimizes the barrier slack
  // plus the weighted geometric slack of the containment and exclusion rows;
  // the second minimizes the objective at those slacks. Returns nullopt only
  // on solver failure.
  std::optional<Offsets> solve_offsets(const Mat& A, const std::vector<Cut>& cuts,
                                       const std::vector<Vec>& probes,
                                       const std::vector<Vec>& inputs,
                                       const std::vector<Vec>& probe_inputs) const {
    const int L = static_cast<int>(A.rows());
    const int geo = L + 1;
    LpBuilder lp(L + 2);
    for (int i = 0; i < L; ++i) lp.bound(i, -beta_cap_, beta_cap_);
    lp.bound(L, 0.0, kSlackCap);
    lp.bound(geo, 0.0, kSlackCap);
    // With the normals fixed, containment of every state reduces to the
    // lowest projection per facet.
    Vec low = Vec::Constant(L, std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const Point& p = points_[k];
      low = low.cwiseMin(A * p.x);
      add_barrier_rows(lp, A, p.x, p.f, p.g, inputs[k]);
    }
    for (int i = 0; i < L; ++i) {
      double* row = lp.add_row(low[i]);
      row[i] = -1.0;
      row[geo] = -1.0;
    }
    for (std::size_t k = 0; k < probes.size(); ++k) {
      const Vec& x = probes[k];
      add_barrier_rows(lp, A, x, sys_.drift(x), sys_.actuation(x), probe_inputs[k]);
    }
    for (const Cut& c : cuts) {
      double* row = lp.add_row(-A.row(c.row).dot(c.x) - opt_.separation);
      row[c.row] = 1.0;
      row[geo] = -1.0;
    }
    Vec cost = Vec::Zero(L + 2);
    cost[L] = 1.0;
    cost[geo] = kGeometryWeight;
    const LpResult first = lp.solve(cost);
    if (first.status != LpStatus::kOptimal) return std::nullopt;
    Offsets out;
    out.barrier = first.x[L];
    out.geometry = std::max(0.0, first.x[geo]);
    lp.add_row(out.barrier)[L] = 1.0;
    lp.add_row(out.geometry)[geo] = 1.0;
    cost.setZero();
    cost.head(L).setOnes();
    const LpResult second = lp.solve(cost);
    const Vec& z = second.status == LpStatus::kOptimal ? second.x : first.x;
    out.b = z.head(L);
    return out;
  }

  // Barrier rows at one state in the offsets and the shared slack. With a
  // single input the existence of u is eliminated exactly: every row bounds u
  // from one side, and each opposing pair of bounds must be ordered. With
  // several inputs the given input is held fixed.
  void add_barrier_rows(LpBuilder& lp, const Mat& A, const Vec& x, const Vec& f,
                        const Mat& g, const Vec& u) const {
    const int L = static_cast<int>(A.rows());
    const Vec c0 = A * f + gamma_ * (A * x);
    const Mat D = A * g;
    // p.beta_i + q.beta_j + slack >= rhs, scaled so (p, q) has unit norm.
    auto emit = [&](int i, double p, int j, double q, double rhs) {
      const double s = std::hypot(p, q);
      double* row = lp.add_row(-(rhs / s + opt_.margin));
      row[i] -= p / s;
      if (j >= 0) row[j] -= q / s;
      row[L] = -1.0;
    };
    if (sys_.input_dim != 1) {
      const Vec drive = c0 + D * u;
      for (int i = 0; i < L; ++i) emit(i, gamma_, -1, 0.0, -drive[i]);
      return;
    }
    const double eps = 1e-9 * (1.0 + g.norm());
    const double lo = sys_.u_min[0];
    const double hi = sys_.u_max[0];
    for (int i = 0; i < L; ++i) {
      const double d = D(i, 0);
      const double reach = d > eps ? d * hi : (d < -eps ? d * lo : 0.0);
      emit(i, gamma_, -1, 0.0, -(c0[i] + reach));
    }
    for (int i = 0; i < L; ++i) {
      if (D(i, 0) <= eps) continue;
      for (int j = 0; j < L; ++j) {
        if (D(j, 0) >= -eps) continue;
        const double di = D(i, 0);
        const double dj = -D(j, 0);
        emit(i, gamma_ * dj, j, gamma_ * di, -(c0[i] * dj + c0[j] * di));
      }
    }
  }

  void refresh_inputs(const Mat& A, const Vec& b, std::vector<Vec>& inputs,
                      std::vector<Vec>& probe_inputs, const std::vector<Vec>& probes) const {
    parallel_for(points_.size(), opt_.threads, [&](std::size_t k) {
      inputs[k] = witness(A, b, points_[k].x, points_[k].f, points_[k].g);
    });
    for (std::size_t k = 0; k < probes.size(); ++k) {
      probe_inputs[k] =
          witness(A, b, probes[k], sys_.drift(probes[k]), sys_.actuation(probes[k]));
    }
  }

  Vec witness(const Mat& A, const Vec& b, const Vec& x, const Vec& f, const Mat& g) const {
    return max_min_slack_input(-A * g, A * f + gamma_ * (A * x + b), sys_.u_min, sys_.u_max,
                               clamp_zero(sys_))
        .u;
  }

  // Normal update with inputs fixed at their max-min-slack witnesses: one LP
  // per row over (a_i, beta_i, slack) with the row norm linearized around the
  // current normal and a box trust region.
  Mat normal_step(const Evaluation& e, double radius) const {
    const int L = static_cast<int>(e.A.rows());
    std::vector<Vec> xs;
    std::vector<char> contain;
    for (const Point& p : points_) {
      xs.push_back(p.x);
      contain.push_back(1);
    }
    for (const Vec& x : e.probes) {
      xs.push_back(x);
      contain.push_back(0);
    }
    std::vector<Vec> w(xs.size());
    parallel_for(xs.size(), opt_.threads, [&](std::size_t k) {
      const Vec f = sys_.drift(xs[k]);
      const Mat g = sys_.actuation(xs[k]);
      w[k] = f + gamma_ * xs[k] + g * witness(e.A, e.b, xs[k], f, g);
    });
    Mat A_new = e.A;
    parallel_for(static_cast<std::size_t>(L), opt_.threads, [&](std::size_t r) {
      const int i = static_cast<int>(r);
      const Vec a0 = e.A.row(i).transpose();
      LpBuilder lp(n_ + 2);
      auto row_of = [&](const Vec& a, double beta, double slack) {
        Vec z(n_ + 2);
        z.head(n_) = a;
        z[n_] = beta;
        z[n_ + 1] = slack;
        return z;
      };
      for (int j = 0; j < n_; ++j) lp.bound(j, a0[j] - radius, a0[j] + radius);
      lp.bound(n_, -beta_cap_, beta_cap_);
      lp.bound(n_ + 1, 0.0, kSlackCap);
      lp.add(row_of(a0, 0.0, 0.0), 1.0);
      lp.add(row_of(-a0, 0.0, 0.0), -1.0);
      for (std::size_t k = 0; k < xs.size(); ++k) {
        if (contain[k]) lp.add(row_of(-xs[k], -1.0, 0.0), 0.0);
        const double s = std::sqrt(w[k].squaredNorm() + gamma_ * gamma_);
        lp.add(row_of(-w[k] / s, -gamma_ / s, -1.0), -opt_.margin);
      }
      for (const Cut& c : e.cuts) {
        if (c.row == i) lp.add(row_of(c.x, 1.0, 0.0), -opt_.separation);
      }
      const LpResult res = lp.solve(row_of(mean_point_, 1.0, opt_.slack_weight));
      if (res.status != LpStatus::kOptimal) return;
      const Vec a = res.x.head(n_);
      if (a.norm() > 1e-12) A_new.row(i) = a.transpose() / a.norm();
    });
    return A_new;
  }

  // Nelder-Mead over tangent coordinates of the row normals, restarted from
  // the incumbent and then from random normals. Stops at the first certified
  // candidate.
  void search(Evaluation& best) {
    const int L = static_cast<int>(best.A.rows());
    const int dims = L * (n_ - 1);
    if (dims == 0) return;
    std::mt19937_64 rng(opt_.search_seed ^ (0x9e3779b97f4a7c15ULL * points_.size()));
    std::normal_distribution<double> normal(0.0, 1.0);
    // Evaluation cost grows with the point count, so large problems get
    // proportionally fewer evaluations.
    const long capped = std::min<long>(
        opt_.search_evals, opt_.search_work / static_cast<long>(points_.size()));
    const int total = static_cast<int>(std::max<long>(capped, dims + 2));
    const int budget = std::max(dims + 2, total / opt_.search_restarts);
    int spent = 0;
    for (int restart = 0; restart < opt_.search_restarts; ++restart) {
      if (spent >= total || (best.feasible && !opt_.search_all_restarts)) break;
      Mat base = best.A;
      if (restart > 0) {
        for (int i = 0; i < L; ++i) {
          Vec a(n_);
          for (int j = 0; j < n_; ++j) a[j] = normal(rng);
          base.row(i) = a.transpose() / a.norm();
        }
      }
      std::vector<Mat> tangents(L);
      for (int i = 0; i < L; ++i) {
        const Mat q = Eigen::HouseholderQR<Mat>(Mat(base.row(i).transpose())).householderQ();
        tangents[i] = q.rightCols(n_ - 1);
      }
      auto normals = [&](const Vec& t) {
        Mat A = base;
        for (int i = 0; i < L; ++i) {
          const Vec a = base.row(i).transpose() + tangents[i] * t.segment(i * (n_ - 1), n_ - 1);
          A.row(i) = a.transpose() / a.norm();
        }
        return A;
      };
      int used = 0;
      bool found = false;
      auto merit = [&](const Vec& t) {
        ++used;
        ++spent;
        Evaluation e = evaluate(normals(t));
        const double m = e.merit;
        found = found || e.feasible;
        if (e.feasible) certified_.push_back(e);
        if (improves(e, best)) best = std::move(e);
        return m;
      };
      nelder_mead(dims, merit, [&] { return found || used >= budget; });
    }
  }

  template <typename F, typename Stop>
  void nelder_mead(int dims, F&& fn, Stop&& stop) const {
    std::vector<Vec> simplex(dims + 1, Vec::Zero(dims));
    for (int d = 0; d < dims; ++d) simplex[d + 1][d] = opt_.search_step;
    std::vector<double> value(dims + 1);
    for (int k = 0; k <= dims; ++k) {
      value[k] = fn(simplex[k]);
      if (stop()) return;
    }
    std::vector<int> order(dims + 1);
    while (!stop()) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int p, int q) { return value[p] < value[q]; });
      const int lo = order.front();
      const int hi = order.back();
      const int second = order[dims - 1];
      if (value[hi] - value[lo] < 1e-12 && (simplex[hi] - simplex[lo]).norm() < 1e-6) return;
      Vec centroid = Vec::Zero(dims);
      for (int k = 0; k < dims; ++k) centroid += simplex[order[k]];
      centroid /= dims;
      const Vec refl = centroid + (centroid - simplex[hi]);
      const double f_refl = fn(refl);
      if (stop()) return;
      if (f_refl < value[lo]) {
        const Vec expd = centroid + 2.0 * (centroid - simplex[hi]);
        const double f_exp = fn(expd);
        if (f_exp < f_refl) {
          simplex[hi] = expd;
          value[hi] = f_exp;
        } else {
          simplex[hi] = refl;
          value[hi] = f_refl;
        }
        continue;
      }
      if (f_refl < value[second]) {
        simplex[hi] = refl;
        value[hi] = f_refl;
        continue;
      }
      const bool outside = f_refl < value[hi];
      const Vec contr = outside ? Vec(centroid + 0.5 * (refl - centroid))
                                : Vec(centroid + 0.5 * (simplex[hi] - centroid));
      const double f_contr = fn(contr);
      if (stop()) return;
      if (f_contr < (outside ? f_refl : value[hi])) {
        simplex[hi] = contr;
        value[hi] = f_contr;
        continue;
      }
      for (int k = 0; k <= dims; ++k) {
        if (k == lo) continue;
        simplex[k] = simplex[lo] + 0.5 * (simplex[k] - simplex[lo]);
        value[k] = fn(simplex[k]);
        if (stop()) return;
      }
    }
  }

  // States of the safe set where admissibility is probed: polygon vertices
  // and edge points (2-D), plus certification lattice points inside the set.
  std::vector<Vec> certify(const PolytopicCbf& cbf) const {
    std::vector<Vec> probes;
    const Box& space = problem_.region.state_space;
    Vec lo = space.lower;
    Vec hi = space.upper;
    if (n_ == 2) {
      const auto poly = clip_polygon(cbf.A(), cbf.b(), space.inflated(opt_.frame_gap));
      if (poly.empty()) return {};
      lo = Vec::Constant(2, std::numeric_limits<double>::infinity());
      hi = -lo;
      for (std::size_t k = 0; k < poly.size(); ++k) {
        const Eigen::Vector2d& p = poly[k];
        const Eigen::Vector2d& q = poly[(k + 1) % poly.size()];
        lo = lo.cwiseMin(Vec(p));
        hi = hi.cwiseMax(Vec(p));
        const int pieces =
            std::max(1, static_cast<int>(std::ceil((q - p).norm() / opt_.edge_probe_spacing)));
        for (int s = 0; s < pieces; ++s) {
          probes.push_back(Vec(p + (static_cast<double>(s) / pieces) * (q - p)));
        }
      }
    }
    const double res = opt_.certify_resolution;
    std::vector<std::int64_t> c_lo(n_), c_hi(n_);
    for (int d = 0; d < n_; ++d) {
      const auto extent = static_cast<std::int64_t>(
          std::floor((space.upper[d] - space.lower[d]) / res + 1e-9));
      c_lo[d] = std::clamp<std::int64_t>(
          static_cast<std::int64_t>(std::ceil((lo[d] - space.lower[d]) / res - 1e-9)), 0,
          extent);
      c_hi[d] = std::clamp<std::int64_t>(
          static_cast<std::int64_t>(std::floor((hi[d] - space.lower[d]) / res + 1e-9)), 0,
          extent);
      if (c_lo[d] > c_hi[d]) return check_probes(cbf, probes);
    }
    std::vector<std::int64_t> c = c_lo;
    while (true) {
      Vec x(n_);
      for (int d = 0; d < n_; ++d) {
        x[d] = space.lower[d] + static_cast<double>(c[d]) * res;
      }
      if (in_safe_set(cbf, x)) probes.push_back(std::move(x));
      int axis = n_ - 1;
      while (axis >= 0 && ++c[axis] > c_hi[axis]) {
        c[axis] = c_lo[axis];
        --axis;
      }
      if (axis < 0) break;
    }
    return check_probes(cbf, probes);
  }

  std::vector<Vec> check_probes(const PolytopicCbf& cbf, const std::vector<Vec>& probes) const {
    std::vector<char> bad(probes.size(), 0);
    parallel_for(probes.size(), opt_.threads, [&](std::size_t k) {
      bad[k] = admissible_input(cbf, sys_, probes[k], 0.0) ? 0 : 1;
    });
    std::vector<Vec> failing;
    for (std::size_t k = 0; k < probes.size(); ++k) {
      if (bad[k]) failing.push_back(probes[k]);
    }
    return failing;
  }

  bool add_probe(std::vector<Vec>& probes, std::vector<Vec>& probe_inputs, Vec x) const {
    for (const Vec& q : probes) {
      if ((q - x).norm() <= 1e-9) return false;
    }
    probes.push_back(std::move(x));
    probe_inputs.push_back(clamp_zero(sys_));
    return true;
  }

  std::vector<Vec> reported_points() const {
    std::vector<Vec> out;
    for (const Point& p : points_) out.push_back(p.x);
    return out;
  }

  LearnResult package(const Evaluation& e) const {
    LearnResult r;
    r.points = reported_points();
    r.rounds = rounds_;
    r.feasible = e.feasible;
    if (e.b.size() == 0) {
      r.cbf = PolytopicCbf(e.A, Vec::Zero(e.A.rows()), gamma_);
    } else {
      r.cbf = PolytopicCbf(e.A, e.b, gamma_);
    }
    r.objective = objective(r.cbf, r.points);
    if (!r.feasible) return r;
    for (const Vec& x : r.points) {
      auto u = admissible_input(r.cbf, sys_, x, kCheckTol);
      r.witnesses.push_back(u ? *u : clamp_zero(sys_));
    }
    return r;
  }

  const LearnProblem& problem_;
  const ControlAffineSystem& sys_;
  const SolverOptions& opt_;
  double gamma_;
  int n_;
  std::vector<Box> boxes_;
  std::vector<Point> points_;
  double beta_cap_ = 0.0;
  Vec mean_point_;
  int rounds_ = 0;
  long evaluations_ = 0;
  std::vector<Evaluation> certified_;
  long uncertified_ = 0;
  long slack_exits_ = 0;
  long probe_slack_exits_ = 0;
};

bool better(const LearnResult& cand, const LearnResult& incumbent) {
  if (cand.volume_score != incumbent.volume_score) {
    return cand.volume_score > incumbent.volume_score;
  }
  return cand.objective < incumbent.objective;
}

// `base` re-targeted to another certified CBF over the same points.
LearnResult with_cbf(const LearnProblem& problem, const LearnResult& base,
                     const PolytopicCbf& cbf) {
  LearnResult r;
  r.cbf = cbf;
  r.points = base.points;
  r.feasible = true;
  r.rounds = base.rounds;
  r.objective = objective(cbf, r.points);
  for (const Vec& x : r.points) {
    auto u = admissible_input(cbf, problem.system, x, kCheckTol);
    r.witnesses.push_back(u ? *u : clamp_zero(problem.system));
  }
  return r;
}

}  // namespace

void LearnProblem::validate() const {
  system.validate();
  region.validate();
  if (region.dim() != system.state_dim) {
    throw ContractViolation("LearnProblem: region and system dimensions differ");
  }
  if (L < system.state_dim + 1) {
    throw ContractViolation("LearnProblem: L must be at least n + 1");
  }
  if (!(alpha_gain > 0.0)) throw ContractViolation("LearnProblem: alpha_gain must be positive");
  for (const Vec& s : samples) {
    if (s.size() != system.state_dim || !contains(region, s)) {
      throw ContractViolation("LearnProblem: sample outside the allowable set");
    }
  }
  if (options.max_rounds < 1 || options.solve_every < 1 || options.threads < 1) {
    throw ContractViolation("LearnProblem: invalid solver options");
  }
}

double objective(const PolytopicCbf& cbf, const std::vector<Vec>& samples) {
  double total = 0.0;
  for (const Vec& x : samples) total += eval_h(cbf, x).cwiseAbs().sum();
  return total;
}

long volume_score(const PolytopicCbf& cbf, const AllowableGrid& grid) {
  long count = 0;
  for (const Vec& x : grid.nodes) {
    if (in_safe_set(cbf, x)) ++count;
  }
  return count;
}

PolytopicCbf initial_polytope(const std::vector<Vec>& visited, double alpha_gain,
                              int min_rows) {
  if (visited.empty()) throw ContractViolation("initial_polytope: no states");
  if (visited.front().size() != 2) {
    const Halfspaces box = bounding_box_halfspaces(visited);
    return PolytopicCbf(box.A, box.b, alpha_gain);
  }
  std::vector<double> angles;
  try {
    std::vector<Eigen::Vector2d> pts;
    for (const Vec& v : visited) pts.emplace_back(v[0], v[1]);
    const Halfspaces hs = hull_to_halfspaces(graham_scan(std::move(pts)));
    for (int i = 0; i < hs.A.rows(); ++i) angles.push_back(std::atan2(hs.A(i, 1), hs.A(i, 0)));
  } catch (const DegenerateHull&) {
    // A point or a segment: start from evenly spread normals.
    const int count = std::max(min_rows, 3);
    for (int i = 0; i < count; ++i) angles.push_back(2.0 * std::numbers::pi * i / count);
  }
  // Pad by bisecting the widest angular gap between consecutive normals.
  std::sort(angles.begin(), angles.end());
  while (static_cast<int>(angles.size()) < min_rows) {
    std::size_t widest = 0;
    double gap = -1.0;
    for (std::size_t i = 0; i < angles.size(); ++i) {
      const double next = i + 1 < angles.size() ? angles[i + 1] : angles.front() + 2.0 * std::numbers::pi;
      if (next - angles[i] > gap + 1e-12) {
        gap = next - angles[i];
        widest = i;
      }
    }
    angles.insert(angles.begin() + static_cast<std::ptrdiff_t>(widest) + 1,
                  angles[widest] + 0.5 * gap);
  }
  // Offsets touch the visited set, so padded rows leave the hull unchanged.
  const int L = static_cast<int>(angles.size());
  Mat A(L, 2);
  Vec b(L);
  for (int i = 0; i < L; ++i) {
    A(i, 0) = std::cos(angles[i]);
    A(i, 1) = std::sin(angles[i]);
    double low = std::numeric_limits<double>::infinity();
    for (const Vec& v : visited) low = std::min(low, A.row(i).dot(v));
    b[i] = -low;
  }
  return PolytopicCbf(A, b, alpha_gain);
}

LearnResult solve_cbf_opt(const LearnProblem& problem, const std::vector<Vec>& visited,
                          const PolytopicCbf& init) {
  if (visited.empty()) throw ContractViolation("solve_cbf_opt: empty visited set");
  if (init.dim() != problem.system.state_dim) {
    throw ContractViolation("solve_cbf_opt: initial CBF has the wrong dimension");
  }
  Solver solver(problem, visited);
  return solver.run(PolytopicCbf(init.A(), init.b(), problem.alpha_gain));
}

std::vector<int> solve_schedule(int every, std::size_t visited_total, int dense_prefix) {
  if (every < 1) throw ContractViolation("solve_schedule: period must be positive");
  if (dense_prefix < 0) throw ContractViolation("solve_schedule: negative dense prefix");
  std::vector<int> out;
  const int total = static_cast<int>(visited_total);
  for (int v = 1; v <= total; ++v) {
    if (v <= dense_prefix || v % every == 0 || v == total) out.push_back(v);
  }
  return out;
}

LearnRun iterative_learn(const LearnProblem& problem, const AllowableGrid& grid,
                         const StateGraph& graph, const Vec& start) {
  problem.validate();
  const auto start_id = grid.locate(start);
  if (!start_id) throw ContractViolation("iterative_learn: start state is not a grid node");
  const std::vector<int> order = bfs_traverse(graph, *start_id);
  const std::vector<int> schedule = solve_schedule(problem.options.solve_every, order.size(),
                                                     problem.options.dense_prefix);

  LearnRun run;
  std::optional<LearnResult> incumbent;
  std::vector<Vec> visited;
  std::size_t next = 0;
  int iteration = 0;
  for (int count : schedule) {
    while (visited.size() < static_cast<std::size_t>(count)) {
      visited.push_back(grid.nodes[order[next++]]);
    }
    ++iteration;
    LearnResult result = solve_cbf_opt(
        problem, visited, initial_polytope(visited, problem.alpha_gain, problem.L));
    bool from_incumbent = false;
    if (!result.feasible && incumbent && problem.options.retry_from_incumbent) {
      result = solve_cbf_opt(problem, visited, incumbent->cbf);
      from_incumbent = true;
    }
    LearnLogEntry entry;
    entry.iteration = iteration;
    entry.visited = count;
    entry.feasible = result.feasible;
    entry.objective = result.objective;
    entry.from_incumbent = from_incumbent;
    if (result.feasible) {
      result.volume_score = volume_score(result.cbf, grid);
      std::vector<PolytopicCbf> alternatives = std::move(result.alternatives);
      result.alternatives.clear();
      for (const PolytopicCbf& alt : alternatives) {
        LearnResult cand = with_cbf(problem, result, alt);
        cand.volume_score = volume_score(alt, grid);
        if (better(cand, result)) result = std::move(cand);
      }
      entry.objective = result.objective;
      entry.volume_score = result.volume_score;
      if (!incumbent || better(result, *incumbent)) incumbent = result;
    } else {
      spdlog::debug("learn: iteration {} ({} visited) infeasible", iteration, count);
    }
    entry.best_volume_score = incumbent ? incumbent->volume_score : 0;
    spdlog::info("learn: iteration {} visited {} feasible {} volume {} best {}", iteration,
                 count, result.feasible, entry.volume_score, entry.best_volume_score);
    run.log.push_back(entry);
  }
  if (incumbent) {
    run.best = *incumbent;
  } else {
    run.best.feasible = false;
    run.best.cbf = initial_polytope(visited, problem.alpha_gain, problem.L);
  }
  return run;
}

}  // namespace lcbf
