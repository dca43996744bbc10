#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "lcbf/dynamics.hpp"
#include "lcbf/types.hpp"

namespace lcbf {

/// Vector-valued affine barrier h(x) = A x + b with unit-norm rows. The safe
/// set is the intersection of the halfspaces {a_i.x + b_i >= 0}; the class-K
/// function is alpha(s) = alpha_gain * s applied entry-wise.
class PolytopicCbf {
 public:
  static constexpr double kNormTol = 1e-9;

  PolytopicCbf() = default;
  /// Requires every row of A to have unit norm (within kNormTol).
  PolytopicCbf(Mat A, Vec b, double alpha_gain = 1.0);
  /// Rescales each (a_i, b_i) pair to unit norm first.
  static PolytopicCbf from_unnormalized(const Mat& A, const Vec& b,
                                        double alpha_gain = 1.0);

  const Mat& A() const { return A_; }
  const Vec& b() const { return b_; }
  double alpha_gain() const { return alpha_gain_; }
  int rows() const { return static_cast<int>(A_.rows()); }
  int dim() const { return static_cast<int>(A_.cols()); }

 private:
  Mat A_;
  Vec b_;
  double alpha_gain_ = 1.0;
};

Vec eval_h(const PolytopicCbf& cbf, const Vec& x);

/// Smallest entry of h(x).
double min_h(const PolytopicCbf& cbf, const Vec& x);

bool in_safe_set(const PolytopicCbf& cbf, const Vec& x, double tol = 1e-9);

/// Stacked input constraint A_bar u <= B_bar at one state: the first L rows
/// are the barrier condition A f + A g u >= -alpha(A x + b), the last 2m rows
/// are u <= u_max and -u <= -u_min.
struct StackedConstraint {
  Mat A_bar;
  Vec B_bar;
  int barrier_rows = 0;
};

StackedConstraint stacked(const PolytopicCbf& cbf, const ControlAffineSystem& system,
                          const Vec& x);

/// Whether u satisfies both the barrier condition and the input box, checked
/// directly (not through the stacked form).
bool satisfies_barrier_condition(const PolytopicCbf& cbf,
                                 const ControlAffineSystem& system, const Vec& x,
                                 const Vec& u, double tol);

enum class SlackMethod { kAuto, kInterval, kLinearProgram };

struct SlackInput {
  Vec u;
  /// min over barrier rows of (B_bar_i - A_bar_i u); +inf when there are none.
  double slack = 0.0;
};

/// In-bounds input maximizing the smallest barrier-row slack. Among maximizers
/// the one closest to `prefer` is returned. For a single input the interval
/// closed form is used unless kLinearProgram is requested.
SlackInput max_min_slack_input(const Mat& barrier_A, const Vec& barrier_B,
                               const Vec& u_min, const Vec& u_max,
                               const Vec& prefer,
                               SlackMethod method = SlackMethod::kAuto);

/// A witness u with A_bar u <= B_bar (within tol), or nullopt when no input in
/// the box satisfies the barrier condition at x. Prefers clamp(0).
std::optional<Vec> admissible_input(const PolytopicCbf& cbf,
                                    const ControlAffineSystem& system, const Vec& x,
                                    double tol = 1e-8,
                                    SlackMethod method = SlackMethod::kAuto);

/// {"rows": [{"a": [...], "b": ...}], "alpha_gain": ...}
nlohmann::json cbf_to_json(const PolytopicCbf& cbf);
/// Rows off unit norm by more than 1e-6 are renormalized with a warning.
PolytopicCbf cbf_from_json(const nlohmann::json& j);

}  // namespace lcbf
