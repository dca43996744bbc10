#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lcbf/geometry.hpp"
#include "lcbf/types.hpp"

namespace lcbf {

/// x' = f(x) + g(x) u with box input bounds u_min <= u <= u_max.
struct ControlAffineSystem {
  std::string name;
  int state_dim = 0;
  int input_dim = 0;
  std::function<Vec(const Vec&)> drift;      // f: R^n -> R^n
  std::function<Mat(const Vec&)> actuation;  // g: R^n -> R^{n x m}
  Vec u_min;
  Vec u_max;
  /// Declared state-space box; simulation stops when a state leaves it.
  std::optional<Box> state_space;

  /// Throws ContractViolation on inconsistent dimensions or u_min > u_max.
  void validate() const;
  void set_input_bounds(const Vec& lo, const Vec& hi);
};

Vec eval_dynamics(const ControlAffineSystem& system, const Vec& x, const Vec& u);

/// Moore-Greitzer jet engine in no-stall mode:
///   f(x) = [x2 - 1.5 x1^2 - 0.5 x1^3, x1],  g(x) = [0, -1].
/// Input bounds default to [-9, 9].
ControlAffineSystem moore_greitzer();

/// Single classical RK4 step with u held constant.
Vec rk4_step(const ControlAffineSystem& system, const Vec& x, const Vec& u,
             double dt);

using Controller = std::function<Vec(double, const Vec&)>;

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs;  // inputs[k] is applied on [times[k], times[k+1])
  bool left_state_space = false;
};

/// Closed-loop fixed-step simulation with zero-order-hold control. Stops
/// early, setting `left_state_space`, once a state leaves the system's
/// declared state-space box.
Trajectory simulate(const ControlAffineSystem& system, const Controller& controller,
                    const Vec& x0, double dt, double horizon);

}  // namespace lcbf
