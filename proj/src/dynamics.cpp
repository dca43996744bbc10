#include "lcbf/dynamics.hpp"

#include <cmath>

#include "lcbf/errors.hpp"

namespace lcbf {

void ControlAffineSystem::validate() const {
  if (state_dim <= 0 || input_dim <= 0) {
    throw ContractViolation("system '" + name + "': dimensions must be positive");
  }
  if (!drift || !actuation) {
    throw ContractViolation("system '" + name + "': drift and actuation are required");
  }
  if (u_min.size() != input_dim || u_max.size() != input_dim) {
    throw ContractViolation("system '" + name + "': input bounds have the wrong size");
  }
  if ((u_min.array() > u_max.array()).any()) {
    throw ContractViolation("system '" + name + "': u_min exceeds u_max");
  }
  if (state_space && state_space->dim() != state_dim) {
    throw ContractViolation("system '" + name + "': state-space box dimension mismatch");
  }
}

void ControlAffineSystem::set_input_bounds(const Vec& lo, const Vec& hi) {
  u_min = lo;
  u_max = hi;
  validate();
}

Vec eval_dynamics(const ControlAffineSystem& system, const Vec& x, const Vec& u) {
  if (x.size() != system.state_dim || u.size() != system.input_dim) {
    throw ContractViolation("eval_dynamics: dimension mismatch");
  }
  return system.drift(x) + system.actuation(x) * u;
}

ControlAffineSystem moore_greitzer() {
  ControlAffineSystem sys;
  sys.name = "moore_greitzer";
  sys.state_dim = 2;
  sys.input_dim = 1;
  sys.drift = [](const Vec& x) {
    Vec f(2);
    f[0] = x[1] - 1.5 * x[0] * x[0] - 0.5 * x[0] * x[0] * x[0];
    f[1] = x[0];
    return f;
  };
  sys.actuation = [](const Vec&) {
    Mat g(2, 1);
    g << 0.0, -1.0;
    return g;
  };
  sys.u_min = Vec::Constant(1, -9.0);
  sys.u_max = Vec::Constant(1, 9.0);
  return sys;
}

Vec rk4_step(const ControlAffineSystem& system, const Vec& x, const Vec& u,
             double dt) {
  if (!(dt > 0.0)) throw ContractViolation("rk4_step: dt must be positive");
  const Vec k1 = eval_dynamics(system, x, u);
  const Vec k2 = eval_dynamics(system, x + 0.5 * dt * k1, u);
  const Vec k3 = eval_dynamics(system, x + 0.5 * dt * k2, u);
  const Vec k4 = eval_dynamics(system, x + dt * k3, u);
  Vec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) {
    throw IntegrationBlowup("rk4_step: non-finite state");
  }
  return next;
}

Trajectory simulate(const ControlAffineSystem& system, const Controller& controller,
                    const Vec& x0, double dt, double horizon) {
  if (!(dt > 0.0)) throw ContractViolation("simulate: dt must be positive");
  if (!(horizon >= dt)) throw ContractViolation("simulate: horizon must be >= dt");
  if (x0.size() != system.state_dim) {
    throw ContractViolation("simulate: x0 has the wrong dimension");
  }
  const auto steps = static_cast<long>(std::floor(horizon / dt + 1e-9));

  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.inputs.reserve(steps);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  if (system.state_space && !system.state_space->contains(x0)) {
    traj.left_state_space = true;
    return traj;
  }

  Vec x = x0;
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    Vec u = controller(t, x);
    if (u.size() != system.input_dim) {
      throw ContractViolation("simulate: controller returned the wrong input dimension");
    }
    x = rk4_step(system, x, u, dt);
    traj.inputs.push_back(std::move(u));
    traj.times.push_back(static_cast<double>(k + 1) * dt);
    traj.states.push_back(x);
    if (system.state_space && !system.state_space->contains(x)) {
      traj.left_state_space = true;
      break;
    }
  }
  return traj;
}

}  // namespace lcbf
