// Copyright 2026 The highmpc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "highmpc/dynamics.hpp"

#include <cmath>
#include <string>

#include "highmpc/errors.hpp"

namespace highmpc {
namespace {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* field) {
  if (!v.allFinite()) {
    throw NumericalFailure(std::string("non-finite value in ") + field);
  }
}

void require_finite(double v, const char* field) {
  if (!std::isfinite(v)) {
    throw NumericalFailure(std::string("non-finite value in ") + field);
  }
}

void require_positive_dt(double dt) {
  if (!(dt > 0.0)) {
    throw ValidationError("integration step dt must be positive, got " + std::to_string(dt));
  }
}

void check_quad_inputs(const QuadState& state, const QuadCommand& command) {
  require_finite(state.position, "state.position");
  require_finite(state.velocity, "state.velocity");
  require_finite(state.attitude, "state.attitude");
  require_finite(command.thrust, "command.thrust");
  require_finite(command.body_rates, "command.body_rates");
  if (std::abs(state.attitude.norm() - 1.0) > 1e-6) {
    throw ValidationError("state.attitude is not a unit quaternion (norm " +
                          std::to_string(state.attitude.norm()) + ")");
  }
}

void check_pendulum_inputs(const PendulumState& state, const PendulumParams& params) {
  params.validate();
  require_finite(state.theta, "pendulum.theta");
  require_finite(state.theta_dot, "pendulum.theta_dot");
}

Eigen::Vector2d pendulum_rates(const Eigen::Vector2d& s, const PendulumParams& params) {
  return {s(1), -kGravity / params.length * std::sin(s(0)) - params.damping / params.mass * s(1)};
}

}  // namespace

void PendulumParams::validate() const {
  if (!pivot.allFinite()) throw ValidationError("pendulum.pivot must be finite");
  if (!(length > 0.0)) throw ValidationError("pendulum.length must be > 0");
  if (!(mass > 0.0)) throw ValidationError("pendulum.mass must be > 0");
  if (!(damping >= 0.0)) throw ValidationError("pendulum.damping must be >= 0");
}

QuadStateDerivative quad_derivative(const QuadState& state, const QuadCommand& command) {
  check_quad_inputs(state, command);
  return quad_rates(state.vector(), command.vector());
}

Eigen::Vector2d pendulum_derivative(const PendulumState& state, const PendulumParams& params) {
  check_pendulum_inputs(state, params);
  return pendulum_rates({state.theta, state.theta_dot}, params);
}

GateState pendulum_to_gate(const PendulumState& state, const PendulumParams& params) {
  const double s = std::sin(state.theta);
  const double c = std::cos(state.theta);
  GateState gate;
  gate.position = params.pivot + params.length * Eigen::Vector3d(0.0, s, -c);
  gate.velocity = params.length * state.theta_dot * Eigen::Vector3d(0.0, c, s);
  gate.attitude = Eigen::Vector4d(std::cos(0.5 * state.theta), std::sin(0.5 * state.theta), 0.0, 0.0);
  // Planar motion: keep x bit-exact on the pivot plane.
  gate.position.x() = params.pivot.x();
  gate.velocity.x() = 0.0;
  return gate;
}

QuadState integrate_euler(const QuadState& state, const QuadCommand& command, double dt) {
  require_positive_dt(dt);
  check_quad_inputs(state, command);
  return QuadState::from_vector(quad_euler_step(state.vector(), command.vector(), dt));
}

PendulumState integrate_euler(const PendulumState& state, const PendulumParams& params, double dt) {
  require_positive_dt(dt);
  check_pendulum_inputs(state, params);
  const Eigen::Vector2d s(state.theta, state.theta_dot);
  const Eigen::Vector2d next = s + dt * pendulum_rates(s, params);
  return {next(0), next(1)};
}

QuadState integrate_rk4(const QuadState& state, const QuadCommand& command, double dt) {
  require_positive_dt(dt);
  check_quad_inputs(state, command);
  return QuadState::from_vector(quad_rk4_step(state.vector(), command.vector(), dt));
}

PendulumState integrate_rk4(const PendulumState& state, const PendulumParams& params, double dt) {
  require_positive_dt(dt);
  check_pendulum_inputs(state, params);
  const Eigen::Vector2d s(state.theta, state.theta_dot);
  const Eigen::Vector2d k1 = pendulum_rates(s, params);
  const Eigen::Vector2d k2 = pendulum_rates(s + 0.5 * dt * k1, params);
  const Eigen::Vector2d k3 = pendulum_rates(s + 0.5 * dt * k2, params);
  const Eigen::Vector2d k4 = pendulum_rates(s + dt * k3, params);
  const Eigen::Vector2d next = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return {next(0), next(1)};
}

std::vector<GateState> simulate_pendulum(const PendulumState& initial, const PendulumParams& params,
                                         int horizon_steps, double dt) {
  if (horizon_steps < 1) throw ValidationError("simulate_pendulum needs horizon_steps >= 1");
  std::vector<GateState> gates;
  gates.reserve(static_cast<std::size_t>(horizon_steps) + 1);
  PendulumState s = initial;
  gates.push_back(pendulum_to_gate(s, params));
  for (int k = 0; k < horizon_steps; ++k) {
    s = integrate_rk4(s, params, dt);
    gates.push_back(pendulum_to_gate(s, params));
  }
  return gates;
}

double pendulum_energy(const PendulumState& state, const PendulumParams& params) {
  const double L = params.length;
  return (1.0 - std::cos(state.theta)) * kGravity * L + 0.5 * L * L * state.theta_dot * state.theta_dot;
}

}  // namespace highmpc
