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

#pragma once

// Continuous-time quadrotor and pendulum-gate models with fixed-step
// integrators. The vector-level functions are templated on the scalar type so
// the MPC can linearize them with Eigen's forward-mode AutoDiff; the
// struct-level wrappers validate their inputs and work in double.

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace highmpc {

inline constexpr double kGravity = 9.81;
inline constexpr int kQuadStateDim = 10;
inline constexpr int kQuadCommandDim = 4;

template <typename Scalar>
using Vector3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector4T = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using QuadVectorT = Eigen::Matrix<Scalar, kQuadStateDim, 1>;
template <typename Scalar>
using CommandVectorT = Eigen::Matrix<Scalar, kQuadCommandDim, 1>;

using QuadVector = QuadVectorT<double>;
using CommandVector = CommandVectorT<double>;

// Layout of a flattened quadrotor (or gate) state.
namespace idx {
inline constexpr int kPos = 0;
inline constexpr int kVel = 3;
inline constexpr int kQuat = 6;
}  // namespace idx

// Same layout as the state: (p_dot, v_dot, q_dot).
using QuadStateDerivative = QuadVector;

template <typename Scalar>
struct QuadStateT {
  Vector3T<Scalar> position = Vector3T<Scalar>::Zero();
  Vector3T<Scalar> velocity = Vector3T<Scalar>::Zero();
  // Unit quaternion (w, x, y, z), world-from-body.
  Vector4T<Scalar> attitude = Vector4T<Scalar>(Scalar(1), Scalar(0), Scalar(0), Scalar(0));

  QuadVectorT<Scalar> vector() const {
    QuadVectorT<Scalar> x;
    x << position, velocity, attitude;
    return x;
  }

  static QuadStateT from_vector(const QuadVectorT<Scalar>& x) {
    QuadStateT s;
    s.position = x.template segment<3>(idx::kPos);
    s.velocity = x.template segment<3>(idx::kVel);
    s.attitude = x.template segment<4>(idx::kQuat);
    return s;
  }

  static QuadStateT hover_at(const Vector3T<Scalar>& position) {
    QuadStateT s;
    s.position = position;
    return s;
  }
};

template <typename Scalar>
struct QuadCommandT {
  // Mass-normalized collective thrust, m/s^2.
  Scalar thrust = Scalar(kGravity);
  Vector3T<Scalar> body_rates = Vector3T<Scalar>::Zero();

  CommandVectorT<Scalar> vector() const {
    CommandVectorT<Scalar> u;
    u << thrust, body_rates;
    return u;
  }

  static QuadCommandT from_vector(const CommandVectorT<Scalar>& u) {
    return QuadCommandT{u(0), u.template tail<3>()};
  }
};

using QuadState = QuadStateT<double>;
using QuadCommand = QuadCommandT<double>;

struct PendulumState {
  double theta = 0.0;      // rad, from the downward vertical; positive swings toward +y
  double theta_dot = 0.0;  // rad/s
};

struct PendulumParams {
  Eigen::Vector3d pivot{2.0, 0.0, 3.0};
  double length = 2.0;
  double damping = 0.4;  // b
  double mass = 2.0;     // m_p

  void validate() const;
};

// Cartesian state of the gate center. Same 10-dim layout as QuadState.
struct GateState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector4d attitude{1.0, 0.0, 0.0, 0.0};

  QuadVector vector() const {
    QuadVector x;
    x << position, velocity, attitude;
    return x;
  }
};

// Lambda(omega) such that q_dot = 0.5 * Lambda(omega) * q for body rates omega.
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 4> quaternion_rate_matrix(const Vector3T<Scalar>& w) {
  Eigen::Matrix<Scalar, 4, 4> m;
  const Scalar zero(0);
  // clang-format off
  m << zero, -w.x(), -w.y(), -w.z(),
       w.x(),  zero,  w.z(), -w.y(),
       w.y(), -w.z(),  zero,  w.x(),
       w.z(),  w.y(), -w.x(),  zero;
  // clang-format on
  return m;
}

// Body z-axis expressed in the world frame, scaled by |q|^2 (exact for unit q).
template <typename Scalar>
Vector3T<Scalar> body_z_axis(const Vector4T<Scalar>& q) {
  const Scalar& w = q(0);
  const Scalar& x = q(1);
  const Scalar& y = q(2);
  const Scalar& z = q(3);
  return Vector3T<Scalar>(Scalar(2) * (x * z + w * y), Scalar(2) * (y * z - w * x),
                          w * w - x * x - y * y + z * z);
}

// Continuous quadrotor dynamics on flat vectors: p_dot = v,
// v_dot = q (.) [0 0 c] - [0 0 g], q_dot = 0.5 Lambda(omega) q.
template <typename DerivedX, typename DerivedU>
QuadVectorT<typename DerivedX::Scalar> quad_rates(const Eigen::MatrixBase<DerivedX>& x,
                                                  const Eigen::MatrixBase<DerivedU>& u) {
  using Scalar = typename DerivedX::Scalar;
  const Vector4T<Scalar> q = x.template segment<4>(idx::kQuat);
  const Vector3T<Scalar> rates = u.template tail<3>();

  QuadVectorT<Scalar> dx;
  dx.template segment<3>(idx::kPos) = x.template segment<3>(idx::kVel);
  dx.template segment<3>(idx::kVel) = body_z_axis<Scalar>(q) * u(0);
  dx(idx::kVel + 2) -= Scalar(kGravity);
  dx.template segment<4>(idx::kQuat) = Scalar(0.5) * quaternion_rate_matrix<Scalar>(rates) * q;
  return dx;
}

template <typename Scalar>
void normalize_attitude(QuadVectorT<Scalar>& x) {
  using std::sqrt;
  const Scalar n = sqrt(x.template segment<4>(idx::kQuat).squaredNorm());
  x.template segment<4>(idx::kQuat) /= n;
}

// Explicit Euler step with attitude renormalization. This is the MPC's
// internal prediction model.
template <typename DerivedX, typename DerivedU>
QuadVectorT<typename DerivedX::Scalar> quad_euler_step(const Eigen::MatrixBase<DerivedX>& x,
                                                       const Eigen::MatrixBase<DerivedU>& u,
                                                       double dt) {
  using Scalar = typename DerivedX::Scalar;
  QuadVectorT<Scalar> next = x + Scalar(dt) * quad_rates(x, u);
  normalize_attitude(next);
  return next;
}

template <typename DerivedX, typename DerivedU>
QuadVectorT<typename DerivedX::Scalar> quad_rk4_step(const Eigen::MatrixBase<DerivedX>& x,
                                                     const Eigen::MatrixBase<DerivedU>& u,
                                                     double dt) {
  using Scalar = typename DerivedX::Scalar;
  const Scalar h(dt);
  const QuadVectorT<Scalar> x0 = x;
  const QuadVectorT<Scalar> k1 = quad_rates(x0, u);
  const QuadVectorT<Scalar> k2 = quad_rates((x0 + Scalar(0.5) * h * k1).eval(), u);
  const QuadVectorT<Scalar> k3 = quad_rates((x0 + Scalar(0.5) * h * k2).eval(), u);
  const QuadVectorT<Scalar> k4 = quad_rates((x0 + h * k3).eval(), u);
  QuadVectorT<Scalar> next = x0 + h / Scalar(6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
  normalize_attitude(next);
  return next;
}

// Checked struct-level API.

QuadStateDerivative quad_derivative(const QuadState& state, const QuadCommand& command);

// (theta_dot, theta_ddot) with theta_ddot = -(g/L) sin(theta) - (b/m_p) theta_dot.
Eigen::Vector2d pendulum_derivative(const PendulumState& state, const PendulumParams& params);

// Gate center at pivot + L (0, sin theta, -cos theta); attitude is a roll by
// theta about the world x-axis.
GateState pendulum_to_gate(const PendulumState& state, const PendulumParams& params);

QuadState integrate_euler(const QuadState& state, const QuadCommand& command, double dt);
PendulumState integrate_euler(const PendulumState& state, const PendulumParams& params, double dt);

QuadState integrate_rk4(const QuadState& state, const QuadCommand& command, double dt);
PendulumState integrate_rk4(const PendulumState& state, const PendulumParams& params, double dt);

// RK4 gate trajectory of horizon_steps + 1 samples starting at `initial`.
std::vector<GateState> simulate_pendulum(const PendulumState& initial, const PendulumParams& params,
                                         int horizon_steps, double dt);

// Mechanical energy per unit mass relative to the bottom of the swing.
double pendulum_energy(const PendulumState& state, const PendulumParams& params);

}  // namespace highmpc
