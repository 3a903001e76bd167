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


#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "highmpc/mpc.hpp"
#include "highmpc/shooting_solver.hpp"

namespace highmpc {
namespace {

// Exhaustive KKT oracle: try every assignment of {lower, upper, free} to the
// coordinates and keep the best feasible stationary point.
template <int N>
Eigen::Matrix<double, N, 1> box_qp_by_enumeration(const Eigen::Matrix<double, N, N>& h,
                                                  const Eigen::Matrix<double, N, 1>& g,
                                                  const Eigen::Matrix<double, N, 1>& lo,
                                                  const Eigen::Matrix<double, N, 1>& hi) {
  int combos = 1;
  for (int i = 0; i < N; ++i) combos *= 3;
  double best = std::numeric_limits<double>::infinity();
  Eigen::Matrix<double, N, 1> best_u = Eigen::Matrix<double, N, 1>::Zero();
  for (int c = 0; c < combos; ++c) {
    Eigen::Matrix<double, N, 1> u = Eigen::Matrix<double, N, 1>::Zero();
    std::vector<int> free;
    int code = c;
    for (int i = 0; i < N; ++i, code /= 3) {
      if (code % 3 == 0) u(i) = lo(i);
      if (code % 3 == 1) u(i) = hi(i);
      if (code % 3 == 2) free.push_back(i);
    }
    if (!free.empty()) {
      const int m = static_cast<int>(free.size());
      Eigen::MatrixXd a(m, m);
      Eigen::VectorXd b(m);
      for (int r = 0; r < m; ++r) {
        b(r) = -g(free[r]);
        for (int j = 0; j < N; ++j) {
          if (std::find(free.begin(), free.end(), j) == free.end()) b(r) -= h(free[r], j) * u(j);
        }
        for (int s = 0; s < m; ++s) a(r, s) = h(free[r], free[s]);
      }
      const Eigen::VectorXd x = a.ldlt().solve(b);
      for (int r = 0; r < m; ++r) u(free[r]) = x(r);
    }
    if (((u - lo).array() < -1e-12).any() || ((u - hi).array() > 1e-12).any()) continue;
    const double value = 0.5 * u.dot(h * u) + g.dot(u);
    if (value < best) {
      best = value;
      best_u = u;
    }
  }
  return best_u;
}

TEST(BoxQp, MatchesEnumerationOnRandomProblems) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Matrix4d m;
    for (int i = 0; i < 16; ++i) m(i) = n01(rng);
    const Eigen::Matrix4d h = m * m.transpose() + 0.1 * Eigen::Matrix4d::Identity();
    Eigen::Vector4d g, lo, hi;
    for (int i = 0; i < 4; ++i) {
      g(i) = 3 * n01(rng);
      lo(i) = -std::abs(n01(rng));
      hi(i) = std::abs(n01(rng));
    }
    Eigen::Matrix<bool, 4, 1> free;
    const Eigen::Vector4d u = solve_box_qp<4>(h, g, lo, hi, &free);
    const Eigen::Vector4d oracle = box_qp_by_enumeration<4>(h, g, lo, hi);
    EXPECT_LT((u - oracle).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
    for (int i = 0; i < 4; ++i) {
      EXPECT_GE(u(i), lo(i));
      EXPECT_LE(u(i), hi(i));
      if (!free(i)) EXPECT_TRUE(u(i) == lo(i) || u(i) == hi(i));
    }
  }
}

TEST(BoxQp, UnconstrainedInteriorSolution) {
  const Eigen::Matrix2d h = Eigen::Vector2d(2.0, 4.0).asDiagonal();
  const Eigen::Vector2d g(-1.0, 2.0);
  const Eigen::Vector2d u = solve_box_qp<2>(h, g, Eigen::Vector2d::Constant(-10), Eigen::Vector2d::Constant(10));
  EXPECT_NEAR(u(0), 0.5, 1e-15);
  EXPECT_NEAR(u(1), -0.5, 1e-15);
}

// x_{k+1} = x_k + dt (u_k - sin x_k): a scalar nonlinear system.
struct ScalarModel {
  static constexpr int kStateDim = 1;
  static constexpr int kControlDim = 1;
  double dt = 0.5;

  template <typename Scalar>
  Eigen::Matrix<Scalar, 1, 1> step(const Eigen::Matrix<Scalar, 1, 1>& x, const Eigen::Matrix<Scalar, 1, 1>& u) const {
    using std::sin;
    Eigen::Matrix<Scalar, 1, 1> next;
    next(0) = x(0) + Scalar(dt) * (u(0) - sin(x(0)));
    return next;
  }
};

using ScalarSolver = MultipleShootingSolver<ScalarModel>;

ScalarSolver::Objective scalar_objective(double ref) {
  ScalarSolver::Objective obj;
  obj.stage_weights = {ScalarSolver::State::Constant(0.0), ScalarSolver::State::Constant(1.0)};
  obj.stage_references = {ScalarSolver::State::Constant(0.0), ScalarSolver::State::Constant(0.5 * ref)};
  obj.control_weight = ScalarSolver::Control::Constant(0.1);
  obj.control_reference = ScalarSolver::Control::Zero();
  obj.terminal_weight = ScalarSolver::State::Constant(5.0);
  obj.terminal_reference = ScalarSolver::State::Constant(ref);
  return obj;
}

double scalar_cost(const ScalarModel& model, const ScalarSolver::Objective& obj, double x0, double u0, double u1) {
  using V = Eigen::Matrix<double, 1, 1>;
  const V x1 = model.step<double>(V(x0), V(u0));
  const V x2 = model.step<double>(x1, V(u1));
  double j = 0.0;
  j += obj.stage_weights[0](0) * std::pow(x0 - obj.stage_references[0](0), 2);
  j += obj.stage_weights[1](0) * std::pow(x1(0) - obj.stage_references[1](0), 2);
  j += obj.control_weight(0) * (u0 * u0 + u1 * u1);
  j += obj.terminal_weight(0) * std::pow(x2(0) - obj.terminal_reference(0), 2);
  return j;
}

void expect_matches_grid(double ref, double bound) {
  ScalarSolver solver{ScalarModel{}};
  const auto obj = scalar_objective(ref);
  const ScalarSolver::Control lo = ScalarSolver::Control::Constant(-bound);
  const ScalarSolver::Control hi = ScalarSolver::Control::Constant(bound);
  const double x0 = 0.2;
  const auto result = solver.solve(ScalarSolver::State::Constant(x0), obj, lo, hi,
                                   {ScalarSolver::State::Constant(x0), ScalarSolver::State::Constant(x0),
                                    ScalarSolver::State::Constant(x0)},
                                   {ScalarSolver::Control::Zero(), ScalarSolver::Control::Zero()});
  ASSERT_TRUE(result.converged);

  const double step = 1e-3;
  const int n = static_cast<int>(std::lround(2 * bound / step));
  double best = std::numeric_limits<double>::infinity();
  double bu0 = 0, bu1 = 0;
  for (int i = 0; i <= n; ++i) {
    for (int k = 0; k <= n; ++k) {
      const double u0 = -bound + i * step, u1 = -bound + k * step;
      const double j = scalar_cost(solver.model(), obj, x0, u0, u1);
      if (j < best) {
        best = j;
        bu0 = u0;
        bu1 = u1;
      }
    }
  }
  EXPECT_LE(std::abs(result.controls[0](0) - bu0), step);
  EXPECT_LE(std::abs(result.controls[1](0) - bu1), step);
  EXPECT_LE(result.cost, best + 1e-12);
  EXPECT_NEAR(result.cost, scalar_cost(solver.model(), obj, x0, result.controls[0](0), result.controls[1](0)), 1e-9);
}

TEST(ShootingSolver, TwoStageProblemMatchesGridSearch) { expect_matches_grid(1.0, 2.0); }

TEST(ShootingSolver, TwoStageProblemWithActiveBoundMatchesGridSearch) { expect_matches_grid(3.0, 1.0); }

TEST(ShootingSolver, LinearizationMatchesFiniteDifferences) {
  QuadShootingSolver solver{QuadEulerModel{0.04}};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  QuadVector x;
  x << u(rng), u(rng), 2 + u(rng), u(rng), u(rng), u(rng), 1, 0.2 * u(rng), 0.2 * u(rng), 0.2 * u(rng);
  x.segment<4>(idx::kQuat).normalize();
  CommandVector c(9.81 + u(rng), u(rng), u(rng), u(rng));
  QuadVector next;
  Eigen::Matrix<double, 10, 10> a;
  Eigen::Matrix<double, 10, 4> b;
  solver.linearize(x, c, next, a, b);
  EXPECT_EQ(next, quad_euler_step(x, c, 0.04));
  const double h = 1e-6;
  for (int i = 0; i < 10; ++i) {
    QuadVector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const QuadVector col = (quad_euler_step(xp, c, 0.04) - quad_euler_step(xm, c, 0.04)) / (2 * h);
    EXPECT_LT((a.col(i) - col).cwiseAbs().maxCoeff(), 1e-7);
  }
  for (int i = 0; i < 4; ++i) {
    CommandVector cp = c, cm = c;
    cp(i) += h;
    cm(i) -= h;
    const QuadVector col = (quad_euler_step(x, cp, 0.04) - quad_euler_step(x, cm, 0.04)) / (2 * h);
    EXPECT_LT((b.col(i) - col).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(ShootingSolver, CostGradientMatchesCentralDifferences) {
  MpcConfig config;
  QuadMpc mpc(config);
  MpcReference ref;
  ref.goal = QuadState::hover_at(Eigen::Vector3d(4, 0, 2));
  ref.gate_trajectory = simulate_pendulum({1.2, 0.0}, PendulumParams{}, config.horizon_steps, config.dt);
  const auto obj = mpc.build_objective({1.25}, ref);
  auto& solver = mpc.solver();

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1, 1);
  const int horizon = config.horizon_steps;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<QuadVector> xs(horizon + 1);
    std::vector<CommandVector> us(horizon);
    for (auto& x : xs) x << 3 * u(rng), u(rng), 2 + u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng);
    for (auto& c : us) c << 9.81 + 3 * u(rng), u(rng), u(rng), u(rng);
    const Eigen::VectorXd g = solver.cost_gradient(obj, xs, us);
    const double h = 1e-6;
    for (int k = 0; k < horizon; ++k) {
      for (int i = 0; i < 14; ++i) {
        auto xp = xs, xm = xs;
        auto up = us, um = us;
        if (i < 10) {
          xp[k + 1](i) += h;
          xm[k + 1](i) -= h;
        } else {
          up[k](i - 10) += h;
          um[k](i - 10) -= h;
        }
        const double fd = (solver.cost(obj, xp, up) - solver.cost(obj, xm, um)) / (2 * h);
        const double an = g(k * 14 + i);
        EXPECT_LE(std::abs(an - fd), 1e-4 * std::max(1.0, std::abs(fd))) << "stage " << k << " entry " << i;
      }
    }
  }
}

TEST(ShootingSolver, MeritNeverIncreasesOnAcceptedIterations) {
  MpcConfig config;
  for (TrackingMode mode : {TrackingMode::kTimeVarying, TrackingMode::kConstant}) {
    config.tracking = mode;
    QuadMpc mpc(config);
    MpcReference ref;
    ref.goal = QuadState::hover_at(Eigen::Vector3d(4, 0, 2));
    ref.gate_trajectory =
        simulate_pendulum({1.5707963267948966, 0.0}, PendulumParams{}, config.horizon_steps, config.dt);
    const auto sol = mpc.solve(QuadState::hover_at(Eigen::Vector3d(-1, 0, 2)), {1.25}, ref);
    ASSERT_FALSE(sol.merit_history.empty());
    for (const auto& [before, after] : sol.merit_history) EXPECT_LE(after, before);
  }
}

TEST(ShootingSolver, RejectsInconsistentHorizons) {
  ScalarSolver solver{ScalarModel{}};
  auto obj = scalar_objective(1.0);
  EXPECT_THROW(solver.solve(ScalarSolver::State::Zero(), obj, ScalarSolver::Control::Constant(-1),
                            ScalarSolver::Control::Constant(1), {ScalarSolver::State::Zero()},
                            {ScalarSolver::Control::Zero(), ScalarSolver::Control::Zero()}),
               DimensionError);
}

}  // namespace
}  // namespace highmpc
