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
#include <numbers>

#include "highmpc/errors.hpp"
#include "highmpc/mpc.hpp"

namespace highmpc {
namespace {

MpcReference swing_reference(const MpcConfig& config, double theta0) {
  MpcReference ref;
  ref.goal = QuadState::hover_at(Eigen::Vector3d(4, 0, 2));
  ref.gate_trajectory = simulate_pendulum({theta0, 0.0}, PendulumParams{}, config.horizon_steps, config.dt);
  return ref;
}

const QuadState kStart = QuadState::hover_at(Eigen::Vector3d(-1, 0, 2));

TEST(TrackingWeight, PeaksAtTraversalStage) {
  MpcConfig config;
  const QuadVector w = tracking_weight(25, 1.0, config);
  EXPECT_EQ(w, config.q_track_max);
}

TEST(TrackingWeight, MatchesGaussianProfile) {
  MpcConfig config;
  for (int h = 0; h <= config.horizon_steps; ++h) {
    for (double t : {0.0, 0.37, 1.25, 2.0, 3.9}) {
      const double d = h * 0.04 - t;
      const QuadVector expected = config.q_track_max * std::exp(-10.0 * d * d);
      EXPECT_LT((tracking_weight(h, t, config) - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
  // 0.2 s away: exp(-0.4)
  EXPECT_NEAR(tracking_weight(30, 1.0, config)(1), 100.0 * std::exp(-0.4), 1e-10);
}

TEST(TrackingWeight, ConstantModeIgnoresTraversalTime) {
  MpcConfig config;
  config.tracking = TrackingMode::kConstant;
  for (int h : {0, 10, 50}) EXPECT_EQ(tracking_weight(h, 0.3, config), config.q_track_max);
}

TEST(TrackingWeight, RejectsStageOutsideHorizon) {
  MpcConfig config;
  EXPECT_THROW(tracking_weight(-1, 1.0, config), ValidationError);
  EXPECT_THROW(tracking_weight(51, 1.0, config), ValidationError);
}

TEST(StageCost, MatchesElementwiseSum) {
  MpcConfig config;
  const auto ref = swing_reference(config, 1.0);
  QuadState s;
  s.position = {0.5, -0.3, 2.2};
  s.velocity = {1.0, 0.1, -0.4};
  s.attitude = Eigen::Vector4d(0.9, 0.1, -0.2, 0.3).normalized();
  const QuadCommand c{12.0, {0.5, -1.0, 0.2}};
  const DecisionVariables z{0.8};
  for (int h : {0, 7, 20, 49, 50}) {
    const QuadVector x = s.vector();
    const CommandVector u = c.vector();
    double expected = 0.0;
    if (h == 50) {
      const QuadVector g = ref.goal.vector();
      for (int i = 0; i < 10; ++i) expected += config.q_goal(i) * (x(i) - g(i)) * (x(i) - g(i));
    } else {
      const QuadVector p = ref.gate_trajectory[h].vector();
      const double d = h * config.dt - z.t_tra;
      for (int i = 0; i < 10; ++i) {
        expected += config.q_track_max(i) * std::exp(-config.alpha * d * d) * (x(i) - p(i)) * (x(i) - p(i));
      }
      const CommandVector ur(kGravity, 0, 0, 0);
      for (int i = 0; i < 4; ++i) expected += config.q_action(i) * (u(i) - ur(i)) * (u(i) - ur(i));
    }
    EXPECT_NEAR(stage_cost(s, c, h, ref, z, config), expected, 1e-9 * std::max(1.0, expected)) << "stage " << h;
  }
}

TEST(QuadMpc, SolutionCostIsSumOfStageCosts) {
  MpcConfig config;
  QuadMpc mpc(config);
  const auto ref = swing_reference(config, std::numbers::pi / 2);
  const DecisionVariables z{1.25};
  const auto sol = mpc.solve(kStart, z, ref);
  double total = 0.0;
  for (int h = 0; h <= config.horizon_steps; ++h) {
    total += stage_cost(sol.state(h), h < config.horizon_steps ? sol.command(h) : QuadCommand{}, h, ref, z, config);
  }
  EXPECT_NEAR(sol.cost, total, 1e-9 * total);
}

TEST(QuadMpc, HoverIsAFixedPoint) {
  MpcConfig config;
  config.q_track_max.setZero();
  QuadMpc mpc(config);
  MpcReference ref = swing_reference(config, 1.0);
  ref.goal = kStart;
  const auto sol = mpc.solve(kStart, {1.0}, ref);
  EXPECT_TRUE(sol.converged);
  for (const auto& u : sol.commands) EXPECT_LT((u - hover_command()).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT(sol.cost, 1e-4);
}

TEST(QuadMpc, SwingScenarioPlansThroughTheGate) {
  MpcConfig config;
  QuadMpc mpc(config);
  const auto ref = swing_reference(config, std::numbers::pi / 2);
  const auto sol = mpc.solve(kStart, {1.25}, ref);
  EXPECT_TRUE(sol.converged);
  EXPECT_LT(sol.max_defect, 1e-6);
  const auto error = planned_traversal_error(sol, ref, 2.0);
  ASSERT_TRUE(error.has_value());
  EXPECT_LE(*error, 0.3);

  config.tracking = TrackingMode::kConstant;
  QuadMpc standard(config);
  const auto base = standard.solve(kStart, {1.25}, ref);
  EXPECT_TRUE(base.converged);
  const auto base_error = planned_traversal_error(base, ref, 2.0);
  ASSERT_TRUE(base_error.has_value());
  EXPECT_LE(*base_error, 0.35);
}

TEST(QuadMpc, ConvergesAcrossTraversalTimes) {
  MpcConfig config;
  QuadMpc mpc(config);
  const auto ref = swing_reference(config, -1.2);
  for (double t = 0.0; t <= 4.0; t += 0.25) {
    // A cold start may use up the iteration budget; its iterate stays
    // feasible and a restart from it converges.
    const auto sol = mpc.solve(kStart, {t}, ref);
    EXPECT_LT(sol.max_defect, 1e-6);
    const auto again = mpc.solve_from_guess(kStart, {t}, ref, sol);
    EXPECT_TRUE(again.converged) << "t_tra " << t;
    EXPECT_LE(again.cost, sol.cost + 1e-9);
  }
}

TEST(QuadMpc, CommandsRespectBoundsWhenActive) {
  MpcConfig config;
  config.thrust_max = 11.0;
  config.omega_max = Eigen::Vector3d::Constant(0.5);
  QuadMpc mpc(config);
  const auto ref = swing_reference(config, std::numbers::pi / 2);
  const auto sol = mpc.solve(kStart, {1.25}, ref);
  bool touched = false;
  for (const auto& u : sol.commands) {
    EXPECT_GE(u(0), config.thrust_min - 1e-8);
    EXPECT_LE(u(0), config.thrust_max + 1e-8);
    EXPECT_LE(u.tail<3>().cwiseAbs().maxCoeff(), 0.5 + 1e-8);
    touched = touched || u(0) >= config.thrust_max - 1e-9 || u.tail<3>().cwiseAbs().maxCoeff() >= 0.5 - 1e-9;
  }
  EXPECT_TRUE(touched);
}

TEST(QuadMpc, TraversalTimeIsClampedToTwiceTheHorizon) {
  MpcConfig config;
  QuadMpc mpc(config);
  const auto ref = swing_reference(config, 0.5);
  const auto sol = mpc.solve(kStart, {7.5}, ref);
  EXPECT_TRUE(sol.t_tra_clamped);
  EXPECT_DOUBLE_EQ(sol.t_tra, 4.0);
  const auto neg = mpc.solve(kStart, {-1.0}, ref);
  EXPECT_TRUE(neg.t_tra_clamped);
  EXPECT_DOUBLE_EQ(neg.t_tra, 0.0);
}

TEST(QuadMpc, IsDeterministic) {
  MpcConfig config;
  const auto ref = swing_reference(config, std::numbers::pi / 2);
  QuadMpc a(config), b(config);
  const auto sa = a.solve(kStart, {1.1}, ref);
  const auto sb = b.solve(kStart, {1.1}, ref);
  ASSERT_EQ(sa.commands.size(), sb.commands.size());
  for (std::size_t k = 0; k < sa.commands.size(); ++k) EXPECT_EQ(sa.commands[k], sb.commands[k]);
  const auto wa = a.solve(kStart, {1.1}, ref, &sa);
  const auto wb = b.solve(kStart, {1.1}, ref, &sb);
  for (std::size_t k = 0; k < wa.commands.size(); ++k) EXPECT_EQ(wa.commands[k], wb.commands[k]);
}

TEST(QuadMpc, MeanSolveTimeIsWellUnderBudget) {
  MpcConfig config;
  QuadMpc mpc(config);
  const auto ref = swing_reference(config, std::numbers::pi / 2);
  double total = 0.0;
  MpcSolution warm = mpc.solve(kStart, {1.25}, ref);
  total += warm.solve_time;
  for (int i = 0; i < 9; ++i) {
    warm = mpc.solve(kStart, {1.25 + 0.02 * i}, ref, &warm);
    total += warm.solve_time;
  }
  EXPECT_LE(total / 10.0, 0.1);
}

TEST(QuadMpc, RejectsBadInputs) {
  MpcConfig config;
  QuadMpc mpc(config);
  auto ref = swing_reference(config, 1.0);
  QuadState bad = kStart;
  bad.position.x() = std::nan("");
  EXPECT_THROW(mpc.solve(bad, {1.0}, ref), NumericalFailure);
  EXPECT_THROW(mpc.solve(kStart, {std::nan("")}, ref), NumericalFailure);
  ref.gate_trajectory.pop_back();
  EXPECT_THROW(mpc.solve(kStart, {1.0}, ref), DimensionError);
}

TEST(MpcConfig, ValidationNamesTheField) {
  MpcConfig config;
  config.dt = 0.0;
  try {
    config.validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("mpc.dt"), std::string::npos);
  }
  config = MpcConfig{};
  config.thrust_min = 30.0;
  EXPECT_THROW(QuadMpc{config}, ValidationError);
  config = MpcConfig{};
  config.q_goal(3) = -1.0;
  EXPECT_THROW(config.validate(), ValidationError);
}

TEST(FirstCommand, ReturnsClampedFirstStage) {
  MpcConfig config;
  MpcSolution sol;
  sol.commands = {CommandVector(25.0, -4.0, 0.5, 3.5), hover_command()};
  const QuadCommand c = first_command(sol, config);
  EXPECT_EQ(c.thrust, 20.0);
  EXPECT_EQ(c.body_rates, Eigen::Vector3d(-3.0, 0.5, 3.0));
  sol.commands.clear();
  EXPECT_THROW(first_command(sol, config), ValidationError);
}

TEST(PlannedTraversalError, InterpolatesBetweenStages) {
  MpcSolution sol;
  MpcReference ref;
  QuadVector a = QuadState::hover_at(Eigen::Vector3d(1.0, 0.0, 2.0)).vector();
  QuadVector b = QuadState::hover_at(Eigen::Vector3d(3.0, 0.4, 2.0)).vector();
  sol.states = {a, b};
  GateState g0, g1;
  g0.position = {2.0, 0.0, 2.0};
  g1.position = {2.0, 0.0, 2.6};
  ref.gate_trajectory = {g0, g1};
  // Halfway: quad (0.2, 2.0), gate (0, 2.3).
  EXPECT_NEAR(*planned_traversal_error(sol, ref, 2.0), std::hypot(0.2, 0.3), 1e-15);
  EXPECT_FALSE(planned_traversal_error(sol, ref, 5.0).has_value());
}

}  // namespace
}  // namespace highmpc
