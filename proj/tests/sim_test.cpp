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
#include <numbers>
#include <sstream>

#include "highmpc/errors.hpp"
#include "highmpc/sim.hpp"

namespace highmpc {
namespace {

StepRecord record(double t, double x, double y, double z, double gy, double gz, double solve_ms = 0.0) {
  StepRecord r;
  r.time = t;
  r.quad = QuadState::hover_at(Eigen::Vector3d(x, y, z)).vector();
  GateState g;
  g.position = {2.0, gy, gz};
  r.gate = g.vector();
  r.command = hover_command();
  r.solve_ms = solve_ms;
  return r;
}

TEST(TraversalMetrics, ExactHitHasZeroError) {
  EpisodeLog log;
  log.steps = {record(0.0, 1.0, 0.0, 2.0, 0.0, 2.0, 4.0), record(0.1, 3.0, 0.0, 2.0, 0.0, 2.0, 2.0),
               record(0.2, 4.0, 0.0, 2.0, 0.0, 2.0)};
  const auto m = traversal_metrics(log, 2.0);
  ASSERT_TRUE(m.crossing_time && m.error);
  EXPECT_DOUBLE_EQ(*m.crossing_time, 0.05);
  EXPECT_EQ(*m.error, 0.0);
  EXPECT_TRUE(m.success);
  EXPECT_EQ(m.rms_y, 0.0);
  EXPECT_DOUBLE_EQ(m.mean_solve_time, 3e-3);
  EXPECT_DOUBLE_EQ(m.max_solve_time, 4e-3);
}

TEST(TraversalMetrics, InterpolatesAtThePlane) {
  EpisodeLog log;
  // Plane reached a quarter of the way: quad (y, z) = (0.1, 2.0), gate (0.5, 2.25).
  log.steps = {record(0.0, 1.5, 0.0, 2.0, 0.4, 2.0), record(0.04, 3.5, 0.4, 2.0, 0.8, 3.0),
               record(0.08, 4.0, -0.3, 2.0, 0.8, 3.0)};
  const auto m = traversal_metrics(log, 2.0, 0.0, 0.3);
  EXPECT_NEAR(*m.crossing_time, 0.01, 1e-15);
  EXPECT_NEAR(*m.error, std::hypot(0.4, 0.25), 1e-14);
  EXPECT_FALSE(m.success);
  EXPECT_NEAR(m.rms_y, std::sqrt((0.16 + 0.09) / 3.0), 1e-15);
  EXPECT_DOUBLE_EQ(m.max_abs_y_after, 0.4);
  EXPECT_TRUE(traversal_metrics(log, 2.0, 0.0, 0.5).success);
}

TEST(TraversalMetrics, NoCrossing) {
  EpisodeLog log;
  log.steps = {record(0.0, 0.0, 1.0, 2.0, 0.0, 2.0), record(0.04, 0.5, -1.0, 2.0, 0.0, 2.0)};
  const auto m = traversal_metrics(log, 2.0, 0.5);
  EXPECT_FALSE(m.crossing_time.has_value());
  EXPECT_FALSE(m.error.has_value());
  EXPECT_FALSE(m.success);
  EXPECT_NEAR(m.rms_y, std::sqrt((0.25 + 2.25) / 2), 1e-15);
  EXPECT_THROW(traversal_metrics(EpisodeLog{}, 2.0), ValidationError);
}

TEST(ControllerKind, StringRoundTrip) {
  for (auto k : {ControllerKind::kHighMpc, ControllerKind::kStaticTtra, ControllerKind::kStandardMpc}) {
    EXPECT_EQ(controller_from_string(to_string(k)), k);
  }
  EXPECT_THROW(controller_from_string("pid"), ValidationError);
}

TEST(RunEpisode, HoldsHoverWithoutTracking) {
  MpcConfig mpc;
  mpc.q_track_max.setZero();
  EpisodeConfig ec;
  ec.controller = ControllerKind::kStaticTtra;
  ec.initial_quad = QuadState::hover_at(Eigen::Vector3d(-1, 0, 2));
  ec.goal = ec.initial_quad;
  ec.max_steps = 100;
  const auto log = run_episode(ec, mpc);
  EXPECT_EQ(log.status, EpisodeStatus::kTimeout);
  ASSERT_EQ(log.steps.size(), 101u);
  for (const auto& r : log.steps) EXPECT_LT((r.quad.head<3>() - ec.goal.position).norm(), 0.01);
}

EpisodeConfig swing_episode(ControllerKind kind, double theta0) {
  EpisodeConfig ec;
  ec.controller = kind;
  ec.initial_pendulum = {theta0, 0.0};
  return ec;
}

TEST(RunEpisode, StaticTraversalTimeCrossesTheSwingScenario) {
  MpcConfig mpc;
  for (double theta0 : {std::numbers::pi / 2, -std::numbers::pi / 2}) {
    const auto log = run_episode(swing_episode(ControllerKind::kStaticTtra, theta0), mpc);
    EXPECT_EQ(log.status, EpisodeStatus::kCrossed);
    const auto m = traversal_metrics(log, 2.0);
    ASSERT_TRUE(m.error.has_value());
    EXPECT_LE(*m.error, 0.3);
    EXPECT_LE(m.mean_solve_time, 0.1);
    for (std::size_t k = 0; k + 1 < log.steps.size(); ++k) {
      const auto& u = log.steps[k].command;
      EXPECT_GE(u(0), mpc.thrust_min - 1e-8);
      EXPECT_LE(u(0), mpc.thrust_max + 1e-8);
      EXPECT_LE(u.tail<3>().cwiseAbs().maxCoeff(), 3.0 + 1e-8);
    }
  }
}

TEST(RunEpisode, StopsAfterThePostCrossingWindow) {
  MpcConfig mpc;
  auto ec = swing_episode(ControllerKind::kStandardMpc, 1.0);
  ec.post_crossing_steps = 5;
  const auto log = run_episode(ec, mpc);
  ASSERT_EQ(log.status, EpisodeStatus::kCrossed);
  int after = 0;
  for (const auto& r : log.steps) after += r.quad(0) >= 2.0 ? 1 : 0;
  EXPECT_EQ(after, 6);
  EXPECT_TRUE(std::isnan(log.steps.front().t_tra));
}

TEST(RunEpisode, IsDeterministicApartFromTiming) {
  MpcConfig mpc;
  const auto ec = swing_episode(ControllerKind::kStaticTtra, 1.2);
  const auto a = run_episode(ec, mpc);
  const auto b = run_episode(ec, mpc);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    EXPECT_EQ(a.steps[k].quad, b.steps[k].quad);
    EXPECT_EQ(a.steps[k].command, b.steps[k].command);
  }
}

TEST(RunEpisode, RejectsInvalidSetups) {
  MpcConfig mpc;
  EXPECT_THROW(run_episode(swing_episode(ControllerKind::kHighMpc, 1.0), mpc), ValidationError);
  auto ec = swing_episode(ControllerKind::kStandardMpc, 1.0);
  ec.dt = 0.02;
  EXPECT_THROW(run_episode(ec, mpc), ValidationError);
  ec = swing_episode(ControllerKind::kStandardMpc, 1.0);
  ec.max_steps = 0;
  EXPECT_THROW(run_episode(ec, mpc), ValidationError);
}

TEST(RunEpisode, HighMpcUsesTheNetworkPrediction) {
  MpcConfig mpc;
  Mlp net;
  for (int l = 0; l < net.num_layers(); ++l) {
    net.weight(l).setZero();
    net.bias(l).setZero();
  }
  net.bias(2)(0) = 0.9;
  auto ec = swing_episode(ControllerKind::kHighMpc, 1.0);
  ec.max_steps = 3;
  const auto log = run_episode(ec, mpc, &net);
  for (std::size_t k = 0; k + 1 < log.steps.size(); ++k) EXPECT_DOUBLE_EQ(log.steps[k].t_tra, 0.9);
  std::ostringstream csv;
  write_episode_csv(csv, log);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
            "t,px,py,pz,vx,vy,vz,qw,qx,qy,qz,gpx,gpy,gpz,gvx,gvy,gvz,gqw,gqx,gqy,gqz,c,wx,wy,wz,t_tra,solve_ms");
}

TEST(CompareControllers, ZeroEpisodes) {
  CompareConfig config;
  config.episodes = 0;
  const auto report = compare_controllers(config, MpcConfig{}, Mlp{});
  EXPECT_TRUE(report.rows.empty());
  EXPECT_EQ(report.high_mpc.episodes, 0);
  EXPECT_FALSE(report.high_mpc.mean_error.has_value());
  std::ostringstream csv, json;
  write_comparison_csv(csv, report);
  write_comparison_json(json, report);
  EXPECT_EQ(csv.str(),
            "episode,controller,px0,py0,pz0,theta0,theta_dot0,status,success,crossing_time,error,rms_y,"
            "max_abs_y_after\n");
  EXPECT_NE(json.str().find("\"episodes\": 0"), std::string::npos);
}

TEST(CompareControllers, DoesNotDependOnWorkerCount) {
  CompareConfig config;
  config.episodes = 2;
  config.env.max_steps = 20;
  Mlp net;
  Rng rng = make_rng(1, {});
  net.initialize(rng);
  const auto a = compare_controllers(config, MpcConfig{}, net, 1);
  const auto b = compare_controllers(config, MpcConfig{}, net, 2);
  std::ostringstream ca, cb;
  write_comparison_csv(ca, a);
  write_comparison_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(a.rows.size(), 4u);
}

}  // namespace
}  // namespace highmpc
