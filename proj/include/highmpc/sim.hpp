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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "highmpc/deep_policy.hpp"
#include "highmpc/mlp.hpp"
#include "highmpc/mpc.hpp"

namespace highmpc {

enum class ControllerKind {
  kHighMpc,      // t_tra predicted by the network at every step
  kStaticTtra,   // fixed traversal instant measured from the episode start
  kStandardMpc,  // constant tracking weights, no t_tra
};

std::string to_string(ControllerKind kind);
ControllerKind controller_from_string(const std::string& name);

struct EpisodeConfig {
  ControllerKind controller = ControllerKind::kHighMpc;
  QuadState initial_quad = QuadState::hover_at({-1.0, 0.0, 2.0});
  PendulumState initial_pendulum{1.5707963267948966, 0.0};
  PendulumParams pendulum;
  QuadState goal = QuadState::hover_at({4.0, 0.0, 2.0});
  int max_steps = 250;
  double dt = 0.04;
  double static_t_tra = 1.25;
  // Steps simulated after the gate plane is crossed.
  int post_crossing_steps = 25;
  double divergence_radius = 20.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepRecord {
  double time = 0.0;
  QuadVector quad;
  QuadVector gate;
  CommandVector command;
  double t_tra = 0.0;  // NaN when the controller does not use it
  double solve_ms = 0.0;
};

enum class EpisodeStatus { kCrossed, kTimeout, kDiverged };

std::string to_string(EpisodeStatus status);

struct EpisodeLog {
  // One record per control step, then a final record of the state reached
  // (command zero, t_tra NaN, solve_ms 0).
  std::vector<StepRecord> steps;
  EpisodeStatus status = EpisodeStatus::kTimeout;
  std::string failure;
};

// Closed-loop episode: plan with the MPC, apply the first command to the RK4
// ground truth, repeat. `model` is required for the high-MPC controller. After
// the gate plane is crossed the high-MPC controller stops querying the
// network and plans with t_tra = 2T.
EpisodeLog run_episode(const EpisodeConfig& config, const MpcConfig& mpc, const Mlp* model = nullptr);

// t,px,py,pz,vx,vy,vz,qw,qx,qy,qz, the same ten for the gate (g...),
// c,wx,wy,wz,t_tra,solve_ms
void write_episode_csv(std::ostream& out, const EpisodeLog& log);

struct TraversalMetrics {
  std::optional<double> crossing_time;
  std::optional<double> error;  // y-z distance at the crossing instant
  bool success = false;
  double max_abs_y_after = 0.0;  // max |y - center_y| after crossing
  double rms_y = 0.0;            // RMS of y - center_y over the episode
  double mean_solve_time = 0.0;  // seconds
  double max_solve_time = 0.0;
};

TraversalMetrics traversal_metrics(const EpisodeLog& log, double gate_plane_x, double center_y = 0.0,
                                   double success_threshold = 0.3);

struct ComparisonRow {
  std::uint64_t episode = 0;
  ControllerKind controller = ControllerKind::kHighMpc;
  InitialConditions initial;
  EpisodeStatus status = EpisodeStatus::kTimeout;
  TraversalMetrics metrics;
};

struct ControllerSummary {
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::optional<double> mean_error;  // over episodes that crossed
  double mean_rms_y = 0.0;
  double mean_max_abs_y_after = 0.0;
  double mean_solve_time = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  ControllerSummary high_mpc;
  ControllerSummary standard_mpc;
};

struct CompareConfig {
  int episodes = 20;
  std::uint64_t seed = 0;
  EnvironmentConfig env;
  int post_crossing_steps = 25;
  double success_threshold = 0.3;
};

// Episode i draws its initial conditions from make_rng(seed, {i}); both
// controllers fly it.
ComparisonReport compare_controllers(const CompareConfig& config, const MpcConfig& mpc, const Mlp& model,
                                     int workers = 1);

// Same, for explicit initial conditions.
ComparisonReport compare_controllers(const std::vector<InitialConditions>& initial, const CompareConfig& config,
                                     const MpcConfig& mpc, const Mlp& model, int workers = 1);

void write_comparison_csv(std::ostream& out, const ComparisonReport& report);
void write_comparison_json(std::ostream& out, const ComparisonReport& report);

}  // namespace highmpc
