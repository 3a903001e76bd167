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

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "highmpc/mlp.hpp"
#include "highmpc/mpc.hpp"
#include "highmpc/policy_search.hpp"

namespace highmpc {

inline constexpr int kObservationDim = kQuadStateDim;
using Observation = QuadVector;

// o = x_q - x_p over all ten components.
Observation make_observation(const QuadState& quad, const GateState& gate);

struct Dataset {
  std::vector<Observation> observations;
  std::vector<double> targets;  // t_tra

  std::size_t size() const { return targets.size(); }
  bool empty() const { return targets.empty(); }
  void add(const Observation& o, double t_tra);
  void append(const Dataset& other);
  bool operator==(const Dataset& other) const;
};

// CSV with header o_0..o_9,t_tra and 17 significant digits per value.
void save_dataset(const Dataset& dataset, std::ostream& out);
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(std::istream& in);
Dataset load_dataset(const std::string& path);

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 500;
  double validation_fraction = 0.1;
  // Halve the learning rate after this many epochs without a new best
  // training loss (0 disables).
  int plateau_patience = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  Mlp model;
  std::vector<double> train_loss;       // per epoch, full training split
  std::vector<double> validation_loss;  // per epoch; empty without a split
  std::vector<double> learning_rate;    // per epoch
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

// Mini-batch SGD with momentum on the mean squared error. Standardization
// statistics come from the training split. `initial` fixes the architecture
// and, when `reinitialize` is false, the starting parameters.
TrainResult train(const Mlp& initial, const Dataset& dataset, const TrainConfig& config, bool reinitialize = true);

// epoch,train_mse,validation_mse,learning_rate
void write_loss_history(std::ostream& out, const TrainResult& result);

// Network output clamped to [0, max_t_tra].
double predict_t_tra(const Mlp& model, const Observation& o, double max_t_tra);

// Swinging-gate task shared by data collection and evaluation.
struct EnvironmentConfig {
  PendulumParams pendulum;
  Eigen::Vector3d goal = Eigen::Vector3d(4.0, 0.0, 2.0);
  Eigen::Vector3d start_min = Eigen::Vector3d(-2.0, -1.0, 1.5);
  Eigen::Vector3d start_max = Eigen::Vector3d(0.0, 1.0, 2.5);
  double theta_max = 1.5707963267948966;  // drop angle drawn from [-theta_max, theta_max]
  double theta_dot_max = 1.0;
  int max_steps = 250;
  double divergence_radius = 20.0;

  void validate() const;
};

struct InitialConditions {
  QuadState quad;
  PendulumState pendulum;
};

InitialConditions sample_initial_conditions(const EnvironmentConfig& env, Rng& rng);

// Ground-truth step of the vehicle and the gate.
void step_environment(QuadState& quad, PendulumState& pendulum, const QuadCommand& command,
                      const PendulumParams& params, double dt);

struct CollectConfig {
  int target_samples = 4000;
  // Policy search run at every control step.
  SearchConfig search{3.0, 20, 10, 5, 1e-3, 0};
  // Search distribution on the first step of an episode.
  double initial_mu = 1.0;
  double initial_sigma = 0.5;
  // Later steps start from N(mu_prev - dt, warm_sigma^2).
  double warm_sigma = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpisodeSamples {
  Dataset data;
  int steps = 0;
  bool crossed = false;
  bool failed = false;
  std::string failure;
};

// One collection episode. Deterministic in (config.seed, episode).
EpisodeSamples collect_episode(const EnvironmentConfig& env, const MpcConfig& mpc, const CollectConfig& config,
                               std::uint64_t episode);

struct CollectResult {
  Dataset data;
  int episodes = 0;  // episodes contributing to `data`
  int failed_episodes = 0;
  std::uint64_t next_episode = 0;  // first episode index not consumed
};

// Runs episodes 0, 1, ... until target_samples records are gathered (the
// last episode is truncated). The result does not depend on `workers`.
// `first_episode` lets a resumed run continue the episode sequence.
CollectResult collect(const EnvironmentConfig& env, const MpcConfig& mpc, const CollectConfig& config, int workers = 1,
                      std::uint64_t first_episode = 0,
                      const std::function<void(const CollectResult&)>& progress = nullptr);

}  // namespace highmpc
