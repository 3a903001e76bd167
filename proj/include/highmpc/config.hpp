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
#include <string>

#include "highmpc/deep_policy.hpp"
#include "highmpc/mpc.hpp"
#include "highmpc/policy_search.hpp"
#include "highmpc/sim.hpp"

namespace highmpc {

// Single swinging-gate scenario: hover start, gate released from rest.
struct ScenarioConfig {
  Eigen::Vector3d quad_start = Eigen::Vector3d(-1.0, 0.0, 2.0);
  PendulumState pendulum{1.5707963267948966, 0.0};
};

struct StaticSearchConfig {
  SearchConfig search;
  double initial_mu = 1.0;
  double initial_sigma = 0.5;
};

struct RunSection {
  ControllerKind controller = ControllerKind::kStaticTtra;
  double static_t_tra = 1.25;
  // 0 runs the scenario once; n > 0 runs n episodes drawn from the
  // environment ranges.
  int episodes = 0;
  int post_crossing_steps = 25;
};

// Everything one experiment needs. Loaded from a JSON file whose keys mirror
// the fields; unknown keys are rejected.
struct RunConfig {
  std::string experiment = "highmpc";
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = all hardware threads
  MpcConfig mpc;
  ScenarioConfig scenario;
  EnvironmentConfig env;  // holds the pendulum parameters and the goal
  StaticSearchConfig search;
  CollectConfig collect;
  TrainConfig train;
  RunSection run;
  CompareConfig compare;

  void validate() const;
  // Copies the global seed into every section.
  void propagate_seed();
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string dump_config(const RunConfig& config);
// FNV-1a 64 of dump_config, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace highmpc
