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
#include <iosfwd>
#include <string>
#include <vector>

#include "highmpc/mpc.hpp"
#include "highmpc/random.hpp"

namespace highmpc {

inline constexpr double kCovarianceFloor = 1e-6;

// Search distribution over the MPC decision variables.
struct GaussianPolicy {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  static GaussianPolicy scalar(double mu, double sigma);

  int dim() const { return static_cast<int>(mean.size()); }
  // Standard deviation of the first coordinate.
  double sigma() const;
  void validate() const;
};

struct SearchConfig {
  double beta = 3.0;
  int num_samples = 30;
  int max_iters = 20;
  int reward_window = 5;  // stages on each side of the traversal stage
  double convergence_tol = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

// N i.i.d. draws from N(mu, Sigma) using the Cholesky factor of Sigma.
std::vector<Eigen::VectorXd> sample_policy(const GaussianPolicy& policy, int n, Rng& rng);

// Stages [first, last] scored around the traversal stage j* = int(t_tra / dt):
// nominally [j* - window, j* + window - 1], shifted to stay inside [0, H].
std::pair<int, int> reward_window_bounds(double t_tra, double dt, int window, int horizon);

// Negative sum over the window of per-axis absolute position errors between
// the planned quadrotor states and the gate.
double trajectory_reward(const MpcSolution& solution, const std::vector<GateState>& gate_trajectory, double t_tra,
                         double dt, int window);

// d_i = exp(beta (R_i - max_j R_j)). Entries equal to -inf get weight 0.
Eigen::VectorXd reward_weights(const Eigen::VectorXd& rewards, double beta);

struct PolicyUpdate {
  GaussianPolicy policy;
  // The weights were concentrated on a single sample; the covariance is the
  // previous one scaled by 0.9.
  bool degenerate = false;
};

PolicyUpdate update_policy(const GaussianPolicy& policy, const std::vector<Eigen::VectorXd>& samples,
                           const Eigen::VectorXd& weights);

struct SearchIteration {
  int iteration = 0;
  double mean_reward = 0.0;  // over the samples whose solve succeeded
  int failed_solves = 0;
  bool degenerate = false;
  GaussianPolicy policy;  // after the update
};

struct SearchResult {
  GaussianPolicy policy;
  std::vector<SearchIteration> history;
  bool converged = false;
};

struct SearchProblem {
  QuadState initial;
  MpcReference reference;
  // Every sample's solve starts from this solution, shifted by one stage.
  const MpcSolution* warm_start = nullptr;
};

// Episode-based policy search over t_tra: sample, solve one MPC per sample,
// weight by exponentiated reward, refit. Stops when the mean moves by less
// than convergence_tol or after max_iters updates. Sample solves run on
// `workers` threads, each with its own QuadMpc; results do not depend on the
// worker count.
SearchResult search(const GaussianPolicy& initial_policy, const MpcConfig& mpc_config, const SearchProblem& problem,
                    const SearchConfig& config, int workers = 1);

// iteration,mean_reward,mu,sigma,failed_solves,degenerate
void write_search_history(std::ostream& out, const std::vector<SearchIteration>& history);

}  // namespace highmpc
