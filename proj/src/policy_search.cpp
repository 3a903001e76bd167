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


#include "highmpc/policy_search.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>

#include "highmpc/errors.hpp"
#include "highmpc/parallel.hpp"

namespace highmpc {

GaussianPolicy GaussianPolicy::scalar(double mu, double sigma) {
  GaussianPolicy p;
  p.mean = Eigen::VectorXd::Constant(1, mu);
  p.covariance = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
  return p;
}

double GaussianPolicy::sigma() const { return std::sqrt(covariance(0, 0)); }

void GaussianPolicy::validate() const {
  if (mean.size() < 1) throw ValidationError("policy mean is empty");
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw DimensionError("policy covariance must be " + std::to_string(mean.size()) + "x" +
                         std::to_string(mean.size()));
  }
  if (!mean.allFinite() || !covariance.allFinite()) throw NumericalFailure("policy has non-finite entries");
  if (!covariance.isApprox(covariance.transpose(), 1e-12)) throw ValidationError("policy covariance not symmetric");
}

void SearchConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("search.beta must be > 0");
  if (num_samples < 2) throw ValidationError("search.num_samples must be >= 2");
  if (max_iters < 0) throw ValidationError("search.max_iters must be >= 0");
  if (reward_window < 1) throw ValidationError("search.reward_window must be >= 1");
  if (!(convergence_tol > 0.0)) throw ValidationError("search.convergence_tol must be > 0");
}

namespace {

Eigen::MatrixXd floor_covariance(const Eigen::MatrixXd& sigma) {
  const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
  if (sym.rows() == 1) return Eigen::MatrixXd::Constant(1, 1, std::max(sym(0, 0), kCovarianceFloor));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(kCovarianceFloor);
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

std::vector<Eigen::VectorXd> sample_policy(const GaussianPolicy& policy, int n, Rng& rng) {
  policy.validate();
  if (n < 0) throw ValidationError("sample count must be >= 0");
  Eigen::LLT<Eigen::MatrixXd> llt(floor_covariance(policy.covariance));
  if (llt.info() != Eigen::Success) throw NumericalFailure("policy covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> out(n);
  for (auto& z : out) {
    Eigen::VectorXd e(policy.dim());
    for (int i = 0; i < e.size(); ++i) e(i) = normal(rng);
    z = policy.mean + l * e;
  }
  return out;
}

std::pair<int, int> reward_window_bounds(double t_tra, double dt, int window, int horizon) {
  const int span = std::min(2 * window, horizon + 1);
  const int center = static_cast<int>(std::clamp(t_tra / dt, 0.0, static_cast<double>(horizon)));
  const int first = std::clamp(center - window, 0, horizon + 1 - span);
  return {first, first + span - 1};
}

double trajectory_reward(const MpcSolution& solution, const std::vector<GateState>& gate_trajectory, double t_tra,
                         double dt, int window) {
  const int horizon = solution.horizon();
  if (static_cast<int>(gate_trajectory.size()) != horizon + 1 ||
      static_cast<int>(solution.states.size()) != horizon + 1) {
    throw DimensionError("reward: gate trajectory and plan lengths differ");
  }
  const auto [first, last] = reward_window_bounds(t_tra, dt, window, horizon);
  double r = 0.0;
  for (int j = first; j <= last; ++j) {
    r -= (solution.states[j].segment<3>(idx::kPos) - gate_trajectory[j].position).cwiseAbs().sum();
  }
  return r;
}

Eigen::VectorXd reward_weights(const Eigen::VectorXd& rewards, double beta) {
  if (rewards.size() == 0) return {};
  for (double r : rewards) {
    if (std::isnan(r) || r == std::numeric_limits<double>::infinity()) {
      throw NumericalFailure("reward weights: rewards must be finite or -inf");
    }
  }
  const double best = rewards.maxCoeff();
  if (!std::isfinite(best)) return Eigen::VectorXd::Zero(rewards.size());
  Eigen::VectorXd w(rewards.size());
  for (Eigen::Index i = 0; i < rewards.size(); ++i) {
    w(i) = std::isinf(rewards(i)) ? 0.0 : std::exp(beta * (rewards(i) - best));
  }
  return w;
}

PolicyUpdate update_policy(const GaussianPolicy& policy, const std::vector<Eigen::VectorXd>& samples,
                           const Eigen::VectorXd& weights) {
  policy.validate();
  if (static_cast<int>(samples.size()) != weights.size()) {
    throw DimensionError("update: sample and weight counts differ");
  }
  const double sum = weights.sum();
  if (!(sum > 0.0) || !std::isfinite(sum)) throw NumericalFailure("update: weights must have a positive sum");

  PolicyUpdate out;
  out.policy.mean = Eigen::VectorXd::Zero(policy.dim());
  for (std::size_t i = 0; i < samples.size(); ++i) out.policy.mean += weights(i) * samples[i];
  out.policy.mean /= sum;

  const double y = (sum * sum - weights.squaredNorm()) / sum;
  if (!(y > 1e-12 * sum)) {
    out.policy.covariance = floor_covariance(0.9 * policy.covariance);
    out.degenerate = true;
    return out;
  }
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(policy.dim(), policy.dim());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Eigen::VectorXd e = samples[i] - out.policy.mean;
    s += weights(i) * e * e.transpose();
  }
  out.policy.covariance = floor_covariance(s / y);
  return out;
}

SearchResult search(const GaussianPolicy& initial_policy, const MpcConfig& mpc_config, const SearchProblem& problem,
                    const SearchConfig& config, int workers) {
  initial_policy.validate();
  config.validate();
  if (initial_policy.dim() != 1) throw DimensionError("search: only the scalar traversal time is supported");
  workers = std::clamp(resolve_workers(workers), 1, config.num_samples);

  std::vector<QuadMpc> solvers;
  solvers.reserve(workers);
  for (int w = 0; w < workers; ++w) solvers.emplace_back(mpc_config);

  SearchResult result;
  result.policy = initial_policy;
  const int n = config.num_samples;
  std::optional<MpcSolution> previous_anchor;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    Rng rng = make_rng(config.seed, {static_cast<std::uint64_t>(iter)});
    const auto samples = sample_policy(result.policy, n, rng);

    // Every sample starts from the plan at the current mean, so neighbouring
    // samples tend to settle in the same local optimum.
    MpcSolution anchor;
    bool have_anchor = false;
    try {
      if (previous_anchor) {
        anchor = solvers[0].solve_from_guess(problem.initial, {result.policy.mean(0)}, problem.reference, *previous_anchor);
      } else {
        anchor = solvers[0].solve(problem.initial, {result.policy.mean(0)}, problem.reference, problem.warm_start);
      }
      have_anchor = true;
    } catch (const NumericalFailure&) {
    }

    Eigen::VectorXd rewards(n);
    std::vector<char> failed(n, 0);
    parallel_for(n, workers, [&](int i, int w) {
      try {
        const MpcSolution sol =
            have_anchor ? solvers[w].solve_from_guess(problem.initial, {samples[i](0)}, problem.reference, anchor)
                        : solvers[w].solve(problem.initial, {samples[i](0)}, problem.reference, problem.warm_start);
        rewards(i) = trajectory_reward(sol, problem.reference.gate_trajectory, sol.t_tra, mpc_config.dt,
                                       config.reward_window);
      } catch (const NumericalFailure&) {
        rewards(i) = -std::numeric_limits<double>::infinity();
        failed[i] = 1;
      }
    });

    SearchIteration record;
    record.iteration = iter + 1;
    record.failed_solves = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
    if (record.failed_solves == n) throw NumericalFailure("search: every MPC solve failed");
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!failed[i]) total += rewards(i);
    }
    record.mean_reward = total / (n - record.failed_solves);

    const PolicyUpdate update = update_policy(result.policy, samples, reward_weights(rewards, config.beta));
    const double shift = (update.policy.mean - result.policy.mean).cwiseAbs().maxCoeff();
    record.degenerate = update.degenerate;
    record.policy = update.policy;
    result.policy = update.policy;
    result.history.push_back(record);
    if (have_anchor) previous_anchor = std::move(anchor);
    if (shift < config.convergence_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

void write_search_history(std::ostream& out, const std::vector<SearchIteration>& history) {
  out << "iteration,mean_reward,mu,sigma,failed_solves,degenerate\n";
  out << std::setprecision(17);
  for (const auto& h : history) {
    out << h.iteration << ',' << h.mean_reward << ',' << h.policy.mean(0) << ',' << h.policy.sigma() << ','
        << h.failed_solves << ',' << (h.degenerate ? 1 : 0) << '\n';
  }
}

}  // namespace highmpc
