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

#include "highmpc/mpc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <string>

#include "highmpc/errors.hpp"

namespace highmpc {

QuadVector MpcConfig::default_goal_weights() {
  QuadVector q;
  q << 100, 100, 100, 10, 10, 10, 10, 10, 10, 10;
  return q;
}

QuadVector MpcConfig::default_tracking_weights() {
  QuadVector q;
  q << 0, 100, 100, 0, 10, 10, 0, 0, 0, 0;
  return q;
}

CommandVector MpcConfig::command_lower() const {
  CommandVector lo;
  lo << thrust_min, -omega_max;
  return lo;
}

CommandVector MpcConfig::command_upper() const {
  CommandVector hi;
  hi << thrust_max, omega_max;
  return hi;
}

void MpcConfig::validate() const {
  if (horizon_steps < 2) throw ValidationError("mpc.horizon_steps must be >= 2");
  if (!(dt > 0.0)) throw ValidationError("mpc.dt must be > 0");
  if (!(q_goal.array() >= 0.0).all()) throw ValidationError("mpc.q_goal weights must be >= 0");
  if (!(q_track_max.array() >= 0.0).all()) throw ValidationError("mpc.q_track_max weights must be >= 0");
  if (!(q_action.array() >= 0.0).all()) throw ValidationError("mpc.q_action weights must be >= 0");
  if (!(alpha > 0.0)) throw ValidationError("mpc.alpha must be > 0");
  if (!(thrust_min < thrust_max)) throw ValidationError("mpc.thrust_min must be < mpc.thrust_max");
  if (!(omega_max.array() > 0.0).all()) throw ValidationError("mpc.omega_max must be > 0");
  if (sqp_max_iters < 1) throw ValidationError("mpc.sqp_max_iters must be >= 1");
  if (!(sqp_tol > 0.0)) throw ValidationError("mpc.sqp_tol must be > 0");
  if (!(levenberg_damping >= 0.0)) throw ValidationError("mpc.levenberg_damping must be >= 0");
}

QuadVector tracking_weight(int h, double t_tra, const MpcConfig& config) {
  if (h < 0 || h > config.horizon_steps) {
    throw ValidationError("tracking_weight: stage " + std::to_string(h) + " outside [0, H]");
  }
  if (config.tracking == TrackingMode::kConstant) return config.q_track_max;
  const double offset = h * config.dt - t_tra;
  return config.q_track_max * std::exp(-config.alpha * offset * offset);
}

double stage_cost(const QuadState& state, const QuadCommand& command, int h, const MpcReference& reference,
                  const DecisionVariables& z, const MpcConfig& config) {
  const int horizon = config.horizon_steps;
  if (h < 0 || h > horizon) throw ValidationError("stage_cost: stage outside [0, H]");
  if (static_cast<int>(reference.gate_trajectory.size()) != horizon + 1) {
    throw DimensionError("stage_cost: gate trajectory must have H + 1 samples");
  }
  const QuadVector x = state.vector();
  if (h == horizon) {
    const QuadVector dg = x - reference.goal.vector();
    return dg.dot(config.q_goal.cwiseProduct(dg));
  }
  const QuadVector dtr = x - reference.gate_trajectory[h].vector();
  const CommandVector du = command.vector() - hover_command();
  return dtr.dot(tracking_weight(h, z.t_tra, config).cwiseProduct(dtr)) + du.dot(config.q_action.cwiseProduct(du));
}

QuadMpc::QuadMpc(MpcConfig config) : config_(std::move(config)) {
  config_.validate();
  solver_.model().dt = config_.dt;
  QuadShootingSolver::Options options;
  options.max_iterations = config_.sqp_max_iters;
  options.tolerance = config_.sqp_tol;
  options.levenberg_damping = config_.levenberg_damping;
  solver_.set_options(options);
}

QuadShootingSolver::Objective QuadMpc::build_objective(const DecisionVariables& z, const MpcReference& reference,
                                                       double* t_tra_used, bool* clamped) const {
  const int horizon = config_.horizon_steps;
  if (static_cast<int>(reference.gate_trajectory.size()) != horizon + 1) {
    throw DimensionError("MPC reference must hold H + 1 gate samples, got " +
                         std::to_string(reference.gate_trajectory.size()));
  }
  if (!std::isfinite(z.t_tra)) throw NumericalFailure("non-finite traversal time");
  const double t_tra = std::clamp(z.t_tra, 0.0, 2.0 * config_.horizon_time());
  if (t_tra_used != nullptr) *t_tra_used = t_tra;
  if (clamped != nullptr) *clamped = t_tra != z.t_tra;

  QuadShootingSolver::Objective objective;
  objective.stage_weights.resize(horizon);
  objective.stage_references.resize(horizon);
  for (int k = 0; k < horizon; ++k) {
    objective.stage_weights[k] = tracking_weight(k, t_tra, config_);
    objective.stage_references[k] = reference.gate_trajectory[k].vector();
  }
  objective.control_weight = config_.q_action;
  objective.control_reference = hover_command();
  objective.terminal_weight = config_.q_goal;
  objective.terminal_reference = reference.goal.vector();
  return objective;
}

MpcSolution QuadMpc::solve(const QuadState& initial, const DecisionVariables& z, const MpcReference& reference,
                           const MpcSolution* warm_start) {
  const int horizon = config_.horizon_steps;
  std::vector<QuadVector> xs(horizon + 1);
  std::vector<CommandVector> us(horizon);
  const QuadVector x0 = initial.vector();
  if (warm_start != nullptr) {
    if (warm_start->horizon() != horizon || static_cast<int>(warm_start->states.size()) != horizon + 1) {
      throw DimensionError("warm start horizon does not match the MPC horizon");
    }
    for (int k = 0; k < horizon; ++k) {
      xs[k] = warm_start->states[k + 1];
      us[k] = warm_start->commands[std::min(k + 1, horizon - 1)];
    }
    xs[horizon] = warm_start->states[horizon];
  } else {
    const QuadVector goal = reference.goal.vector();
    for (int k = 0; k <= horizon; ++k) {
      const double s = static_cast<double>(k) / horizon;
      xs[k] = (1.0 - s) * x0 + s * goal;
      normalize_attitude(xs[k]);
    }
    for (auto& u : us) u = hover_command();
  }
  return run(initial, z, reference, std::move(xs), std::move(us));
}

MpcSolution QuadMpc::solve_from_guess(const QuadState& initial, const DecisionVariables& z,
                                      const MpcReference& reference, const MpcSolution& guess) {
  const int horizon = config_.horizon_steps;
  if (guess.horizon() != horizon || static_cast<int>(guess.states.size()) != horizon + 1) {
    throw DimensionError("initial guess horizon does not match the MPC horizon");
  }
  return run(initial, z, reference, guess.states, guess.commands);
}

MpcSolution QuadMpc::run(const QuadState& initial, const DecisionVariables& z, const MpcReference& reference,
                         std::vector<QuadVector> xs, std::vector<CommandVector> us) {
  const auto start = std::chrono::steady_clock::now();
  const QuadVector x0 = initial.vector();
  if (!x0.allFinite()) throw NumericalFailure("MPC initial state is not finite");

  MpcSolution solution;
  const auto objective = build_objective(z, reference, &solution.t_tra, &solution.t_tra_clamped);
  static std::atomic<bool> warned{false};
  if (solution.t_tra_clamped && !warned.exchange(true)) {
    std::clog << "warning: traversal time " << z.t_tra << " s clamped to " << solution.t_tra
              << " s (reported once)\n";
  }

  auto result = solver_.solve(x0, objective, config_.command_lower(), config_.command_upper(), std::move(xs),
                              std::move(us));
  solution.states = std::move(result.states);
  solution.commands = std::move(result.controls);
  solution.iterations = result.iterations;
  solution.converged = result.converged;
  solution.merit_history = std::move(result.merit_history);

  // An unconverged iterate may still carry defects; replace its states by the
  // Euler rollout of its commands so the plan is dynamically consistent.
  if (result.max_defect > 1e-8) {
    solution.states[0] = x0;
    for (int k = 0; k < solution.horizon(); ++k) {
      solution.states[k + 1] = quad_euler_step(solution.states[k], solution.commands[k], config_.dt);
    }
    result.max_defect = 0.0;
  }
  for (const auto& x : solution.states) {
    if (!x.allFinite()) throw NumericalFailure("MPC produced a non-finite state trajectory");
  }
  solution.max_defect = solver_.max_defect(solution.states, solution.commands);
  solution.cost = solver_.cost(objective, solution.states, solution.commands);
  solution.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return solution;
}

QuadCommand first_command(const MpcSolution& solution, const MpcConfig& config) {
  if (solution.commands.empty()) throw ValidationError("first_command: empty solution");
  return QuadCommand::from_vector(
      solution.commands.front().cwiseMax(config.command_lower()).cwiseMin(config.command_upper()));
}

std::optional<double> planned_traversal_error(const MpcSolution& solution, const MpcReference& reference,
                                              double plane_x) {
  const std::size_t n = std::min(solution.states.size(), reference.gate_trajectory.size());
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double x0 = solution.states[k](0) - plane_x;
    const double x1 = solution.states[k + 1](0) - plane_x;
    if (x0 < 0.0 && x1 >= 0.0) {
      const double s = -x0 / (x1 - x0);
      const Eigen::Vector2d quad =
          (1.0 - s) * solution.states[k].segment<2>(1) + s * solution.states[k + 1].segment<2>(1);
      const Eigen::Vector2d gate = (1.0 - s) * reference.gate_trajectory[k].position.tail<2>() +
                                   s * reference.gate_trajectory[k + 1].position.tail<2>();
      return (quad - gate).norm();
    }
  }
  return std::nullopt;
}

}  // namespace highmpc
