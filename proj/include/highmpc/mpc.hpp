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

#include <optional>
#include <optional>
#include <vector>

#include "highmpc/dynamics.hpp"
#include "highmpc/shooting_solver.hpp"

namespace highmpc {

enum class TrackingMode {
  // Q_tr(t_tra, h) = Q_tr,max * exp(-alpha (h dt - t_tra)^2).
  kTimeVarying,
  // Q_tr = Q_tr,max at every stage (the standard-MPC baseline).
  kConstant,
};

struct MpcConfig {
  int horizon_steps = 50;
  double dt = 0.04;
  QuadVector q_goal = default_goal_weights();
  QuadVector q_track_max = default_tracking_weights();
  CommandVector q_action = CommandVector::Constant(0.1);
  double alpha = 10.0;
  double thrust_min = 2.0;
  double thrust_max = 20.0;
  Eigen::Vector3d omega_max = Eigen::Vector3d::Constant(3.0);
  int sqp_max_iters = 50;
  double sqp_tol = 1e-6;
  double levenberg_damping = 1e-6;
  TrackingMode tracking = TrackingMode::kTimeVarying;

  double horizon_time() const { return horizon_steps * dt; }
  CommandVector command_lower() const;
  CommandVector command_upper() const;
  void validate() const;

  static QuadVector default_goal_weights();
  static QuadVector default_tracking_weights();
};

// Command that holds the vehicle in hover: [g, 0, 0, 0].
inline CommandVector hover_command() { return CommandVector(kGravity, 0.0, 0.0, 0.0); }

struct DecisionVariables {
  double t_tra = 0.0;  // traversal time, seconds from now
};

struct MpcReference {
  QuadState goal;                       // r_g, hover pose after the gate
  std::vector<GateState> gate_trajectory;  // H + 1 samples, the reference p
};

struct MpcSolution {
  std::vector<QuadVector> states;       // H + 1
  std::vector<CommandVector> commands;  // H
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  double solve_time = 0.0;  // seconds, wall clock
  double max_defect = 0.0;
  double t_tra = 0.0;  // traversal time actually used (after clamping)
  bool t_tra_clamped = false;
  std::vector<std::pair<double, double>> merit_history;

  int horizon() const { return static_cast<int>(commands.size()); }
  QuadState state(int k) const { return QuadState::from_vector(states.at(k)); }
  QuadCommand command(int k) const { return QuadCommand::from_vector(commands.at(k)); }
};

// Diagonal of the tracking weight at stage h.
QuadVector tracking_weight(int h, double t_tra, const MpcConfig& config);

// Cost contribution of stage h: tracking plus action terms for h < H, the goal
// term at h = H (command ignored there).
double stage_cost(const QuadState& state, const QuadCommand& command, int h, const MpcReference& reference,
                  const DecisionVariables& z, const MpcConfig& config);

// Discrete model used inside the MPC: one Euler step with attitude
// renormalization.
struct QuadEulerModel {
  static constexpr int kStateDim = kQuadStateDim;
  static constexpr int kControlDim = kQuadCommandDim;
  double dt = 0.04;

  template <typename Scalar>
  Eigen::Matrix<Scalar, kStateDim, 1> step(const Eigen::Matrix<Scalar, kStateDim, 1>& x,
                                           const Eigen::Matrix<Scalar, kControlDim, 1>& u) const {
    return quad_euler_step(x, u, dt);
  }
};

using QuadShootingSolver = MultipleShootingSolver<QuadEulerModel>;

// Low-level MPC for the swinging-gate task. Owns its solver workspace; use one
// instance per thread.
class QuadMpc {
 public:
  explicit QuadMpc(MpcConfig config);

  const MpcConfig& config() const { return config_; }

  // Solves from `initial`. A warm start, if given, is shifted forward by one
  // stage; otherwise states are interpolated from `initial` to the goal and
  // commands start at hover.
  MpcSolution solve(const QuadState& initial, const DecisionVariables& z, const MpcReference& reference,
                    const MpcSolution* warm_start = nullptr);

  // Same problem, but `guess` is used unshifted as the starting iterate.
  MpcSolution solve_from_guess(const QuadState& initial, const DecisionVariables& z,
                               const MpcReference& reference, const MpcSolution& guess);

  QuadShootingSolver::Objective build_objective(const DecisionVariables& z, const MpcReference& reference,
                                                double* t_tra_used = nullptr, bool* clamped = nullptr) const;

  QuadShootingSolver& solver() { return solver_; }

 private:
  MpcSolution run(const QuadState& initial, const DecisionVariables& z, const MpcReference& reference,
                  std::vector<QuadVector> xs, std::vector<CommandVector> us);

  MpcConfig config_;
  QuadShootingSolver solver_;
};

// The command to apply now: commands[0], clamped to the box.
QuadCommand first_command(const MpcSolution& solution, const MpcConfig& config);

// y-z distance between the plan and the reference gate where the planned
// position first reaches x = plane_x (linear interpolation between stages).
// Empty when the plan never gets there.
std::optional<double> planned_traversal_error(const MpcSolution& solution, const MpcReference& reference,
                                              double plane_x);

}  // namespace highmpc
