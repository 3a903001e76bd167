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

// Multiple-shooting transcription of a box-constrained optimal control problem
// with diagonal quadratic costs, solved by a damped Gauss-Newton SQP.
//
// Decision unknowns are every state x_1..x_H and every command u_0..u_{H-1};
// x_0 is pinned to the measured state. Each SQP iteration linearizes the
// discrete dynamics x_{k+1} = F(x_k, u_k) at the current iterate (Jacobians by
// forward-mode AutoDiff), solves the resulting LQ subproblem with a Riccati
// recursion whose per-stage command QPs honor the box, and globalizes with a
// backtracking line search on the l1 merit J + rho * sum_k |d_k|_1 where
// d_k = F(x_k, u_k) - x_{k+1} are the shooting defects. Trial points come from
// a nonlinear rollout under the Riccati feedback that keeps (1 - alpha) of
// every defect, so a full step closes all defects.
//
// Model requirements:
//   static constexpr int kStateDim, kControlDim;
//   template <typename Scalar>
//   Eigen::Matrix<Scalar, kStateDim, 1> step(const Eigen::Matrix<Scalar, kStateDim, 1>&,
//                                            const Eigen::Matrix<Scalar, kControlDim, 1>&) const;

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "highmpc/errors.hpp"

namespace highmpc {

// Minimizes 0.5 u'Hu + g'u subject to lower <= u <= upper by a primal active
// set method. H must be symmetric positive definite. `free` receives the
// inactive set at the solution.
template <int N>
Eigen::Matrix<double, N, 1> solve_box_qp(const Eigen::Matrix<double, N, N>& hessian,
                                         const Eigen::Matrix<double, N, 1>& gradient,
                                         const Eigen::Matrix<double, N, 1>& lower,
                                         const Eigen::Matrix<double, N, 1>& upper,
                                         Eigen::Matrix<bool, N, 1>* free = nullptr) {
  using Vec = Eigen::Matrix<double, N, 1>;
  const int n = static_cast<int>(gradient.size());
  Eigen::Matrix<bool, N, 1> is_free;
  is_free.setConstant(n, true);
  Vec u = Vec::Zero(n).cwiseMax(lower).cwiseMin(upper);

  for (int pass = 0; pass < 4 * n + 4; ++pass) {
    // Solve for the free components with the clamped ones held at their bounds.
    std::vector<int> f;
    for (int i = 0; i < n; ++i) {
      if (is_free(i)) f.push_back(i);
    }
    Vec candidate = u;
    if (!f.empty()) {
      const int m = static_cast<int>(f.size());
      Eigen::MatrixXd hff(m, m);
      Eigen::VectorXd rhs(m);
      for (int a = 0; a < m; ++a) {
        rhs(a) = -gradient(f[a]);
        for (int j = 0; j < n; ++j) {
          if (!is_free(j)) rhs(a) -= hessian(f[a], j) * u(j);
        }
        for (int b = 0; b < m; ++b) hff(a, b) = hessian(f[a], f[b]);
      }
      const Eigen::VectorXd sol = hff.llt().solve(rhs);
      for (int a = 0; a < m; ++a) candidate(f[a]) = sol(a);
    }

    // Primal feasibility: clamp the most violated free component.
    int worst = -1;
    double worst_violation = 0.0;
    for (int i : f) {
      const double v = std::max(lower(i) - candidate(i), candidate(i) - upper(i));
      if (v > worst_violation) {
        worst_violation = v;
        worst = i;
      }
    }
    if (worst >= 0) {
      // Step from u toward the candidate until the first bound is hit.
      double t = 1.0;
      for (int i : f) {
        const double d = candidate(i) - u(i);
        if (d > 0.0 && candidate(i) > upper(i)) t = std::min(t, (upper(i) - u(i)) / d);
        if (d < 0.0 && candidate(i) < lower(i)) t = std::min(t, (lower(i) - u(i)) / d);
      }
      t = std::clamp(t, 0.0, 1.0);
      for (int i : f) u(i) = u(i) + t * (candidate(i) - u(i));
      for (int i : f) {
        if (u(i) <= lower(i) + 1e-14 * (1.0 + std::abs(lower(i)))) {
          u(i) = lower(i);
          is_free(i) = false;
        } else if (u(i) >= upper(i) - 1e-14 * (1.0 + std::abs(upper(i)))) {
          u(i) = upper(i);
          is_free(i) = false;
        }
      }
      if (is_free(worst)) {
        u(worst) = std::clamp(candidate(worst), lower(worst), upper(worst));
        is_free(worst) = false;
      }
      continue;
    }
    u = candidate;

    // Dual feasibility: release the clamped component with the wrong-signed
    // multiplier, if any.
    const Vec g = hessian * u + gradient;
    int release = -1;
    double release_score = 1e-12;
    for (int i = 0; i < n; ++i) {
      if (is_free(i)) continue;
      const bool at_lower = u(i) <= lower(i);
      const double score = at_lower ? -g(i) : g(i);
      if (score > release_score) {
        release_score = score;
        release = i;
      }
    }
    if (release < 0) break;
    is_free(release) = true;
  }
  if (free != nullptr) *free = is_free;
  return u;
}

template <typename Model>
class MultipleShootingSolver {
 public:
  static constexpr int kNx = Model::kStateDim;
  static constexpr int kNu = Model::kControlDim;
  using State = Eigen::Matrix<double, kNx, 1>;
  using Control = Eigen::Matrix<double, kNu, 1>;
  using StateMatrix = Eigen::Matrix<double, kNx, kNx>;
  using InputMatrix = Eigen::Matrix<double, kNx, kNu>;
  using GainMatrix = Eigen::Matrix<double, kNu, kNx>;
  using ControlMatrix = Eigen::Matrix<double, kNu, kNu>;

  // J = sum_{k<H} (x_k - r_k)' W_k (x_k - r_k) + (u_k - u_r)' R (u_k - u_r)
  //     + (x_H - r_H)' W_H (x_H - r_H), all weights diagonal.
  struct Objective {
    std::vector<State> stage_weights;     // H entries
    std::vector<State> stage_references;  // H entries
    Control control_weight = Control::Zero();
    Control control_reference = Control::Zero();
    State terminal_weight = State::Zero();
    State terminal_reference = State::Zero();
  };

  struct Options {
    int max_iterations = 50;
    // Converged when the accepted step's infinity norm, or the relative merit
    // decrease, falls below this while defects are below defect_tolerance.
    double tolerance = 1e-6;
    double defect_tolerance = 1e-9;
    double levenberg_damping = 1e-6;
    double initial_damping = 1.0;
    double max_damping = 1e8;
    double initial_penalty = 1.0;
  };

  struct Result {
    std::vector<State> states;
    std::vector<Control> controls;
    double cost = 0.0;
    double max_defect = 0.0;
    int iterations = 0;
    bool converged = false;
    // Merit at the start and at the accepted point of every accepted
    // iteration, both measured with that iteration's penalty.
    std::vector<std::pair<double, double>> merit_history;
  };

  MultipleShootingSolver() = default;
  explicit MultipleShootingSolver(Model model) : model_(std::move(model)) {}
  MultipleShootingSolver(Model model, const Options& options) : model_(std::move(model)), options_(options) {}

  const Model& model() const { return model_; }
  Model& model() { return model_; }
  const Options& options() const { return options_; }
  void set_options(const Options& options) { options_ = options; }

  double cost(const Objective& objective, const std::vector<State>& xs,
              const std::vector<Control>& us) const {
    const int horizon = static_cast<int>(us.size());
    double j = 0.0;
    for (int k = 0; k < horizon; ++k) {
      const State dx = xs[k] - objective.stage_references[k];
      const Control du = us[k] - objective.control_reference;
      j += dx.dot(objective.stage_weights[k].cwiseProduct(dx));
      j += du.dot(objective.control_weight.cwiseProduct(du));
    }
    const State dg = xs[horizon] - objective.terminal_reference;
    j += dg.dot(objective.terminal_weight.cwiseProduct(dg));
    return j;
  }

  // Gradient of the cost w.r.t. the free unknowns, stacked per stage as
  // (x_1, u_0), (x_2, u_1), ..., (x_H, u_{H-1}); x_0 is pinned.
  Eigen::VectorXd cost_gradient(const Objective& objective, const std::vector<State>& xs,
                                const std::vector<Control>& us) const {
    const int horizon = static_cast<int>(us.size());
    Eigen::VectorXd g(horizon * (kNx + kNu));
    for (int k = 0; k < horizon; ++k) {
      const int x_index = k + 1;
      const State w = x_index == horizon ? objective.terminal_weight : objective.stage_weights[x_index];
      const State r =
          x_index == horizon ? objective.terminal_reference : objective.stage_references[x_index];
      g.segment<kNx>(k * (kNx + kNu)) = 2.0 * w.cwiseProduct(xs[x_index] - r);
      g.segment<kNu>(k * (kNx + kNu) + kNx) =
          2.0 * objective.control_weight.cwiseProduct(us[k] - objective.control_reference);
    }
    return g;
  }

  double max_defect(const std::vector<State>& xs, const std::vector<Control>& us) const {
    double m = 0.0;
    for (std::size_t k = 0; k < us.size(); ++k) {
      m = std::max(m, (model_.template step<double>(xs[k], us[k]) - xs[k + 1]).cwiseAbs().maxCoeff());
    }
    return m;
  }

  // Linearization of the discrete dynamics at (x, u).
  void linearize(const State& x, const Control& u, State& next, StateMatrix& a, InputMatrix& b) const {
    using Derivatives = Eigen::Matrix<double, kNx + kNu, 1>;
    using AD = Eigen::AutoDiffScalar<Derivatives>;
    Eigen::Matrix<AD, kNx, 1> xa;
    Eigen::Matrix<AD, kNu, 1> ua;
    for (int i = 0; i < kNx; ++i) xa(i) = AD(x(i), kNx + kNu, i);
    for (int i = 0; i < kNu; ++i) ua(i) = AD(u(i), kNx + kNu, kNx + i);
    const Eigen::Matrix<AD, kNx, 1> out = model_.template step<AD>(xa, ua);
    for (int i = 0; i < kNx; ++i) {
      next(i) = out(i).value();
      a.row(i) = out(i).derivatives().template head<kNx>().transpose();
      b.row(i) = out(i).derivatives().template tail<kNu>().transpose();
    }
  }

  Result solve(const State& x0, const Objective& objective, const Control& lower, const Control& upper,
               std::vector<State> xs, std::vector<Control> us) {
    const int horizon = static_cast<int>(us.size());
    if (horizon < 1 || static_cast<int>(xs.size()) != horizon + 1 ||
        static_cast<int>(objective.stage_weights.size()) != horizon ||
        static_cast<int>(objective.stage_references.size()) != horizon) {
      throw DimensionError("shooting solver: inconsistent horizon lengths");
    }
    if (!x0.allFinite()) throw NumericalFailure("shooting solver: non-finite initial state");
    resize(horizon);

    xs[0] = x0;
    for (auto& u : us) u = u.cwiseMax(lower).cwiseMin(upper);

    Result result;
    double damping = std::max(options_.levenberg_damping, options_.initial_damping);

    for (int iter = 0; iter < options_.max_iterations; ++iter) {
      double defect_l1 = 0.0;
      double defect_inf = 0.0;
      for (int k = 0; k < horizon; ++k) {
        State next;
        linearize(xs[k], us[k], next, a_[k], b_[k]);
        d_[k] = next - xs[k + 1];
        defect_l1 += d_[k].template lpNorm<1>();
        defect_inf = std::max(defect_inf, d_[k].cwiseAbs().maxCoeff());
      }
      const double j0 = cost(objective, xs, us);
      if (!std::isfinite(j0) || !std::isfinite(defect_l1)) {
        throw NumericalFailure("shooting solver: non-finite cost or defect at iteration " +
                               std::to_string(iter));
      }

      bool accepted = false;
      while (!accepted) {
        if (!backward_pass(objective, xs, us, lower, upper, damping)) {
          damping *= 10.0;
          if (damping > options_.max_damping) break;
          continue;
        }
        forward_pass(horizon);

        // The exact l1 penalty must dominate the multipliers of the linearized
        // defect constraints.
        double multiplier_inf = 0.0;
        for (int k = 0; k < horizon; ++k) {
          qp_multipliers_[k] = p_mat_[k + 1] * dx_[k + 1] + p_vec_[k + 1];
          multiplier_inf = std::max(multiplier_inf, qp_multipliers_[k].cwiseAbs().maxCoeff());
        }
        const double penalty = std::max(options_.initial_penalty, 1.1 * multiplier_inf + 1e-3);

        const Eigen::VectorXd grad = cost_gradient(objective, xs, us);
        double slope = -penalty * defect_l1;
        double step_inf = 0.0;
        for (int k = 0; k < horizon; ++k) {
          slope += grad.template segment<kNx>(k * (kNx + kNu)).dot(dx_[k + 1]);
          slope += grad.template segment<kNu>(k * (kNx + kNu) + kNx).dot(du_[k]);
          step_inf = std::max({step_inf, dx_[k + 1].cwiseAbs().maxCoeff(), du_[k].cwiseAbs().maxCoeff()});
        }
        const double merit0 = j0 + penalty * defect_l1;

        if (step_inf < options_.tolerance && defect_inf <= options_.defect_tolerance) {
          result.converged = true;
          break;
        }

        double alpha = 1.0;
        for (int ls = 0; ls < 20; ++ls, alpha *= 0.5) {
          // Nonlinear rollout with the feedback gains; a fraction (1 - alpha)
          // of every defect is kept.
          trial_x_[0] = xs[0];
          double trial_defect_l1 = 0.0;
          double trial_defect_inf = 0.0;
          for (int k = 0; k < horizon; ++k) {
            trial_u_[k] = (us[k] + alpha * kff_[k] + k_[k] * (trial_x_[k] - xs[k])).cwiseMax(lower).cwiseMin(upper);
            const State d = (1.0 - alpha) * d_[k];
            trial_x_[k + 1] = model_.template step<double>(trial_x_[k], trial_u_[k]) - d;
            trial_defect_l1 += d.template lpNorm<1>();
            trial_defect_inf = std::max(trial_defect_inf, d.cwiseAbs().maxCoeff());
          }
          const double j1 = cost(objective, trial_x_, trial_u_);
          const double merit1 = j1 + penalty * trial_defect_l1;
          if (!std::isfinite(merit1)) continue;
          const bool sufficient = slope < 0.0 ? merit1 <= merit0 + 1e-4 * alpha * slope : merit1 < merit0;
          if (!sufficient) continue;

          accepted = true;
          std::swap(xs, trial_x_);
          std::swap(us, trial_u_);
          result.merit_history.emplace_back(merit0, merit1);
          result.iterations = iter + 1;
          if (alpha == 1.0) {
            damping = std::max(options_.levenberg_damping, damping * 0.3);
          } else if (alpha < 0.5) {
            damping *= 5.0;
          }
          const bool small_step = alpha * step_inf < options_.tolerance;
          const bool small_decrease = merit0 - merit1 < options_.tolerance * std::max(1.0, std::abs(merit0));
          if (trial_defect_inf <= options_.defect_tolerance && (small_step || small_decrease)) {
            result.converged = true;
          }
          break;
        }
        if (!accepted) {
          damping *= 10.0;
          if (damping > options_.max_damping) break;
        }
      }
      if (result.converged || !accepted) break;
    }

    result.cost = cost(objective, xs, us);
    result.max_defect = max_defect(xs, us);
    result.states = std::move(xs);
    result.controls = std::move(us);
    return result;
  }

 private:
  void resize(int horizon) {
    a_.resize(horizon);
    b_.resize(horizon);
    d_.resize(horizon);
    qp_multipliers_.resize(horizon);
    k_.resize(horizon);
    kff_.resize(horizon);
    p_mat_.resize(horizon + 1);
    p_vec_.resize(horizon + 1);
    dx_.resize(horizon + 1);
    du_.resize(horizon);
    lo_.resize(horizon);
    hi_.resize(horizon);
    trial_x_.resize(horizon + 1);
    trial_u_.resize(horizon);
  }

  // Riccati recursion for the LQ subproblem in (dx, du) with affine defects.
  // Returns false when a stage Hessian is not positive definite.
  bool backward_pass(const Objective& objective, const std::vector<State>& xs, const std::vector<Control>& us,
                     const Control& lower, const Control& upper, double damping) {
    const int horizon = static_cast<int>(us.size());
    const State wg = objective.terminal_weight;
    p_mat_[horizon] = (2.0 * wg).asDiagonal();
    p_mat_[horizon].diagonal().array() += damping;
    p_vec_[horizon] = 2.0 * wg.cwiseProduct(xs[horizon] - objective.terminal_reference);

    for (int k = horizon - 1; k >= 0; --k) {
      const StateMatrix& a = a_[k];
      const InputMatrix& b = b_[k];
      const StateMatrix& p = p_mat_[k + 1];
      const State pd = p * d_[k] + p_vec_[k + 1];

      const Eigen::Matrix<double, kNu, kNx> bt_p = b.transpose() * p;
      ControlMatrix quu = bt_p * b;
      quu.diagonal() += 2.0 * objective.control_weight;
      quu.diagonal().array() += damping;
      const GainMatrix qux = bt_p * a;
      const Control qu = 2.0 * objective.control_weight.cwiseProduct(us[k] - objective.control_reference) +
                         b.transpose() * pd;
      StateMatrix qxx = a.transpose() * p * a;
      qxx.diagonal() += 2.0 * objective.stage_weights[k];
      qxx.diagonal().array() += damping;
      const State qx = 2.0 * objective.stage_weights[k].cwiseProduct(xs[k] - objective.stage_references[k]) +
                       a.transpose() * pd;

      Eigen::LLT<ControlMatrix> llt(quu);
      if (llt.info() != Eigen::Success) return false;

      lo_[k] = lower - us[k];
      hi_[k] = upper - us[k];
      Eigen::Matrix<bool, kNu, 1> free;
      const Control ff = solve_box_qp<kNu>(quu, qu, lo_[k], hi_[k], &free);
      kff_[k] = ff;
      k_[k].setZero();
      if (free.all()) {
        k_[k] = -llt.solve(qux);
      } else if (free.any()) {
        std::vector<int> f;
        for (int i = 0; i < kNu; ++i) {
          if (free(i)) f.push_back(i);
        }
        const int m = static_cast<int>(f.size());
        Eigen::MatrixXd qff(m, m);
        Eigen::MatrixXd qfx(m, kNx);
        for (int i = 0; i < m; ++i) {
          qfx.row(i) = qux.row(f[i]);
          for (int j = 0; j < m; ++j) qff(i, j) = quu(f[i], f[j]);
        }
        const Eigen::MatrixXd gain = -qff.llt().solve(qfx);
        for (int i = 0; i < m; ++i) k_[k].row(f[i]) = gain.row(i);
      }

      const GainMatrix& gain = k_[k];
      const StateMatrix pk = qxx + gain.transpose() * quu * gain + gain.transpose() * qux + qux.transpose() * gain;
      p_mat_[k] = 0.5 * (pk + pk.transpose());
      p_vec_[k] = qx + gain.transpose() * (quu * ff + qu) + qux.transpose() * ff;
      if (!p_mat_[k].allFinite() || !p_vec_[k].allFinite()) return false;
    }
    return true;
  }

  void forward_pass(int horizon) {
    dx_[0].setZero();
    for (int k = 0; k < horizon; ++k) {
      du_[k] = (k_[k] * dx_[k] + kff_[k]).cwiseMax(lo_[k]).cwiseMin(hi_[k]);
      dx_[k + 1] = a_[k] * dx_[k] + b_[k] * du_[k] + d_[k];
    }
  }

  Model model_;
  Options options_;

  std::vector<StateMatrix> a_;
  std::vector<InputMatrix> b_;
  std::vector<State> d_;
  std::vector<State> qp_multipliers_;
  std::vector<GainMatrix> k_;
  std::vector<Control> kff_;
  std::vector<StateMatrix> p_mat_;
  std::vector<State> p_vec_;
  std::vector<State> dx_;
  std::vector<Control> du_;
  std::vector<Control> lo_;
  std::vector<Control> hi_;
  std::vector<State> trial_x_;
  std::vector<Control> trial_u_;
};

}  // namespace highmpc
