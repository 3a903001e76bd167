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


#include "highmpc/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "json.hpp"

#include "highmpc/errors.hpp"
#include "highmpc/parallel.hpp"

namespace highmpc {

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kHighMpc:
      return "high_mpc";
    case ControllerKind::kStaticTtra:
      return "static_t_tra";
    case ControllerKind::kStandardMpc:
      return "standard_mpc";
  }
  return "unknown";
}

ControllerKind controller_from_string(const std::string& name) {
  if (name == "high_mpc") return ControllerKind::kHighMpc;
  if (name == "static_t_tra") return ControllerKind::kStaticTtra;
  if (name == "standard_mpc") return ControllerKind::kStandardMpc;
  throw ValidationError("unknown controller '" + name + "' (expected high_mpc, static_t_tra or standard_mpc)");
}

std::string to_string(EpisodeStatus status) {
  switch (status) {
    case EpisodeStatus::kCrossed:
      return "crossed";
    case EpisodeStatus::kTimeout:
      return "timeout";
    case EpisodeStatus::kDiverged:
      return "diverged";
  }
  return "unknown";
}

void EpisodeConfig::validate() const {
  pendulum.validate();
  if (!initial_quad.vector().allFinite()) throw ValidationError("episode initial state must be finite");
  if (!std::isfinite(initial_pendulum.theta) || !std::isfinite(initial_pendulum.theta_dot)) {
    throw ValidationError("episode initial pendulum state must be finite");
  }
  if (max_steps < 1) throw ValidationError("episode max_steps must be >= 1");
  if (!(dt > 0.0)) throw ValidationError("episode dt must be > 0");
  if (post_crossing_steps < 0) throw ValidationError("episode post_crossing_steps must be >= 0");
  if (!(divergence_radius > 0.0)) throw ValidationError("episode divergence_radius must be > 0");
  if (!std::isfinite(static_t_tra)) throw ValidationError("episode static_t_tra must be finite");
}

EpisodeLog run_episode(const EpisodeConfig& config, const MpcConfig& mpc, const Mlp* model) {
  config.validate();
  if (config.controller == ControllerKind::kHighMpc && model == nullptr) {
    throw ValidationError("the high_mpc controller needs a trained model");
  }
  if (config.dt != mpc.dt) throw ValidationError("episode dt must equal the MPC dt");
  MpcConfig planner_config = mpc;
  planner_config.tracking =
      config.controller == ControllerKind::kStandardMpc ? TrackingMode::kConstant : TrackingMode::kTimeVarying;
  QuadMpc planner(planner_config);
  const double max_t = 2.0 * planner_config.horizon_time();
  const double plane = config.pendulum.pivot.x();

  EpisodeLog log;
  QuadState quad = config.initial_quad;
  PendulumState pendulum = config.initial_pendulum;
  MpcReference reference;
  reference.goal = config.goal;
  MpcSolution previous;
  bool have_previous = false;
  int crossed_step = -1;
  bool diverged = false;

  for (int step = 0; step < config.max_steps; ++step) {
    const double time = step * config.dt;
    reference.gate_trajectory = simulate_pendulum(pendulum, config.pendulum, planner_config.horizon_steps, config.dt);
    const GateState& gate = reference.gate_trajectory.front();

    StepRecord record;
    record.time = time;
    record.quad = quad.vector();
    record.gate = gate.vector();
    double t_tra = max_t;
    switch (config.controller) {
      case ControllerKind::kHighMpc:
        if (crossed_step < 0) t_tra = predict_t_tra(*model, make_observation(quad, gate), max_t);
        break;
      case ControllerKind::kStaticTtra:
        if (crossed_step < 0) t_tra = std::clamp(config.static_t_tra - time, 0.0, max_t);
        break;
      case ControllerKind::kStandardMpc:
        t_tra = 0.0;
        break;
    }
    record.t_tra =
        config.controller == ControllerKind::kStandardMpc ? std::numeric_limits<double>::quiet_NaN() : t_tra;

    try {
      MpcSolution solution = planner.solve(quad, {t_tra}, reference, have_previous ? &previous : nullptr);
      const QuadCommand command = first_command(solution, planner_config);
      record.command = command.vector();
      record.solve_ms = solution.solve_time * 1e3;
      log.steps.push_back(record);
      step_environment(quad, pendulum, command, config.pendulum, config.dt);
      previous = std::move(solution);
      have_previous = true;
    } catch (const NumericalFailure& e) {
      log.failure = e.what();
      diverged = true;
      break;
    }

    if (!quad.vector().allFinite() || quad.position.norm() > config.divergence_radius) {
      log.failure = "vehicle left the arena at t = " + std::to_string(time + config.dt) + " s";
      diverged = true;
      break;
    }
    if (crossed_step < 0 && quad.position.x() >= plane) crossed_step = step + 1;
    if (crossed_step >= 0 && step + 1 - crossed_step >= config.post_crossing_steps) break;
  }

  StepRecord last;
  last.time = static_cast<double>(log.steps.size()) * config.dt;
  last.quad = quad.vector();
  last.gate = pendulum_to_gate(pendulum, config.pendulum).vector();
  last.command.setZero();
  last.t_tra = std::numeric_limits<double>::quiet_NaN();
  if (last.quad.allFinite()) log.steps.push_back(last);

  log.status = diverged ? EpisodeStatus::kDiverged
                        : (crossed_step >= 0 ? EpisodeStatus::kCrossed : EpisodeStatus::kTimeout);
  return log;
}

void write_episode_csv(std::ostream& out, const EpisodeLog& log) {
  static const char* kState[] = {"px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz"};
  out << 't';
  for (const char* s : kState) out << ',' << s;
  for (const char* s : kState) out << ",g" << s;
  out << ",c,wx,wy,wz,t_tra,solve_ms\n" << std::setprecision(17);
  for (const auto& r : log.steps) {
    out << r.time;
    for (int i = 0; i < kQuadStateDim; ++i) out << ',' << r.quad(i);
    for (int i = 0; i < kQuadStateDim; ++i) out << ',' << r.gate(i);
    for (int i = 0; i < kQuadCommandDim; ++i) out << ',' << r.command(i);
    out << ',' << r.t_tra << ',' << r.solve_ms << '\n';
  }
}

TraversalMetrics traversal_metrics(const EpisodeLog& log, double gate_plane_x, double center_y,
                                   double success_threshold) {
  if (log.steps.empty()) throw ValidationError("traversal metrics need a non-empty log");
  TraversalMetrics m;
  const auto& s = log.steps;
  std::size_t after = s.size();
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double a = s[k].quad(idx::kPos) - gate_plane_x;
    const double b = s[k + 1].quad(idx::kPos) - gate_plane_x;
    if (a < 0.0 && b >= 0.0) {
      const double f = -a / (b - a);
      const Eigen::Vector3d q =
          (1.0 - f) * s[k].quad.segment<3>(idx::kPos) + f * s[k + 1].quad.segment<3>(idx::kPos);
      const Eigen::Vector3d g =
          (1.0 - f) * s[k].gate.segment<3>(idx::kPos) + f * s[k + 1].gate.segment<3>(idx::kPos);
      m.crossing_time = (1.0 - f) * s[k].time + f * s[k + 1].time;
      m.error = (q - g).tail<2>().norm();
      m.success = *m.error <= success_threshold;
      after = k + 1;
      break;
    }
  }

  double sum_sq = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double dy = s[k].quad(idx::kPos + 1) - center_y;
    sum_sq += dy * dy;
    if (k >= after) m.max_abs_y_after = std::max(m.max_abs_y_after, std::abs(dy));
  }
  m.rms_y = std::sqrt(sum_sq / static_cast<double>(s.size()));

  // The last record carries no solve.
  const std::size_t solves = s.size() > 1 ? s.size() - 1 : 0;
  double total = 0.0;
  for (std::size_t k = 0; k < solves; ++k) {
    total += s[k].solve_ms * 1e-3;
    m.max_solve_time = std::max(m.max_solve_time, s[k].solve_ms * 1e-3);
  }
  if (solves > 0) m.mean_solve_time = total / static_cast<double>(solves);
  return m;
}

namespace {

ControllerSummary summarize(const std::vector<ComparisonRow>& rows, ControllerKind kind) {
  ControllerSummary s;
  double err = 0.0;
  int crossed = 0;
  for (const auto& r : rows) {
    if (r.controller != kind) continue;
    ++s.episodes;
    s.successes += r.metrics.success ? 1 : 0;
    if (r.metrics.error) {
      err += *r.metrics.error;
      ++crossed;
    }
    s.mean_rms_y += r.metrics.rms_y;
    s.mean_max_abs_y_after += r.metrics.max_abs_y_after;
    s.mean_solve_time += r.metrics.mean_solve_time;
  }
  if (s.episodes > 0) {
    s.success_rate = static_cast<double>(s.successes) / s.episodes;
    s.mean_rms_y /= s.episodes;
    s.mean_max_abs_y_after /= s.episodes;
    s.mean_solve_time /= s.episodes;
  }
  if (crossed > 0) s.mean_error = err / crossed;
  return s;
}

}  // namespace

ComparisonReport compare_controllers(const std::vector<InitialConditions>& initial, const CompareConfig& config,
                                     const MpcConfig& mpc, const Mlp& model, int workers) {
  config.env.validate();
  const int n = static_cast<int>(initial.size());
  ComparisonReport report;
  report.rows.resize(static_cast<std::size_t>(2 * n));
  parallel_for(2 * n, resolve_workers(workers), [&](int job, int) {
    const int episode = job / 2;
    EpisodeConfig ec;
    ec.controller = job % 2 == 0 ? ControllerKind::kHighMpc : ControllerKind::kStandardMpc;
    ec.initial_quad = initial[episode].quad;
    ec.initial_pendulum = initial[episode].pendulum;
    ec.pendulum = config.env.pendulum;
    ec.goal = QuadState::hover_at(config.env.goal);
    ec.max_steps = config.env.max_steps;
    ec.dt = mpc.dt;
    ec.post_crossing_steps = config.post_crossing_steps;
    ec.divergence_radius = config.env.divergence_radius;
    ec.seed = config.seed;
    const EpisodeLog log = run_episode(ec, mpc, &model);

    ComparisonRow& row = report.rows[static_cast<std::size_t>(job)];
    row.episode = static_cast<std::uint64_t>(episode);
    row.controller = ec.controller;
    row.initial = initial[episode];
    row.status = log.status;
    row.metrics = traversal_metrics(log, config.env.pendulum.pivot.x(), config.env.pendulum.pivot.y(),
                                    config.success_threshold);
  });
  report.high_mpc = summarize(report.rows, ControllerKind::kHighMpc);
  report.standard_mpc = summarize(report.rows, ControllerKind::kStandardMpc);
  return report;
}

ComparisonReport compare_controllers(const CompareConfig& config, const MpcConfig& mpc, const Mlp& model,
                                     int workers) {
  if (config.episodes < 0) throw ValidationError("compare.episodes must be >= 0");
  std::vector<InitialConditions> initial;
  for (int i = 0; i < config.episodes; ++i) {
    Rng rng = make_rng(config.seed, {static_cast<std::uint64_t>(i)});
    initial.push_back(sample_initial_conditions(config.env, rng));
  }
  return compare_controllers(initial, config, mpc, model, workers);
}

void write_comparison_csv(std::ostream& out, const ComparisonReport& report) {
  out << "episode,controller,px0,py0,pz0,theta0,theta_dot0,status,success,crossing_time,error,rms_y,"
         "max_abs_y_after\n"
      << std::setprecision(17);
  for (const auto& r : report.rows) {
    const auto& p = r.initial.quad.position;
    out << r.episode << ',' << to_string(r.controller) << ',' << p.x() << ',' << p.y() << ',' << p.z() << ','
        << r.initial.pendulum.theta << ',' << r.initial.pendulum.theta_dot << ',' << to_string(r.status) << ','
        << (r.metrics.success ? 1 : 0) << ',';
    if (r.metrics.crossing_time) out << *r.metrics.crossing_time;
    out << ',';
    if (r.metrics.error) out << *r.metrics.error;
    out << ',' << r.metrics.rms_y << ',' << r.metrics.max_abs_y_after << '\n';
  }
}

namespace {

nlohmann::json to_json(const ControllerSummary& s) {
  nlohmann::json j;
  j["episodes"] = s.episodes;
  j["successes"] = s.successes;
  j["success_rate"] = s.success_rate;
  j["mean_error"] = s.mean_error ? nlohmann::json(*s.mean_error) : nlohmann::json(nullptr);
  j["mean_rms_y"] = s.mean_rms_y;
  j["mean_max_abs_y_after"] = s.mean_max_abs_y_after;
  j["mean_solve_time_s"] = s.mean_solve_time;
  return j;
}

}  // namespace

void write_comparison_json(std::ostream& out, const ComparisonReport& report) {
  nlohmann::ordered_json j;
  j["episodes"] = report.high_mpc.episodes;
  j["high_mpc"] = to_json(report.high_mpc);
  j["standard_mpc"] = to_json(report.standard_mpc);
  out << j.dump(2) << '\n';
}

}  // namespace highmpc
