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


#include "highmpc/deep_policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "highmpc/errors.hpp"
#include "highmpc/parallel.hpp"

namespace highmpc {

Observation make_observation(const QuadState& quad, const GateState& gate) { return quad.vector() - gate.vector(); }

void Dataset::add(const Observation& o, double t_tra) {
  observations.push_back(o);
  targets.push_back(t_tra);
}

void Dataset::append(const Dataset& other) {
  observations.insert(observations.end(), other.observations.begin(), other.observations.end());
  targets.insert(targets.end(), other.targets.begin(), other.targets.end());
}

bool Dataset::operator==(const Dataset& other) const {
  return observations == other.observations && targets == other.targets;
}

namespace {

std::string dataset_header() {
  std::string h;
  for (int i = 0; i < kObservationDim; ++i) h += "o_" + std::to_string(i) + ",";
  return h + "t_tra";
}

}  // namespace

void save_dataset(const Dataset& dataset, std::ostream& out) {
  out << dataset_header() << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (int i = 0; i < kObservationDim; ++i) out << dataset.observations[r](i) << ',';
    out << dataset.targets[r] << '\n';
  }
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_dataset(dataset, out);
  if (!out) throw Error("failed writing '" + path + "'");
}

Dataset load_dataset(std::istream& in) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("dataset is empty, expected a header", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != dataset_header()) throw ParseError("unexpected dataset header", line_no);

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> values;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (field.empty() || used != field.size()) {
        throw ParseError("bad number '" + field + "' in dataset", line_no);
      }
      values.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (values.size() != static_cast<std::size_t>(kObservationDim + 1)) {
      throw ParseError("dataset row has " + std::to_string(values.size()) + " columns, expected " +
                           std::to_string(kObservationDim + 1),
                       line_no);
    }
    data.add(Eigen::Map<const Observation>(values.data()), values.back());
  }
  return data;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  return load_dataset(in);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("train.learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("train.momentum must be in [0, 1)");
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (epochs < 0) throw ValidationError("train.epochs must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ValidationError("train.validation_fraction must be in [0, 1)");
  }
  if (plateau_patience < 0) throw ValidationError("train.plateau_patience must be >= 0");
}

namespace {

void gather(const Dataset& data, const std::vector<std::size_t>& index, std::size_t begin, std::size_t end,
            Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
  x.resize(kObservationDim, static_cast<Eigen::Index>(end - begin));
  y.resize(1, static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) {
    x.col(static_cast<Eigen::Index>(i - begin)) = data.observations[index[i]];
    y(0, static_cast<Eigen::Index>(i - begin)) = data.targets[index[i]];
  }
}

}  // namespace

TrainResult train(const Mlp& initial, const Dataset& dataset, const TrainConfig& config, bool reinitialize) {
  config.validate();
  if (dataset.empty()) throw ValidationError("cannot train on an empty dataset");
  if (initial.input_dim() != kObservationDim || initial.output_dim() != 1) {
    throw DimensionError("the policy network must map 10 inputs to 1 output");
  }
  Rng rng = make_rng(config.seed);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(config.validation_fraction * static_cast<double>(dataset.size()));
  if (n_val >= dataset.size()) n_val = dataset.size() - 1;
  std::vector<std::size_t> val_index(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_index(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  Eigen::MatrixXd x_train, y_train, x_val, y_val;
  gather(dataset, train_index, 0, train_index.size(), x_train, y_train);
  gather(dataset, val_index, 0, val_index.size(), x_val, y_val);

  TrainResult result;
  result.train_size = train_index.size();
  result.validation_size = val_index.size();
  result.model = initial;
  const Eigen::VectorXd mean = x_train.rowwise().mean();
  Eigen::VectorXd std =
      ((x_train.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(x_train.cols())).sqrt();
  for (Eigen::Index i = 0; i < std.size(); ++i) {
    if (!(std(i) > 1e-8)) std(i) = 1.0;
  }
  result.model.set_normalization(mean, std);
  if (reinitialize) result.model.initialize(rng);

  Eigen::VectorXd theta = result.model.parameters();
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd grad;
  Eigen::MatrixXd xb, yb;
  double lr = config.learning_rate;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(train_index.begin(), train_index.end(), rng);
    for (std::size_t b = 0; b < train_index.size(); b += batch) {
      gather(dataset, train_index, b, std::min(b + batch, train_index.size()), xb, yb);
      result.model.loss(xb, yb, &grad);
      velocity = config.momentum * velocity - lr * grad;
      theta += velocity;
      result.model.set_parameters(theta);
    }
    const double train_mse = result.model.loss(x_train, y_train);
    const double val_mse = n_val > 0 ? result.model.loss(x_val, y_val) : 0.0;
    if (!std::isfinite(train_mse) || !std::isfinite(val_mse)) {
      std::ostringstream msg;
      msg << "training diverged at epoch " << epoch + 1 << " (learning rate " << lr << ", train MSE " << train_mse
          << ", parameter norm " << theta.norm() << ")";
      throw NumericalFailure(msg.str());
    }
    result.train_loss.push_back(train_mse);
    if (n_val > 0) result.validation_loss.push_back(val_mse);
    result.learning_rate.push_back(lr);

    if (train_mse < best * (1.0 - 1e-4)) {
      best = train_mse;
      since_best = 0;
    } else if (config.plateau_patience > 0 && ++since_best >= config.plateau_patience) {
      lr *= 0.5;
      since_best = 0;
    }
  }
  return result;
}

void write_loss_history(std::ostream& out, const TrainResult& result) {
  out << "epoch,train_mse,validation_mse,learning_rate\n" << std::setprecision(17);
  for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
    out << e + 1 << ',' << result.train_loss[e] << ',';
    if (e < result.validation_loss.size()) out << result.validation_loss[e];
    out << ',' << result.learning_rate[e] << '\n';
  }
}

double predict_t_tra(const Mlp& model, const Observation& o, double max_t_tra) {
  const double raw = model.forward(o)(0);
  if (!std::isfinite(raw)) throw NumericalFailure("policy network produced a non-finite output");
  return std::clamp(raw, 0.0, max_t_tra);
}

void EnvironmentConfig::validate() const {
  pendulum.validate();
  if (!goal.allFinite()) throw ValidationError("env.goal must be finite");
  if (!start_min.allFinite() || !start_max.allFinite() || (start_min.array() > start_max.array()).any()) {
    throw ValidationError("env.start_min must not exceed env.start_max");
  }
  if (!(theta_max >= 0.0)) throw ValidationError("env.theta_max must be >= 0");
  if (!(theta_dot_max >= 0.0)) throw ValidationError("env.theta_dot_max must be >= 0");
  if (max_steps < 1) throw ValidationError("env.max_steps must be >= 1");
  if (!(divergence_radius > 0.0)) throw ValidationError("env.divergence_radius must be > 0");
}

InitialConditions sample_initial_conditions(const EnvironmentConfig& env, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::Vector3d p;
  for (int i = 0; i < 3; ++i) p(i) = env.start_min(i) + (env.start_max(i) - env.start_min(i)) * unit(rng);
  InitialConditions ic;
  ic.quad = QuadState::hover_at(p);
  ic.pendulum.theta = env.theta_max * (2.0 * unit(rng) - 1.0);
  ic.pendulum.theta_dot = env.theta_dot_max * (2.0 * unit(rng) - 1.0);
  return ic;
}

void step_environment(QuadState& quad, PendulumState& pendulum, const QuadCommand& command,
                      const PendulumParams& params, double dt) {
  quad = integrate_rk4(quad, command, dt);
  pendulum = integrate_rk4(pendulum, params, dt);
}

void CollectConfig::validate() const {
  if (target_samples < 0) throw ValidationError("collect.target_samples must be >= 0");
  search.validate();
  if (!(initial_sigma > 0.0)) throw ValidationError("collect.initial_sigma must be > 0");
  if (!(warm_sigma > 0.0)) throw ValidationError("collect.warm_sigma must be > 0");
  if (!std::isfinite(initial_mu)) throw ValidationError("collect.initial_mu must be finite");
}

EpisodeSamples collect_episode(const EnvironmentConfig& env, const MpcConfig& mpc, const CollectConfig& config,
                               std::uint64_t episode) {
  Rng rng = make_rng(config.seed, {episode});
  const InitialConditions ic = sample_initial_conditions(env, rng);
  QuadMpc solver(mpc);
  QuadState quad = ic.quad;
  PendulumState pendulum = ic.pendulum;
  const double max_t = 2.0 * mpc.horizon_time();

  EpisodeSamples out;
  GaussianPolicy policy = GaussianPolicy::scalar(config.initial_mu, config.initial_sigma);
  MpcSolution previous;
  bool have_previous = false;
  MpcReference reference;
  reference.goal = QuadState::hover_at(env.goal);
  try {
    for (int step = 0; step < env.max_steps; ++step) {
      reference.gate_trajectory = simulate_pendulum(pendulum, env.pendulum, mpc.horizon_steps, mpc.dt);
      SearchConfig search_config = config.search;
      search_config.seed = rng();
      const SearchProblem problem{quad, reference, have_previous ? &previous : nullptr};
      const SearchResult found = search(policy, mpc, problem, search_config, 1);
      const double t_tra = std::clamp(found.policy.mean(0), 0.0, max_t);
      out.data.add(make_observation(quad, reference.gate_trajectory[0]), t_tra);

      MpcSolution solution = solver.solve(quad, {t_tra}, reference, have_previous ? &previous : nullptr);
      step_environment(quad, pendulum, first_command(solution, mpc), env.pendulum, mpc.dt);
      previous = std::move(solution);
      have_previous = true;
      policy = GaussianPolicy::scalar(t_tra - mpc.dt, config.warm_sigma);
      ++out.steps;

      if (!quad.vector().allFinite() || quad.position.norm() > env.divergence_radius) {
        throw NumericalFailure("vehicle diverged at step " + std::to_string(step));
      }
      if (quad.position.x() >= env.pendulum.pivot.x()) {
        out.crossed = true;
        break;
      }
    }
  } catch (const NumericalFailure& e) {
    out.failed = true;
    out.failure = e.what();
    out.data = Dataset{};
  }
  return out;
}

CollectResult collect(const EnvironmentConfig& env, const MpcConfig& mpc, const CollectConfig& config, int workers,
                      std::uint64_t first_episode, const std::function<void(const CollectResult&)>& progress) {
  env.validate();
  mpc.validate();
  config.validate();
  workers = resolve_workers(workers);

  CollectResult result;
  result.next_episode = first_episode;
  std::uint64_t next = first_episode;
  int consecutive_failures = 0;
  const std::size_t target = static_cast<std::size_t>(config.target_samples);
  while (result.data.size() < target) {
    std::vector<EpisodeSamples> batch(static_cast<std::size_t>(workers));
    parallel_for(workers, workers, [&](int i, int) {
      batch[static_cast<std::size_t>(i)] = collect_episode(env, mpc, config, next + static_cast<std::uint64_t>(i));
    });
    for (int i = 0; i < workers && result.data.size() < target; ++i) {
      const EpisodeSamples& ep = batch[static_cast<std::size_t>(i)];
      const std::uint64_t id = next + static_cast<std::uint64_t>(i);
      result.next_episode = id + 1;
      if (ep.failed) {
        std::clog << "collect: episode " << id << " skipped: " << ep.failure << '\n';
        ++result.failed_episodes;
        if (++consecutive_failures >= 50) throw NumericalFailure("collect: 50 consecutive episodes failed");
        continue;
      }
      consecutive_failures = 0;
      Dataset d = ep.data;
      const std::size_t room = target - result.data.size();
      if (d.size() > room) {
        d.observations.resize(room);
        d.targets.resize(room);
      }
      result.data.append(d);
      ++result.episodes;
    }
    next += static_cast<std::uint64_t>(workers);
    if (progress) progress(result);
  }
  return result;
}

}  // namespace highmpc
