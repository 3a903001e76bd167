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


#include "highmpc/config.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "highmpc/errors.hpp"
#include "json.hpp"

namespace highmpc {

using Json = nlohmann::ordered_json;

namespace {

class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(label() + " must be an object");
  }

  // Rejects keys that were never looked up.
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ValidationError("unknown key '" + join(item.key()) + "'");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number()) throw ValidationError("'" + join(key) + "' must be a number");
    out = v.get<double>();
  }

  void get(const std::string& key, int& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) throw ValidationError("'" + join(key) + "' must be an integer");
    out = v.get<int>();
  }

  void get(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number_unsigned()) throw ValidationError("'" + join(key) + "' must be a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_string()) throw ValidationError("'" + join(key) + "' must be a string");
    out = v.get<std::string>();
  }

  template <int N>
  void get(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_array() || v.size() != static_cast<std::size_t>(N)) {
      throw ValidationError("'" + join(key) + "' must be an array of " + std::to_string(N) + " numbers");
    }
    for (int i = 0; i < N; ++i) {
      if (!v[i].is_number()) throw ValidationError("'" + join(key) + "' must hold numbers");
      out(i) = v[i].get<double>();
    }
  }

  std::optional<Section> sub(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return std::optional<Section>(std::in_place, j_.at(key), join(key));
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string label() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <int N>
Json array(const Eigen::Matrix<double, N, 1>& v) {
  Json a = Json::array();
  for (int i = 0; i < N; ++i) a.push_back(v(i));
  return a;
}

}  // namespace

void RunConfig::validate() const {
  if (experiment.empty()) throw ValidationError("experiment must not be empty");
  if (workers < 0) throw ValidationError("workers must be >= 0");
  mpc.validate();
  env.validate();
  if (!scenario.quad_start.allFinite()) throw ValidationError("scenario.quad_start must be finite");
  if (!std::isfinite(scenario.pendulum.theta) || !std::isfinite(scenario.pendulum.theta_dot)) {
    throw ValidationError("scenario pendulum state must be finite");
  }
  search.search.validate();
  if (!(search.initial_sigma > 0.0)) throw ValidationError("search.initial_sigma must be > 0");
  if (!std::isfinite(search.initial_mu)) throw ValidationError("search.initial_mu must be finite");
  collect.validate();
  train.validate();
  if (run.episodes < 0) throw ValidationError("run.episodes must be >= 0");
  if (run.post_crossing_steps < 0) throw ValidationError("run.post_crossing_steps must be >= 0");
  if (!std::isfinite(run.static_t_tra)) throw ValidationError("run.static_t_tra must be finite");
  if (compare.episodes < 0) throw ValidationError("compare.episodes must be >= 0");
  if (compare.post_crossing_steps < 0) throw ValidationError("compare.post_crossing_steps must be >= 0");
  if (!(compare.success_threshold > 0.0)) throw ValidationError("compare.success_threshold must be > 0");
}

void RunConfig::propagate_seed() {
  search.search.seed = seed;
  collect.seed = seed;
  collect.search.seed = seed;
  train.seed = seed;
  compare.seed = seed;
}

RunConfig parse_config(const std::string& json_text) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  {
    Section s(root, "");
    s.get("experiment", c.experiment);
    s.get("output_dir", c.output_dir);
    s.get("seed", c.seed);
    s.get("workers", c.workers);
    if (auto m = s.sub("mpc")) {
      m->get("horizon_steps", c.mpc.horizon_steps);
      m->get("dt", c.mpc.dt);
      m->get("q_goal", c.mpc.q_goal);
      m->get("q_track_max", c.mpc.q_track_max);
      m->get("q_action", c.mpc.q_action);
      m->get("alpha", c.mpc.alpha);
      m->get("thrust_min", c.mpc.thrust_min);
      m->get("thrust_max", c.mpc.thrust_max);
      m->get("omega_max", c.mpc.omega_max);
      m->get("sqp_max_iters", c.mpc.sqp_max_iters);
      m->get("sqp_tol", c.mpc.sqp_tol);
      m->get("levenberg_damping", c.mpc.levenberg_damping);
      std::string tracking = "time_varying";
      m->get("tracking", tracking);
      if (tracking == "time_varying") {
        c.mpc.tracking = TrackingMode::kTimeVarying;
      } else if (tracking == "constant") {
        c.mpc.tracking = TrackingMode::kConstant;
      } else {
        throw ValidationError("mpc.tracking must be 'time_varying' or 'constant'");
      }
      m->finish();
    }
    if (auto p = s.sub("pendulum")) {
      p->get("pivot", c.env.pendulum.pivot);
      p->get("length", c.env.pendulum.length);
      p->get("damping", c.env.pendulum.damping);
      p->get("mass", c.env.pendulum.mass);
      p->finish();
    }
    if (auto p = s.sub("scenario")) {
      p->get("quad_start", c.scenario.quad_start);
      p->get("theta0", c.scenario.pendulum.theta);
      p->get("theta_dot0", c.scenario.pendulum.theta_dot);
      p->get("goal", c.env.goal);
      p->finish();
    }
    if (auto p = s.sub("env")) {
      p->get("start_min", c.env.start_min);
      p->get("start_max", c.env.start_max);
      p->get("theta_max", c.env.theta_max);
      p->get("theta_dot_max", c.env.theta_dot_max);
      p->get("max_steps", c.env.max_steps);
      p->get("divergence_radius", c.env.divergence_radius);
      p->finish();
    }
    if (auto p = s.sub("search")) {
      p->get("beta", c.search.search.beta);
      p->get("num_samples", c.search.search.num_samples);
      p->get("max_iters", c.search.search.max_iters);
      p->get("reward_window", c.search.search.reward_window);
      p->get("convergence_tol", c.search.search.convergence_tol);
      p->get("initial_mu", c.search.initial_mu);
      p->get("initial_sigma", c.search.initial_sigma);
      p->finish();
    }
    if (auto p = s.sub("collect")) {
      p->get("target_samples", c.collect.target_samples);
      p->get("beta", c.collect.search.beta);
      p->get("num_samples", c.collect.search.num_samples);
      p->get("max_iters", c.collect.search.max_iters);
      p->get("reward_window", c.collect.search.reward_window);
      p->get("convergence_tol", c.collect.search.convergence_tol);
      p->get("initial_mu", c.collect.initial_mu);
      p->get("initial_sigma", c.collect.initial_sigma);
      p->get("warm_sigma", c.collect.warm_sigma);
      p->finish();
    }
    if (auto p = s.sub("train")) {
      p->get("learning_rate", c.train.learning_rate);
      p->get("momentum", c.train.momentum);
      p->get("batch_size", c.train.batch_size);
      p->get("epochs", c.train.epochs);
      p->get("validation_fraction", c.train.validation_fraction);
      p->get("plateau_patience", c.train.plateau_patience);
      p->finish();
    }
    if (auto p = s.sub("run")) {
      std::string controller = to_string(c.run.controller);
      p->get("controller", controller);
      c.run.controller = controller_from_string(controller);
      p->get("static_t_tra", c.run.static_t_tra);
      p->get("episodes", c.run.episodes);
      p->get("post_crossing_steps", c.run.post_crossing_steps);
      p->finish();
    }
    if (auto p = s.sub("compare")) {
      p->get("episodes", c.compare.episodes);
      p->get("post_crossing_steps", c.compare.post_crossing_steps);
      p->get("success_threshold", c.compare.success_threshold);
      p->finish();
    }
    s.finish();
  }
  c.compare.env = c.env;
  c.propagate_seed();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string dump_config(const RunConfig& c) {
  Json j;
  j["experiment"] = c.experiment;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["mpc"] = {{"horizon_steps", c.mpc.horizon_steps},
              {"dt", c.mpc.dt},
              {"q_goal", array(c.mpc.q_goal)},
              {"q_track_max", array(c.mpc.q_track_max)},
              {"q_action", array(c.mpc.q_action)},
              {"alpha", c.mpc.alpha},
              {"thrust_min", c.mpc.thrust_min},
              {"thrust_max", c.mpc.thrust_max},
              {"omega_max", array(c.mpc.omega_max)},
              {"sqp_max_iters", c.mpc.sqp_max_iters},
              {"sqp_tol", c.mpc.sqp_tol},
              {"levenberg_damping", c.mpc.levenberg_damping},
              {"tracking", c.mpc.tracking == TrackingMode::kConstant ? "constant" : "time_varying"}};
  j["pendulum"] = {{"pivot", array(c.env.pendulum.pivot)},
                   {"length", c.env.pendulum.length},
                   {"damping", c.env.pendulum.damping},
                   {"mass", c.env.pendulum.mass}};
  j["scenario"] = {{"quad_start", array(c.scenario.quad_start)},
                   {"theta0", c.scenario.pendulum.theta},
                   {"theta_dot0", c.scenario.pendulum.theta_dot},
                   {"goal", array(c.env.goal)}};
  j["env"] = {{"start_min", array(c.env.start_min)},
              {"start_max", array(c.env.start_max)},
              {"theta_max", c.env.theta_max},
              {"theta_dot_max", c.env.theta_dot_max},
              {"max_steps", c.env.max_steps},
              {"divergence_radius", c.env.divergence_radius}};
  j["search"] = {{"beta", c.search.search.beta},
                 {"num_samples", c.search.search.num_samples},
                 {"max_iters", c.search.search.max_iters},
                 {"reward_window", c.search.search.reward_window},
                 {"convergence_tol", c.search.search.convergence_tol},
                 {"initial_mu", c.search.initial_mu},
                 {"initial_sigma", c.search.initial_sigma}};
  j["collect"] = {{"target_samples", c.collect.target_samples},
                  {"beta", c.collect.search.beta},
                  {"num_samples", c.collect.search.num_samples},
                  {"max_iters", c.collect.search.max_iters},
                  {"reward_window", c.collect.search.reward_window},
                  {"convergence_tol", c.collect.search.convergence_tol},
                  {"initial_mu", c.collect.initial_mu},
                  {"initial_sigma", c.collect.initial_sigma},
                  {"warm_sigma", c.collect.warm_sigma}};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"momentum", c.train.momentum},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"validation_fraction", c.train.validation_fraction},
                {"plateau_patience", c.train.plateau_patience}};
  j["run"] = {{"controller", to_string(c.run.controller)},
              {"static_t_tra", c.run.static_t_tra},
              {"episodes", c.run.episodes},
              {"post_crossing_steps", c.run.post_crossing_steps}};
  j["compare"] = {{"episodes", c.compare.episodes},
                  {"post_crossing_steps", c.compare.post_crossing_steps},
                  {"success_threshold", c.compare.success_threshold}};
  return j.dump(2);
}

std::string config_hash(const RunConfig& config) {
  // Ignores workers and output_dir.
  RunConfig canonical = config;
  canonical.workers = 0;
  canonical.output_dir.clear();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : dump_config(canonical)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace highmpc
