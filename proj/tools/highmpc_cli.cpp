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


// highmpc command-line driver.
//
//   highmpc search  [--iters N]
//   highmpc collect [--samples N] [--append]
//   highmpc train   [--dataset PATH]
//   highmpc run     [--model PATH] [--controller NAME] [--episodes N]
//   highmpc compare --model PATH [--episodes N]
//
// Common flags: --config, --out, --seed, --workers.
// Exit status: 0 success, 1 invalid input, 2 runtime failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "highmpc/config.hpp"
#include "highmpc/deep_policy.hpp"
#include "highmpc/errors.hpp"
#include "highmpc/parallel.hpp"
#include "highmpc/policy_search.hpp"
#include "highmpc/sim.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using highmpc::RunConfig;
using Json = nlohmann::ordered_json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

RunConfig load(const CommonOptions& common) {
  RunConfig config = common.config_path.empty() ? RunConfig{} : highmpc::load_config(common.config_path);
  if (common.seed) config.seed = *common.seed;
  config.propagate_seed();
  if (common.workers) config.workers = *common.workers;
  if (!common.out.empty()) config.output_dir = common.out;
  config.compare.env = config.env;
  config.validate();
  return config;
}

fs::path prepare_output(const RunConfig& config) {
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw highmpc::Error("cannot create output directory '" + dir.string() + "'");
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw highmpc::Error("cannot open '" + path.string() + "' for writing");
  return out;
}

void write_json(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw highmpc::Error("failed writing '" + path.string() + "'");
}

// Config hash with the sample target zeroed.
std::string collection_hash(RunConfig config) {
  config.collect.target_samples = 0;
  return highmpc::config_hash(config);
}

Json manifest(const char* command, const RunConfig& config) {
  Json j;
  j["command"] = command;
  j["experiment"] = config.experiment;
  j["seed"] = config.seed;
  j["config_hash"] = highmpc::config_hash(config);
  return j;
}

highmpc::MpcReference scenario_reference(const RunConfig& config) {
  highmpc::MpcReference ref;
  ref.goal = highmpc::QuadState::hover_at(config.env.goal);
  ref.gate_trajectory = highmpc::simulate_pendulum(config.scenario.pendulum, config.env.pendulum,
                                                   config.mpc.horizon_steps, config.mpc.dt);
  return ref;
}

void write_plan_csv(std::ostream& out, const highmpc::MpcSolution& plan, const highmpc::MpcReference& ref,
                    double dt) {
  out << "k,t,px,py,pz,vx,vy,vz,qw,qx,qy,qz,gpx,gpy,gpz,c,wx,wy,wz\n" << std::setprecision(17);
  for (int k = 0; k <= plan.horizon(); ++k) {
    out << k << ',' << k * dt;
    for (int i = 0; i < highmpc::kQuadStateDim; ++i) out << ',' << plan.states[k](i);
    for (int i = 0; i < 3; ++i) out << ',' << ref.gate_trajectory[k].position(i);
    for (int i = 0; i < highmpc::kQuadCommandDim; ++i) {
      out << ',';
      if (k < plan.horizon()) out << plan.commands[k](i);
    }
    out << '\n';
  }
}

int cmd_search(const CommonOptions& common, std::optional<int> iters) {
  RunConfig config = load(common);
  if (iters) {
    if (*iters < 0) throw highmpc::ValidationError("--iters must be >= 0");
    config.search.search.max_iters = *iters;
  }
  const fs::path dir = prepare_output(config);
  highmpc::SearchProblem problem;
  problem.initial = highmpc::QuadState::hover_at(config.scenario.quad_start);
  problem.reference = scenario_reference(config);
  const auto initial = highmpc::GaussianPolicy::scalar(config.search.initial_mu, config.search.initial_sigma);
  const auto result = highmpc::search(initial, config.mpc, problem, config.search.search, config.workers);

  {
    auto out = open_out(dir / "search_history.csv");
    highmpc::write_search_history(out, result.history);
  }
  Json policy;
  policy["mu"] = result.policy.mean(0);
  policy["sigma"] = result.policy.sigma();
  policy["covariance"] = result.policy.covariance(0, 0);
  policy["iterations"] = result.history.size();
  policy["converged"] = result.converged;
  write_json(dir / "policy.json", policy);

  highmpc::QuadMpc mpc(config.mpc);
  const auto plan = mpc.solve(problem.initial, {result.policy.mean(0)}, problem.reference);
  {
    auto out = open_out(dir / "plan.csv");
    write_plan_csv(out, plan, problem.reference, config.mpc.dt);
  }
  Json m = manifest("search", config);
  m["iterations"] = result.history.size();
  m["converged"] = result.converged;
  write_json(dir / "search_manifest.json", m);
  std::cout << std::setprecision(6) << "mu " << result.policy.mean(0) << " sigma " << result.policy.sigma()
            << " after " << result.history.size() << " iterations" << (result.converged ? " (converged)" : "")
            << '\n';
  return 0;
}

int cmd_collect(const CommonOptions& common, std::optional<int> samples, bool append) {
  RunConfig config = load(common);
  if (samples) {
    if (*samples < 0) throw highmpc::ValidationError("--samples must be >= 0");
    config.collect.target_samples = *samples;
  }
  const fs::path dir = prepare_output(config);
  const fs::path dataset_path = dir / "dataset.csv";
  const fs::path manifest_path = dir / "collect_manifest.json";

  highmpc::Dataset data;
  std::uint64_t first_episode = 0;
  int episodes = 0;
  int failed = 0;
  if (append && fs::exists(dataset_path)) {
    std::ifstream in(manifest_path);
    if (!in) throw highmpc::ValidationError("--append needs " + manifest_path.string());
    Json previous;
    try {
      previous = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw highmpc::ValidationError("unreadable manifest: " + std::string(e.what()));
    }
    if (previous.value("collection_hash", "") != collection_hash(config)) {
      throw highmpc::ValidationError("--append: the existing dataset was collected with a different config");
    }
    data = highmpc::load_dataset(dataset_path.string());
    first_episode = previous.at("next_episode").get<std::uint64_t>();
    episodes = previous.at("episodes").get<int>();
    failed = previous.at("failed_episodes").get<int>();
  }

  const auto start = std::chrono::steady_clock::now();
  const auto result = highmpc::collect(config.env, config.mpc, config.collect, config.workers, first_episode,
                                       [&](const highmpc::CollectResult& r) {
                                         std::clog << "collect: " << r.data.size() << " samples from " << r.episodes
                                                   << " episodes\n";
                                       });
  data.append(result.data);
  highmpc::save_dataset(data, dataset_path.string());

  Json m = manifest("collect", config);
  m["collection_hash"] = collection_hash(config);
  m["samples"] = data.size();
  m["episodes"] = episodes + result.episodes;
  m["failed_episodes"] = failed + result.failed_episodes;
  m["next_episode"] = result.next_episode;
  write_json(manifest_path, m);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "collected " << result.data.size() << " samples (" << data.size() << " total) in " << std::fixed
            << std::setprecision(1) << seconds << " s\n";
  return 0;
}

int cmd_train(const CommonOptions& common, std::string dataset_path, std::optional<int> epochs) {
  RunConfig config = load(common);
  if (epochs) {
    if (*epochs < 0) throw highmpc::ValidationError("--epochs must be >= 0");
    config.train.epochs = *epochs;
  }
  const fs::path dir = prepare_output(config);
  if (dataset_path.empty()) dataset_path = (dir / "dataset.csv").string();
  if (!fs::exists(dataset_path)) throw highmpc::ValidationError("dataset '" + dataset_path + "' does not exist");
  const auto data = highmpc::load_dataset(dataset_path);
  const auto result = highmpc::train(highmpc::Mlp(), data, config.train);
  result.model.save((dir / "model.txt").string());
  {
    auto out = open_out(dir / "loss_history.csv");
    highmpc::write_loss_history(out, result);
  }
  Json m = manifest("train", config);
  m["dataset"] = dataset_path;
  m["samples"] = data.size();
  m["train_size"] = result.train_size;
  m["validation_size"] = result.validation_size;
  m["final_train_mse"] = result.train_loss.empty() ? Json(nullptr) : Json(result.train_loss.back());
  m["final_validation_mse"] =
      result.validation_loss.empty() ? Json(nullptr) : Json(result.validation_loss.back());
  write_json(dir / "train_manifest.json", m);
  std::cout << std::setprecision(6);
  if (!result.validation_loss.empty()) {
    std::cout << "final validation MSE " << result.validation_loss.back() << '\n';
  } else if (!result.train_loss.empty()) {
    std::cout << "final training MSE " << result.train_loss.back() << " (no validation split)\n";
  }
  return 0;
}

Json metrics_json(const highmpc::TraversalMetrics& m) {
  Json j;
  j["crossing_time"] = m.crossing_time ? Json(*m.crossing_time) : Json(nullptr);
  j["error"] = m.error ? Json(*m.error) : Json(nullptr);
  j["success"] = m.success;
  j["rms_y"] = m.rms_y;
  j["max_abs_y_after"] = m.max_abs_y_after;
  j["mean_solve_time_s"] = m.mean_solve_time;
  j["max_solve_time_s"] = m.max_solve_time;
  return j;
}

int cmd_run(const CommonOptions& common, const std::string& model_path, std::optional<std::string> controller,
            std::optional<int> episodes) {
  RunConfig config = load(common);
  if (controller) config.run.controller = highmpc::controller_from_string(*controller);
  if (episodes) {
    if (*episodes < 0) throw highmpc::ValidationError("--episodes must be >= 0");
    config.run.episodes = *episodes;
  }
  if (config.run.controller == highmpc::ControllerKind::kHighMpc && model_path.empty()) {
    throw highmpc::ValidationError("the high_mpc controller needs --model");
  }
  std::optional<highmpc::Mlp> model;
  if (!model_path.empty()) model = highmpc::Mlp::load(model_path);
  const fs::path dir = prepare_output(config);

  std::vector<highmpc::InitialConditions> initial;
  if (config.run.episodes == 0) {
    initial.push_back({highmpc::QuadState::hover_at(config.scenario.quad_start), config.scenario.pendulum});
  } else {
    for (int i = 0; i < config.run.episodes; ++i) {
      auto rng = highmpc::make_rng(config.seed, {static_cast<std::uint64_t>(i)});
      initial.push_back(highmpc::sample_initial_conditions(config.env, rng));
    }
  }
  const int n = static_cast<int>(initial.size());
  std::vector<highmpc::EpisodeLog> logs(n);
  highmpc::parallel_for(n, highmpc::resolve_workers(config.workers), [&](int i, int) {
    highmpc::EpisodeConfig ec;
    ec.controller = config.run.controller;
    ec.initial_quad = initial[i].quad;
    ec.initial_pendulum = initial[i].pendulum;
    ec.pendulum = config.env.pendulum;
    ec.goal = highmpc::QuadState::hover_at(config.env.goal);
    ec.max_steps = config.env.max_steps;
    ec.dt = config.mpc.dt;
    ec.static_t_tra = config.run.static_t_tra;
    ec.post_crossing_steps = config.run.post_crossing_steps;
    ec.divergence_radius = config.env.divergence_radius;
    ec.seed = config.seed;
    logs[i] = highmpc::run_episode(ec, config.mpc, model ? &*model : nullptr);
  });

  Json m = manifest("run", config);
  m["controller"] = highmpc::to_string(config.run.controller);
  Json list = Json::array();
  int successes = 0;
  for (int i = 0; i < n; ++i) {
    std::ostringstream name;
    name << "episode_" << std::setw(3) << std::setfill('0') << i << ".csv";
    {
      auto out = open_out(dir / name.str());
      highmpc::write_episode_csv(out, logs[i]);
    }
    const auto metrics = highmpc::traversal_metrics(logs[i], config.env.pendulum.pivot.x(),
                                                    config.env.pendulum.pivot.y(), config.compare.success_threshold);
    successes += metrics.success ? 1 : 0;
    Json e = metrics_json(metrics);
    e["log"] = name.str();
    e["status"] = highmpc::to_string(logs[i].status);
    if (!logs[i].failure.empty()) e["failure"] = logs[i].failure;
    list.push_back(e);
    std::cout << name.str() << ": " << highmpc::to_string(logs[i].status);
    if (metrics.error) std::cout << ", traversal error " << std::setprecision(4) << *metrics.error << " m";
    std::cout << '\n';
  }
  m["episodes"] = list;
  m["successes"] = successes;
  write_json(dir / "metrics.json", m);
  return 0;
}

int cmd_compare(const CommonOptions& common, const std::string& model_path, std::optional<int> episodes) {
  RunConfig config = load(common);
  if (episodes) {
    if (*episodes < 0) throw highmpc::ValidationError("--episodes must be >= 0");
    config.compare.episodes = *episodes;
  }
  if (model_path.empty()) throw highmpc::ValidationError("compare needs --model");
  const auto model = highmpc::Mlp::load(model_path);
  const fs::path dir = prepare_output(config);
  const auto report = highmpc::compare_controllers(config.compare, config.mpc, model, config.workers);
  {
    auto out = open_out(dir / "comparison.csv");
    highmpc::write_comparison_csv(out, report);
  }
  {
    auto out = open_out(dir / "comparison.json");
    highmpc::write_comparison_json(out, report);
  }
  write_json(dir / "compare_manifest.json", manifest("compare", config));
  std::cout << std::setprecision(3) << "high_mpc success " << report.high_mpc.successes << "/"
            << report.high_mpc.episodes << ", standard_mpc success " << report.standard_mpc.successes << "/"
            << report.standard_mpc.episodes << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-level decision variables for a quadrotor MPC passing a swinging gate"};
  app.require_subcommand(1);
  CommonOptions common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory (overrides output_dir)");
    sub->add_option("--seed", common.seed, "seed (overrides seed)");
    sub->add_option("--workers", common.workers, "worker threads, 0 = all cores");
  };

  auto* search = app.add_subcommand("search", "policy search for t_tra on the static scenario");
  add_common(search);
  std::optional<int> iters;
  search->add_option("--iters", iters, "maximum search iterations");

  auto* collect = app.add_subcommand("collect", "collect (observation, t_tra) training data");
  add_common(collect);
  std::optional<int> samples;
  bool append = false;
  collect->add_option("--samples", samples, "number of samples to collect");
  collect->add_flag("--append", append, "continue an existing dataset in the output directory");

  auto* train = app.add_subcommand("train", "train the policy network");
  add_common(train);
  std::string dataset;
  std::optional<int> epochs;
  train->add_option("--dataset", dataset, "dataset CSV (default <out>/dataset.csv)");
  train->add_option("--epochs", epochs, "training epochs");

  auto* run = app.add_subcommand("run", "fly closed-loop episodes");
  add_common(run);
  std::string run_model;
  std::optional<std::string> controller;
  std::optional<int> run_episodes;
  run->add_option("--model", run_model, "trained model file");
  run->add_option("--controller", controller, "high_mpc | static_t_tra | standard_mpc");
  run->add_option("--episodes", run_episodes, "0 = the configured scenario, n = n random episodes");

  auto* compare = app.add_subcommand("compare", "high-MPC against standard MPC on matched episodes");
  add_common(compare);
  std::string compare_model;
  std::optional<int> compare_episodes;
  compare->add_option("--model", compare_model, "trained model file");
  compare->add_option("--episodes", compare_episodes, "number of matched episodes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*search) return cmd_search(common, iters);
    if (*collect) return cmd_collect(common, samples, append);
    if (*train) return cmd_train(common, dataset, epochs);
    if (*run) return cmd_run(common, run_model, controller, run_episodes);
    if (*compare) return cmd_compare(common, compare_model, compare_episodes);
  } catch (const highmpc::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const highmpc::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
