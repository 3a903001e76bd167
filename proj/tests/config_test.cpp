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


#include <gtest/gtest.h>

#include <fstream>

#include "highmpc/config.hpp"
#include "highmpc/errors.hpp"

namespace highmpc {
namespace {

std::string error_of(const std::string& json) {
  try {
    parse_config(json);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EmptyObjectGivesDefaults) {
  const RunConfig c = parse_config("{}");
  EXPECT_EQ(c.mpc.horizon_steps, 50);
  EXPECT_EQ(c.search.search.beta, 3.0);
  EXPECT_EQ(c.collect.target_samples, 4000);
  EXPECT_EQ(c.run.controller, ControllerKind::kStaticTtra);
}

TEST(Config, ReadsNestedValues) {
  const RunConfig c = parse_config(R"({
    "seed": 7, "workers": 3,
    "mpc": {"horizon_steps": 40, "tracking": "constant", "omega_max": [1, 2, 3]},
    "pendulum": {"length": 1.5},
    "search": {"beta": 5, "initial_mu": 0.8},
    "run": {"controller": "standard_mpc", "episodes": 4}
  })");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.workers, 3);
  EXPECT_EQ(c.mpc.horizon_steps, 40);
  EXPECT_EQ(c.mpc.tracking, TrackingMode::kConstant);
  EXPECT_EQ(c.mpc.omega_max, Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(c.env.pendulum.length, 1.5);
  EXPECT_EQ(c.search.search.beta, 5.0);
  EXPECT_EQ(c.search.initial_mu, 0.8);
  EXPECT_EQ(c.run.controller, ControllerKind::kStandardMpc);
  EXPECT_EQ(c.run.episodes, 4);
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_NE(error_of(R"({"sed": 1})").find("sed"), std::string::npos);
  EXPECT_NE(error_of(R"({"mpc": {"horizon": 10}})").find("mpc.horizon"), std::string::npos);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(error_of(R"({"search": {"beta": 0}})").find("beta"), std::string::npos);
  EXPECT_NE(error_of(R"({"search": {"beta": -1}})").find("beta"), std::string::npos);
  EXPECT_NE(error_of(R"({"mpc": {"dt": "fast"}})").find("mpc.dt"), std::string::npos);
  EXPECT_NE(error_of(R"({"mpc": {"q_goal": [1, 2]}})").find("mpc.q_goal"), std::string::npos);
  EXPECT_NE(error_of(R"({"train": {"batch_size": 1.5}})").find("train.batch_size"), std::string::npos);
  EXPECT_NE(error_of(R"({"run": {"controller": "pid"}})"), "");
  EXPECT_NE(error_of(R"({"workers": -2})").find("workers"), std::string::npos);
  EXPECT_NE(error_of("{not json"), "");
  EXPECT_NE(error_of("[1, 2]"), "");
}

TEST(Config, DumpRoundTrips) {
  RunConfig c = parse_config(R"({"seed": 11, "mpc": {"alpha": 4.5}, "compare": {"episodes": 7}})");
  const RunConfig back = parse_config(dump_config(c));
  EXPECT_EQ(dump_config(back), dump_config(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, HashIsStableAndSensitive) {
  const RunConfig a = parse_config("{}");
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_EQ(config_hash(a), config_hash(parse_config("{}")));
  RunConfig b = a;
  b.workers = 8;
  b.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  RunConfig c = a;
  c.mpc.alpha = 10.000000001;
  EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Config, PropagatesSeed) {
  RunConfig c = parse_config(R"({"seed": 42})");
  c.propagate_seed();
  EXPECT_EQ(c.search.search.seed, 42u);
  EXPECT_EQ(c.collect.seed, 42u);
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_EQ(c.compare.seed, 42u);
}

TEST(Config, LoadsFromFile) {
  const std::string path = ::testing::TempDir() + "highmpc_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"experiment": "file", "seed": 3})";
  }
  EXPECT_EQ(load_config(path).experiment, "file");
  EXPECT_THROW(load_config(path + ".missing"), ValidationError);
}

}  // namespace
}  // namespace highmpc
