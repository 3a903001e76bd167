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

#include <iosfwd>
#include <string>
#include <vector>

#include "highmpc/random.hpp"

namespace highmpc {

// Fully connected network with ReLU hidden layers and a linear output layer.
// Inputs are standardized with the stored per-dimension mean and std before
// the first layer.
class Mlp {
 public:
  static constexpr const char* kFormatTag = "highmpc-mlp v1";

  Mlp() : Mlp({10, 32, 32, 1}) {}
  explicit Mlp(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }

  Eigen::MatrixXd& weight(int layer) { return weights_.at(layer); }
  const Eigen::MatrixXd& weight(int layer) const { return weights_.at(layer); }
  Eigen::VectorXd& bias(int layer) { return biases_.at(layer); }
  const Eigen::VectorXd& bias(int layer) const { return biases_.at(layer); }

  const Eigen::VectorXd& input_mean() const { return input_mean_; }
  const Eigen::VectorXd& input_std() const { return input_std_; }
  void set_normalization(const Eigen::VectorXd& mean, const Eigen::VectorXd& std);

  // He-uniform weights, zero biases.
  void initialize(Rng& rng);

  // Raw network output for one observation.
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  // One column per observation.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  int num_parameters() const;
  // Weights (column-major) then bias, layer by layer.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);

  // Mean over columns of |f(x) - y|^2, and its gradient w.r.t. parameters()
  // by backpropagation when `gradient` is non-null.
  double loss(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
              Eigen::VectorXd* gradient = nullptr) const;

  void save(std::ostream& out) const;
  static Mlp load(std::istream& in);
  void save(const std::string& path) const;
  static Mlp load(const std::string& path);

  bool operator==(const Mlp& other) const;

 private:
  Eigen::MatrixXd standardize(const Eigen::MatrixXd& inputs) const;

  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  Eigen::VectorXd input_mean_;
  Eigen::VectorXd input_std_;
};

}  // namespace highmpc
