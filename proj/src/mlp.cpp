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


#include "highmpc/mlp.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "highmpc/errors.hpp"

namespace highmpc {

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ValidationError("an MLP needs at least input and output sizes");
  for (int s : sizes_) {
    if (s < 1) throw ValidationError("MLP layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weights_.push_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
    biases_.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
  }
  input_mean_ = Eigen::VectorXd::Zero(sizes_.front());
  input_std_ = Eigen::VectorXd::Ones(sizes_.front());
}

void Mlp::set_normalization(const Eigen::VectorXd& mean, const Eigen::VectorXd& std) {
  if (mean.size() != input_dim() || std.size() != input_dim()) {
    throw DimensionError("normalization vectors must have the input dimension");
  }
  if (!mean.allFinite() || !std.allFinite() || (std.array() <= 0.0).any()) {
    throw ValidationError("normalization std must be positive and finite");
  }
  input_mean_ = mean;
  input_std_ = std;
}

void Mlp::initialize(Rng& rng) {
  for (int l = 0; l < num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / sizes_[l]);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) {
      for (Eigen::Index i = 0; i < weights_[l].rows(); ++i) weights_[l](i, j) = dist(rng);
    }
    biases_[l].setZero();
  }
}

Eigen::MatrixXd Mlp::standardize(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim()) {
    throw DimensionError("MLP input has dimension " + std::to_string(inputs.rows()) + ", expected " +
                         std::to_string(input_dim()));
  }
  return (inputs.colwise() - input_mean_).array().colwise() / input_std_.array();
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const { return forward_batch(input); }

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd a = standardize(inputs);
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
    a = l + 1 < num_layers() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

int Mlp::num_parameters() const {
  int n = 0;
  for (int l = 0; l < num_layers(); ++l) n += static_cast<int>(weights_[l].size() + biases_[l].size());
  return n;
}

Eigen::VectorXd Mlp::parameters() const {
  Eigen::VectorXd theta(num_parameters());
  int offset = 0;
  for (int l = 0; l < num_layers(); ++l) {
    const auto nw = weights_[l].size();
    theta.segment(offset, nw) = weights_[l].reshaped();
    offset += static_cast<int>(nw);
    theta.segment(offset, biases_[l].size()) = biases_[l];
    offset += static_cast<int>(biases_[l].size());
  }
  return theta;
}

void Mlp::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != num_parameters()) throw DimensionError("parameter vector has the wrong length");
  int offset = 0;
  for (int l = 0; l < num_layers(); ++l) {
    const auto nw = weights_[l].size();
    weights_[l].reshaped() = theta.segment(offset, nw);
    offset += static_cast<int>(nw);
    biases_[l] = theta.segment(offset, biases_[l].size());
    offset += static_cast<int>(biases_[l].size());
  }
}

double Mlp::loss(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, Eigen::VectorXd* gradient) const {
  const Eigen::Index n = inputs.cols();
  if (targets.rows() != output_dim() || targets.cols() != n) throw DimensionError("targets do not match inputs");
  if (n == 0) throw ValidationError("loss over an empty batch");

  std::vector<Eigen::MatrixXd> act(num_layers() + 1);
  act[0] = standardize(inputs);
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * act[l]).colwise() + biases_[l];
    act[l + 1] = l + 1 < num_layers() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  const Eigen::MatrixXd err = act.back() - targets;
  const double value = err.squaredNorm() / static_cast<double>(n);
  if (gradient == nullptr) return value;

  gradient->resize(num_parameters());
  std::vector<int> offsets(num_layers());
  int offset = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets[l] = offset;
    offset += static_cast<int>(weights_[l].size() + biases_[l].size());
  }
  Eigen::MatrixXd delta = (2.0 / static_cast<double>(n)) * err;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd gw = delta * act[l].transpose();
    gradient->segment(offsets[l], gw.size()) = gw.reshaped();
    gradient->segment(offsets[l] + gw.size(), biases_[l].size()) = delta.rowwise().sum();
    if (l > 0) {
      delta = (weights_[l].transpose() * delta).cwiseProduct((act[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return value;
}

namespace {

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << v(i);
  out << '\n';
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(const char* what) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return std::istringstream(line);
    }
    throw ParseError(std::string("unexpected end of model file, expected ") + what, line_ + 1);
  }

  void expect_word(std::istringstream& s, const std::string& word) {
    std::string w;
    if (!(s >> w) || w != word) throw ParseError("expected '" + word + "'", line_);
  }

  template <typename T>
  T read(std::istringstream& s, const char* what) {
    T v;
    if (!(s >> v)) throw ParseError(std::string("could not read ") + what, line_);
    return v;
  }

  Eigen::VectorXd read_vector(std::istringstream& s, Eigen::Index n, const char* what) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = read_double(s, what);
    finish(s);
    return v;
  }

  double read_double(std::istringstream& s, const char* what) {
    std::string token;
    if (!(s >> token)) throw ParseError(std::string("missing value in ") + what, line_);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw ParseError("bad number '" + token + "' in " + what, line_);
    return v;
  }

  void finish(std::istringstream& s) {
    std::string extra;
    if (s >> extra) throw ParseError("unexpected trailing token '" + extra + "'", line_);
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace

void Mlp::save(std::ostream& out) const {
  out << kFormatTag << '\n';
  out << std::setprecision(17);
  out << "sizes";
  for (int s : sizes_) out << ' ' << s;
  out << "\nactivation relu\n";
  out << "input_mean ";
  write_vector(out, input_mean_);
  out << "input_std ";
  write_vector(out, input_std_);
  for (int l = 0; l < num_layers(); ++l) {
    out << "layer " << l << " weights " << weights_[l].rows() << ' ' << weights_[l].cols() << '\n';
    for (Eigen::Index i = 0; i < weights_[l].rows(); ++i) write_vector(out, weights_[l].row(i).transpose());
    out << "layer " << l << " bias " << biases_[l].size() << '\n';
    write_vector(out, biases_[l]);
  }
}

Mlp Mlp::load(std::istream& in) {
  LineReader reader(in);
  {
    auto s = reader.next("format tag");
    if (s.str() != kFormatTag) throw ParseError("not a model file (expected '" + std::string(kFormatTag) + "')", 1);
  }
  std::vector<int> sizes;
  {
    auto s = reader.next("sizes");
    reader.expect_word(s, "sizes");
    int v;
    while (s >> v) sizes.push_back(v);
    if (!s.eof() || sizes.size() < 2) throw ParseError("bad layer sizes", reader.line());
  }
  Mlp mlp = [&] {
    try {
      return Mlp(sizes);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), reader.line());
    }
  }();
  {
    auto s = reader.next("activation");
    reader.expect_word(s, "activation");
    reader.expect_word(s, "relu");
    reader.finish(s);
  }
  {
    auto s = reader.next("input_mean");
    reader.expect_word(s, "input_mean");
    mlp.input_mean_ = reader.read_vector(s, mlp.input_dim(), "input_mean");
  }
  {
    auto s = reader.next("input_std");
    reader.expect_word(s, "input_std");
    mlp.input_std_ = reader.read_vector(s, mlp.input_dim(), "input_std");
    if ((mlp.input_std_.array() <= 0.0).any()) throw ParseError("input_std must be positive", reader.line());
  }
  for (int l = 0; l < mlp.num_layers(); ++l) {
    auto& w = mlp.weights_[l];
    {
      auto s = reader.next("layer header");
      reader.expect_word(s, "layer");
      if (reader.read<int>(s, "layer index") != l) throw ParseError("layers out of order", reader.line());
      reader.expect_word(s, "weights");
      const auto r = reader.read<Eigen::Index>(s, "rows");
      const auto c = reader.read<Eigen::Index>(s, "cols");
      reader.finish(s);
      if (r != w.rows() || c != w.cols()) throw ParseError("weight shape does not match sizes", reader.line());
    }
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      auto s = reader.next("weight row");
      w.row(i) = reader.read_vector(s, w.cols(), "weight row").transpose();
    }
    {
      auto s = reader.next("bias header");
      reader.expect_word(s, "layer");
      if (reader.read<int>(s, "layer index") != l) throw ParseError("layers out of order", reader.line());
      reader.expect_word(s, "bias");
      if (reader.read<Eigen::Index>(s, "bias size") != mlp.biases_[l].size()) {
        throw ParseError("bias size does not match sizes", reader.line());
      }
      reader.finish(s);
    }
    auto s = reader.next("bias");
    mlp.biases_[l] = reader.read_vector(s, mlp.biases_[l].size(), "bias");
  }
  if (!mlp.parameters().allFinite()) throw ParseError("model has non-finite parameters", reader.line());
  return mlp;
}

void Mlp::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save(out);
  if (!out) throw Error("failed writing '" + path + "'");
}

Mlp Mlp::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file '" + path + "'");
  return load(in);
}

bool Mlp::operator==(const Mlp& other) const {
  return sizes_ == other.sizes_ && input_mean_ == other.input_mean_ && input_std_ == other.input_std_ &&
         parameters() == other.parameters();
}

}  // namespace highmpc
