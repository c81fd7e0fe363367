// Copyright 2026 The SCDAG Authors.
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

// Parameters and their grouping into separately scheduled components.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "scdag/error.hpp"

namespace scdag::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class Group : int { encoder = 0, gazetteer_net, proj_gaz, proj_enc, fusion, classifier };
inline constexpr int kGroupCount = 6;

inline std::string_view group_name(Group g) {
  static constexpr std::array<std::string_view, kGroupCount> names = {
      "encoder", "gazetteer_net", "proj_gaz", "proj_enc", "fusion", "classifier"};
  return names[static_cast<std::size_t>(g)];
}

struct Parameter {
  std::string name;
  Group group = Group::classifier;
  Matrix value;
  Matrix grad;
  // AdamW moments
  Matrix m;
  Matrix v;
};

// Named parameters addressed by stable index. Copying a store snapshots it.
class ParamStore {
 public:
  std::size_t add(std::string name, Group group, Matrix init) {
    for (const auto& p : params_)
      if (p.name == name) throw Error("duplicate parameter name: " + name);
    Parameter p;
    p.name = std::move(name);
    p.group = group;
    p.grad = Matrix::Zero(init.rows(), init.cols());
    p.m = p.grad;
    p.v = p.grad;
    p.value = std::move(init);
    params_.push_back(std::move(p));
    return params_.size() - 1;
  }

  Parameter& at(std::size_t i) { return params_.at(i); }
  const Parameter& at(std::size_t i) const { return params_.at(i); }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return i;
    throw Error("no parameter named " + std::string(name));
  }
  Parameter& get(std::string_view name) { return params_[index_of(name)]; }
  const Parameter& get(std::string_view name) const { return params_[index_of(name)]; }

  std::size_t size() const { return params_.size(); }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }

  void set_frozen(Group g, bool frozen) { frozen_[static_cast<std::size_t>(g)] = frozen; }
  bool frozen(Group g) const { return frozen_[static_cast<std::size_t>(g)]; }
  void set_lr(Group g, double lr) { lr_[static_cast<std::size_t>(g)] = lr; }
  double lr(Group g) const { return lr_[static_cast<std::size_t>(g)]; }

  std::int64_t step_count() const { return steps_; }
  void count_step() { ++steps_; }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

 private:
  std::vector<Parameter> params_;
  std::array<bool, kGroupCount> frozen_{};
  std::array<double, kGroupCount> lr_{1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3};
  std::int64_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// Initializers

inline Matrix uniform(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

// uniform(+-1/sqrt(fan_in))
inline Matrix fan_in_uniform(std::size_t fan_in, std::size_t cols, std::mt19937_64& rng) {
  return uniform(fan_in, cols, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

}  // namespace scdag::nn
