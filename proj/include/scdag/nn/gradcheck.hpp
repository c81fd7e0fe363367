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

// Central-difference verification of analytic gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "scdag/nn/tensor.hpp"

namespace scdag::nn {

struct GradCheckEntry {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor: errors are |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Coordinates checked per tensor; larger tensors are subsampled.
  std::size_t max_coordinates = 32;
  std::uint64_t seed = 7;
};

// `loss(true)` must evaluate the loss and accumulate analytic gradients into
// the store; `loss(false)` only evaluates. Parameters of frozen groups are
// not checked.
using LossFn = std::function<double(bool with_grad)>;

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline GradCheckReport grad_check(const LossFn& loss, ParamStore& store, const GradCheckOptions& opt = {}) {
  store.zero_grad();
  loss(true);
  std::vector<Matrix> analytic;
  for (const auto& p : store.params()) analytic.push_back(p.grad);
  store.zero_grad();

  GradCheckReport report;
  report.tolerance = opt.tolerance;
  std::mt19937_64 rng(opt.seed);
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    auto& p = store.at(pi);
    if (store.frozen(p.group)) continue;
    GradCheckEntry entry;
    entry.name = p.name;
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(p.value.size()));
    std::iota(coords.begin(), coords.end(), Eigen::Index{0});
    if (coords.size() > opt.max_coordinates) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.max_coordinates);
    }
    for (Eigen::Index c : coords) {
      double& theta = p.value.data()[c];
      const double saved = theta;
      theta = saved + opt.h;
      const double up = loss(false);
      theta = saved - opt.h;
      const double down = loss(false);
      theta = saved;
      const double numeric = (up - down) / (2.0 * opt.h);
      entry.max_rel_error =
          std::max(entry.max_rel_error, relative_error(analytic[pi].data()[c], numeric, opt.floor));
      ++entry.coordinates;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < opt.tolerance;
  return report;
}

}  // namespace scdag::nn
