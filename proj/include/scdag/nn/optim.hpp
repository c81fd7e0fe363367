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

#include <cmath>

#include "scdag/nn/tensor.hpp"

namespace scdag::nn {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

// One AdamW update (decoupled weight decay) using each group's learning rate.
// Frozen groups are left bit-identical. All gradients are cleared afterwards.
inline void optimizer_step(ParamStore& store, const AdamWConfig& cfg) {
  store.count_step();
  const double t = static_cast<double>(store.step_count());
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  double scale = 1.0;
  if (cfg.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : store.params())
      if (!store.frozen(p.group)) sq += p.grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg.max_grad_norm) scale = cfg.max_grad_norm / norm;
  }

  for (auto& p : store.params()) {
    if (store.frozen(p.group)) {
      p.grad.setZero();
      continue;
    }
    const double lr = store.lr(p.group);
    if (scale != 1.0) p.grad *= scale;
    if (cfg.weight_decay != 0.0) p.value *= (1.0 - lr * cfg.weight_decay);
    p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * p.grad;
    p.v = cfg.beta2 * p.v + (1.0 - cfg.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (p.m.array() / bias1) / ((p.v.array() / bias2).sqrt() + cfg.eps);
    p.grad.setZero();
  }
}

}  // namespace scdag::nn
