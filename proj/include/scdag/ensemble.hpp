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

// k-fold orchestration and prediction-level ensembling.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "scdag/classifiers.hpp"
#include "scdag/corpus.hpp"
#include "scdag/error.hpp"
#include "scdag/gazetteer.hpp"
#include "scdag/metrics.hpp"
#include "scdag/nn/tensor.hpp"
#include "scdag/trainer.hpp"

namespace scdag {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

// Shuffled partition into k validation folds whose sizes differ by at most one.
inline FoldPlan kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error("kfold_split: k must be >= 2");
  if (n < k) throw Error("kfold_split: " + std::to_string(n) + " items cannot fill " + std::to_string(k) + " folds");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  FoldPlan plan{k, seed, {}};
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    Fold fold;
    fold.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(pos), idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
    fold.train.insert(fold.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(pos));
    fold.train.insert(fold.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(pos + size), idx.end());
    std::sort(fold.validation.begin(), fold.validation.end());
    std::sort(fold.train.begin(), fold.train.end());
    plan.folds.push_back(std::move(fold));
    pos += size;
  }
  return plan;
}

template <typename T>
std::vector<T> select(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items.at(i));
  return out;
}

// Elementwise mean of per-word score matrices from several runs.
inline nn::Matrix average_logits(const std::vector<nn::Matrix>& runs, HeadKind head) {
  if (head == HeadKind::crf)
    throw Error("average_logits: CRF emissions are not averaged; combine CRF runs with token_vote");
  if (runs.empty()) throw Error("average_logits: no runs");
  nn::Matrix sum = runs.front();
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].rows() != sum.rows() || runs[r].cols() != sum.cols()) throw ShapeError("average_logits: shape mismatch");
    sum += runs[r];
  }
  return sum / static_cast<double>(runs.size());
}

// Decoding of averaged scores for heads that need no learned decoder state.
inline std::vector<TagIndex> decode_scores(HeadKind head, const nn::Matrix& scores) {
  if (scores.rows() == 0) return {};
  switch (head) {
    case HeadKind::softmax:
      return softmax_decode(scores);
    case HeadKind::span:
      return span_decode_tags(scores);
    case HeadKind::crf:
      break;
  }
  throw Error("decode_scores: CRF scores need the model's transitions");
}

// Weighted per-token vote. Ties go to the tag of the lowest-index run among
// the tied tags; the result is BIO-repaired.
inline std::vector<TagIndex> token_vote(const std::vector<std::vector<TagIndex>>& runs, std::vector<double> weights = {}) {
  if (runs.empty()) throw Error("token_vote: no runs");
  if (weights.empty()) weights.assign(runs.size(), 1.0);
  if (weights.size() != runs.size()) throw Error("token_vote: one weight per run required");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw Error("token_vote: weights must be >= 0");
    total += w;
  }
  if (total <= 0.0) throw Error("token_vote: weights must not all be zero");
  const std::size_t n = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != n) throw Error("token_vote: runs have different lengths");

  std::vector<TagIndex> out(n);
  std::vector<double> score(taxonomy::kTagCount);
  for (std::size_t t = 0; t < n; ++t) {
    std::fill(score.begin(), score.end(), 0.0);
    for (std::size_t r = 0; r < runs.size(); ++r) score[static_cast<std::size_t>(runs[r][t])] += weights[r];
    const double best = *std::max_element(score.begin(), score.end());
    for (const auto& r : runs)
      if (score[static_cast<std::size_t>(r[t])] == best) {
        out[t] = r[t];
        break;
      }
  }
  repair_bio(out);
  return out;
}

enum class EnsembleMethod { avg_logits, token_vote };

inline EnsembleMethod parse_ensemble_method(std::string_view name) {
  if (name == "avg-logits") return EnsembleMethod::avg_logits;
  if (name == "token-vote") return EnsembleMethod::token_vote;
  throw Error("unknown ensemble method '" + std::string(name) + "' (expected avg-logits or token-vote)");
}

// Per-sentence combination of several runs' predictions on the same sentences.
inline std::vector<std::vector<TagIndex>> combine(const std::vector<std::vector<Prediction>>& runs, HeadKind head,
                                                  EnsembleMethod method, const std::vector<double>& weights = {}) {
  if (runs.empty()) throw Error("combine: no runs");
  const std::size_t n = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != n) throw Error("combine: runs cover different sentence counts");
  std::vector<std::vector<TagIndex>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (method == EnsembleMethod::avg_logits) {
      std::vector<nn::Matrix> scores;
      for (const auto& r : runs) scores.push_back(r[i].logits);
      out.push_back(decode_scores(head, average_logits(scores, head)));
    } else {
      std::vector<std::vector<TagIndex>> tags;
      for (const auto& r : runs) tags.push_back(r[i].tags);
      out.push_back(token_vote(tags, weights));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// k-fold training

struct KfoldResult {
  FoldPlan plan;
  std::vector<Model> models;
  std::vector<double> fold_dev_f1;  // best validation F1 per fold
};

inline KfoldResult train_kfold(const TrainConfig& config, const std::vector<Sentence>& corpus, const Gazetteer& gazetteer,
                               std::size_t k, std::uint64_t seed, const TrainHooks& hooks = {}) {
  KfoldResult r;
  r.plan = kfold_split(corpus.size(), k, seed);
  for (std::size_t f = 0; f < k; ++f) {
    TrainConfig c = config;
    c.seed = config.seed + f;
    auto out = train(c, select(corpus, r.plan.folds[f].train), select(corpus, r.plan.folds[f].validation), gazetteer, hooks);
    r.fold_dev_f1.push_back(out.best_dev_f1);
    r.models.push_back(std::move(out.model));
  }
  return r;
}

}  // namespace scdag
