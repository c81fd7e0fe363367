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

// Backend heads: per-token softmax, linear-chain CRF, and span boundaries.
//
// All heads consume one row per word (the first-subword rows of the fused
// representation). Tag scores use the 67-tag BIO space; the span head scores
// 34 classes per boundary: 0 = none, 1 + l = fine label l.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "scdag/corpus.hpp"
#include "scdag/error.hpp"
#include "scdag/nn/graph.hpp"
#include "scdag/taxonomy.hpp"

namespace scdag {

enum class HeadKind { softmax, crf, span };

inline std::string_view head_name(HeadKind h) {
  switch (h) {
    case HeadKind::softmax: return "softmax";
    case HeadKind::crf: return "crf";
    case HeadKind::span: return "span";
  }
  return "?";
}

inline HeadKind parse_head(std::string_view name) {
  if (name == "softmax") return HeadKind::softmax;
  if (name == "crf") return HeadKind::crf;
  if (name == "span") return HeadKind::span;
  throw Error("unknown classifier '" + std::string(name) + "' (expected softmax, crf or span)");
}

inline constexpr int kSpanClasses = taxonomy::kFineCount + 1;

// ---------------------------------------------------------------------------
// Softmax head

inline std::vector<TagIndex> argmax_rows(const nn::Matrix& scores) {
  std::vector<TagIndex> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    scores.row(r).maxCoeff(&best);  // first maximum on ties
    out[static_cast<std::size_t>(r)] = static_cast<TagIndex>(best);
  }
  return out;
}

// Per-token argmax followed by BIO repair.
inline std::vector<TagIndex> softmax_decode(const nn::Matrix& emissions) {
  auto tags = argmax_rows(emissions);
  repair_bio(tags);
  return tags;
}

inline nn::Var softmax_loss(nn::Graph& g, nn::Var emissions, const std::vector<TagIndex>& gold) {
  return nn::cross_entropy(g, emissions, std::vector<int>(gold.begin(), gold.end()));
}

// ---------------------------------------------------------------------------
// Linear-chain CRF
//
// score(y) = start[y0] + sum_t emit[t, y_t] + sum_t trans[y_{t-1}, y_t] + end[y_last]

struct CrfView {
  const nn::Matrix& emissions;    // [M, K]
  const nn::Matrix& transitions;  // [K, K], row = previous tag
  const nn::Matrix& start;        // [1, K]
  const nn::Matrix& end;          // [1, K]

  Eigen::Index length() const { return emissions.rows(); }
  Eigen::Index tags() const { return emissions.cols(); }
  void check() const {
    const auto k = tags();
    if (transitions.rows() != k || transitions.cols() != k || start.size() != k || end.size() != k)
      throw ShapeError("crf: parameter shape mismatch");
    if (length() < 1) throw ShapeError("crf: empty sequence");
  }
};

inline constexpr double kMaskedScore = -1e9;

// Additive masks that forbid I-X unless preceded by B-X/I-X.
inline nn::Matrix bio_transition_mask() {
  nn::Matrix m = nn::Matrix::Zero(taxonomy::kTagCount, taxonomy::kTagCount);
  for (TagIndex i = 0; i < taxonomy::kTagCount; ++i)
    for (TagIndex j = 0; j < taxonomy::kTagCount; ++j)
      if (!taxonomy::allowed_transition(i, j)) m(i, j) = kMaskedScore;
  return m;
}

inline nn::Matrix bio_start_mask() {
  nn::Matrix m = nn::Matrix::Zero(1, taxonomy::kTagCount);
  for (TagIndex j = 0; j < taxonomy::kTagCount; ++j)
    if (!taxonomy::allowed_transition(-1, j)) m(0, j) = kMaskedScore;
  return m;
}

inline double crf_path_score(const CrfView& c, const std::vector<TagIndex>& path) {
  c.check();
  if (static_cast<Eigen::Index>(path.size()) != c.length()) throw ShapeError("crf: path length mismatch");
  double s = c.start(0, path[0]) + c.end(0, path.back());
  for (std::size_t t = 0; t < path.size(); ++t) {
    s += c.emissions(static_cast<Eigen::Index>(t), path[t]);
    if (t > 0) s += c.transitions(path[t - 1], path[t]);
  }
  return s;
}

namespace detail {

// alpha[t, k] = log-sum of scores of prefixes ending in tag k at t (emission included).
inline nn::Matrix crf_alpha(const CrfView& c) {
  const auto m = c.length(), k = c.tags();
  nn::Matrix alpha(m, k);
  alpha.row(0) = c.start.row(0) + c.emissions.row(0);
  nn::RowVector tmp(k);
  for (Eigen::Index t = 1; t < m; ++t)
    for (Eigen::Index j = 0; j < k; ++j) {
      tmp = alpha.row(t - 1) + c.transitions.col(j).transpose();
      alpha(t, j) = nn::log_sum_exp(tmp) + c.emissions(t, j);
    }
  return alpha;
}

// beta[t, k] = log-sum of scores of suffixes after tag k at t (end score included).
inline nn::Matrix crf_beta(const CrfView& c) {
  const auto m = c.length(), k = c.tags();
  nn::Matrix beta(m, k);
  beta.row(m - 1) = c.end.row(0);
  nn::RowVector tmp(k);
  for (Eigen::Index t = m - 2; t >= 0; --t) {
    const nn::RowVector next = c.emissions.row(t + 1) + beta.row(t + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      tmp = c.transitions.row(i) + next;
      beta(t, i) = nn::log_sum_exp(tmp);
    }
  }
  return beta;
}

}  // namespace detail

// Log-partition by the forward algorithm.
inline double crf_log_partition(const CrfView& c) {
  c.check();
  const auto alpha = detail::crf_alpha(c);
  nn::RowVector last = alpha.row(c.length() - 1) + c.end.row(0);
  return nn::log_sum_exp(last);
}

// Best path; ties resolve to the lowest tag index.
inline std::vector<TagIndex> crf_viterbi(const CrfView& c) {
  c.check();
  const auto m = c.length(), k = c.tags();
  nn::Matrix delta(m, k);
  std::vector<std::vector<int>> back(static_cast<std::size_t>(m), std::vector<int>(static_cast<std::size_t>(k), 0));
  delta.row(0) = c.start.row(0) + c.emissions.row(0);
  for (Eigen::Index t = 1; t < m; ++t)
    for (Eigen::Index j = 0; j < k; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index i = 0; i < k; ++i) {
        const double v = delta(t - 1, i) + c.transitions(i, j);
        if (v > best) {
          best = v;
          arg = static_cast<int>(i);
        }
      }
      delta(t, j) = best + c.emissions(t, j);
      back[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = arg;
    }
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double v = delta(m - 1, j) + c.end(0, j);
    if (v > best) {
      best = v;
      arg = static_cast<int>(j);
    }
  }
  std::vector<TagIndex> path(static_cast<std::size_t>(m));
  path[static_cast<std::size_t>(m - 1)] = arg;
  for (Eigen::Index t = m - 1; t > 0; --t)
    path[static_cast<std::size_t>(t - 1)] = back[static_cast<std::size_t>(t)][static_cast<std::size_t>(path[static_cast<std::size_t>(t)])];
  return path;
}

// -(score(gold) - logZ) for one sequence. Gradients use forward-backward
// marginals. `mask` adds the BIO masks to transitions and start scores.
inline nn::Var crf_nll(nn::Graph& g, nn::Var emissions, nn::Var transitions, nn::Var start, nn::Var end,
                       const std::vector<TagIndex>& gold, bool mask = false) {
  nn::Matrix trans = g.value(transitions);
  nn::Matrix st = g.value(start);
  if (mask) {
    trans += bio_transition_mask();
    st += bio_start_mask();
  }
  const nn::Matrix& em = g.value(emissions);
  const nn::Matrix& en = g.value(end);
  const CrfView view{em, trans, st, en};
  view.check();
  if (static_cast<Eigen::Index>(gold.size()) != view.length()) throw ShapeError("crf_nll: gold length mismatch");
  const auto alpha = detail::crf_alpha(view);
  const auto beta = detail::crf_beta(view);
  nn::RowVector last = alpha.row(view.length() - 1) + en.row(0);
  const double log_z = nn::log_sum_exp(last);
  nn::Matrix value(1, 1);
  value(0, 0) = log_z - crf_path_score(view, gold);

  return g.record(std::move(value), {emissions, transitions, start, end},
                  [=](nn::Graph& g, const nn::Matrix& dy) {
                    const double s = dy(0, 0);
                    const auto m = em.rows(), k = em.cols();
                    nn::Matrix node = (alpha + beta).array() - log_z;
                    node = node.array().exp().matrix();
                    if (g.requires_grad(emissions)) {
                      auto& d = g.grad(emissions);
                      d += s * node;
                      for (Eigen::Index t = 0; t < m; ++t) d(t, gold[static_cast<std::size_t>(t)]) -= s;
                    }
                    if (g.requires_grad(start)) {
                      auto& d = g.grad(start);
                      d += s * node.row(0);
                      d(0, gold.front()) -= s;
                    }
                    if (g.requires_grad(end)) {
                      auto& d = g.grad(end);
                      d += s * node.row(m - 1);
                      d(0, gold.back()) -= s;
                    }
                    if (g.requires_grad(transitions)) {
                      auto& d = g.grad(transitions);
                      for (Eigen::Index t = 1; t < m; ++t) {
                        for (Eigen::Index i = 0; i < k; ++i) {
                          const double a = alpha(t - 1, i);
                          for (Eigen::Index j = 0; j < k; ++j)
                            d(i, j) += s * std::exp(a + trans(i, j) + em(t, j) + beta(t, j) - log_z);
                        }
                        d(gold[static_cast<std::size_t>(t - 1)], gold[static_cast<std::size_t>(t)]) -= s;
                      }
                    }
                  });
}

// ---------------------------------------------------------------------------
// Span head

struct SpanTargets {
  std::vector<int> start;  // per word: 0 or 1 + label
  std::vector<int> end;
};

inline SpanTargets span_targets(std::size_t length, const std::vector<Entity>& entities) {
  SpanTargets t{std::vector<int>(length, 0), std::vector<int>(length, 0)};
  for (const auto& e : entities) {
    t.start[static_cast<std::size_t>(e.start)] = 1 + e.label;
    t.end[static_cast<std::size_t>(e.end)] = 1 + e.label;
  }
  return t;
}

// Mean CE over start boundaries + mean CE over end boundaries.
inline nn::Var span_loss(nn::Graph& g, nn::Var start_logits, nn::Var end_logits, const std::vector<Entity>& gold,
                         std::size_t length) {
  auto targets = span_targets(length, gold);
  auto ls = nn::cross_entropy(g, start_logits, std::move(targets.start));
  auto le = nn::cross_entropy(g, end_logits, std::move(targets.end));
  return nn::linear_combination(g, {ls, le}, {1.0, 1.0});
}

// Pairs each predicted start of label l with the nearest end of label l at or
// after it, scanning left to right without overlap. Unmatched starts are dropped.
inline std::vector<Entity> span_decode(const std::vector<int>& start_classes, const std::vector<int>& end_classes) {
  if (start_classes.size() != end_classes.size()) throw ShapeError("span_decode: length mismatch");
  std::vector<Entity> out;
  const int n = static_cast<int>(start_classes.size());
  int i = 0;
  while (i < n) {
    const int cls = start_classes[static_cast<std::size_t>(i)];
    if (cls == 0) {
      ++i;
      continue;
    }
    int j = i;
    while (j < n && end_classes[static_cast<std::size_t>(j)] != cls) ++j;
    if (j == n) {
      ++i;
      continue;
    }
    out.push_back({i, j, cls - 1});
    i = j + 1;
  }
  return out;
}

inline std::vector<Entity> span_decode(const nn::Matrix& start_logits, const nn::Matrix& end_logits) {
  return span_decode(argmax_rows(start_logits), argmax_rows(end_logits));
}

// Span logits are stored side by side as [start | end], 68 columns.
inline std::vector<TagIndex> span_decode_tags(const nn::Matrix& packed) {
  if (packed.cols() != 2 * kSpanClasses) throw ShapeError("span logits must have 68 columns");
  const nn::Matrix s = packed.leftCols(kSpanClasses);
  const nn::Matrix e = packed.rightCols(kSpanClasses);
  return tags_from_entities(static_cast<std::size_t>(packed.rows()), span_decode(s, e));
}

}  // namespace scdag
