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

// A small reverse-mode differentiation tape over dense row-major matrices.
//
// A Graph records every operation applied during one forward pass. Calling
// backward() on a 1x1 result walks the tape in reverse and accumulates
// gradients into every Parameter that took part as a trainable leaf.
// Nodes that do not depend on a trainable leaf carry no gradient and are
// skipped, which is how frozen parameter groups stay untouched.

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scdag/error.hpp"
#include "scdag/nn/tensor.hpp"

namespace scdag::nn {

struct Var {
  int id = -1;
};

class Graph {
 public:
  // out_grad is the gradient flowing into the node being differentiated.
  using Backward = std::function<void(Graph&, const Matrix& out_grad)>;

  Graph() { nodes_.reserve(256); }

  Var constant(Matrix value) { return push(std::move(value), false, nullptr, {}); }

  // A leaf bound to a parameter. Its gradient is added to `p.grad` on backward.
  Var param(Parameter& p, bool trainable = true) { return push(p.value, trainable, trainable ? &p : nullptr, {}); }

  // Records an operation. `fn` runs only if some input requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward fn) {
    bool needs = false;
    for (Var in : inputs) needs = needs || requires_grad(in);
    return push(std::move(value), needs, nullptr, needs ? std::move(fn) : Backward{});
  }

  // A node whose gradient is consumed by `fn` even though it has no graph
  // inputs (e.g. a lookup that scatters into a parameter directly).
  Var record_source(Matrix value, Backward fn) { return push(std::move(value), true, nullptr, std::move(fn)); }

  const Matrix& value(Var v) const { return node(v).value; }
  double scalar(Var v) const {
    const auto& m = value(v);
    if (m.size() != 1) throw ShapeError("scalar(): node is not 1x1");
    return m(0, 0);
  }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  // Gradient accumulator of `v`, allocated on first use.
  Matrix& grad(Var v) {
    auto& n = node(v);
    if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void backward(Var loss) {
    if (value(loss).size() != 1) throw ShapeError("backward(): loss must be 1x1");
    if (!requires_grad(loss)) return;
    grad(loss)(0, 0) += 1.0;
    for (int i = loss.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) {
        // The callback may allocate input gradients but never appends nodes,
        // so the reference stays valid.
        n.backward(*this, n.grad);
      }
      if (n.param) n.param->grad += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Backward backward;
  };

  Var push(Matrix value, bool needs, Parameter* p, Backward fn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = needs;
    n.param = p;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  Node& node(Var v) {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw Error("invalid graph variable");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Node& node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw Error("invalid graph variable");
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Elementwise helpers

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Matrix sigmoid(const Matrix& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }

// Row-wise softmax with max subtraction.
inline Matrix row_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

inline Matrix row_log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = (logits.row(r).array() - lse).matrix();
  }
  return out;
}

inline double log_sum_exp(const RowVector& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

// ---------------------------------------------------------------------------
// Operations

// x[n, in] * W[in, out] + b[1, out]
inline Var dense(Graph& g, Var x, Var W, Var b) {
  const auto& xv = g.value(x);
  const auto& Wv = g.value(W);
  const auto& bv = g.value(b);
  if (xv.cols() != Wv.rows() || bv.rows() != 1 || bv.cols() != Wv.cols())
    throw ShapeError("dense: shape mismatch");
  Matrix y = xv * Wv;
  y.rowwise() += bv.row(0);
  return g.record(std::move(y), {x, W, b}, [x, W, b](Graph& g, const Matrix& dy) {
    if (g.requires_grad(x)) g.grad(x).noalias() += dy * g.value(W).transpose();
    if (g.requires_grad(W)) g.grad(W).noalias() += g.value(x).transpose() * dy;
    if (g.requires_grad(b)) g.grad(b) += dy.colwise().sum();
  });
}

// Rows `ids` of an embedding table. Gradients scatter straight into `table.grad`.
inline Var embedding(Graph& g, Parameter& table, std::span<const int> ids, bool trainable = true) {
  Matrix y(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= table.value.rows()) throw ShapeError("embedding: id out of range");
    y.row(static_cast<Eigen::Index>(r)) = table.value.row(ids[r]);
  }
  if (!trainable) return g.constant(std::move(y));
  std::vector<int> rows(ids.begin(), ids.end());
  Parameter* target = &table;
  return g.record_source(std::move(y), [rows = std::move(rows), target](Graph&, const Matrix& dy) {
    for (std::size_t r = 0; r < rows.size(); ++r) target->grad.row(rows[r]) += dy.row(static_cast<Eigen::Index>(r));
  });
}

// Parameters of one LSTM direction, gate order [input, forget, cell, output].
struct LstmVars {
  Var Wx;  // [in, 4H]
  Var Wh;  // [H, 4H]
  Var b;   // [1, 4H]
};

namespace detail {

struct LstmTrace {
  Matrix gates;  // [N, 4H] activated i, f, g, o
  Matrix cell;   // [N, H]
  Matrix hidden; // [N, H]
};

// Runs one direction over x in the order given by `reverse`.
inline LstmTrace lstm_forward(const Matrix& x, const Matrix& Wx, const Matrix& Wh, const Matrix& b, bool reverse) {
  const Eigen::Index n = x.rows();
  const Eigen::Index h = Wh.rows();
  if (Wx.rows() != x.cols() || Wx.cols() != 4 * h || Wh.cols() != 4 * h || b.rows() != 1 || b.cols() != 4 * h)
    throw ShapeError("bilstm: parameter shape mismatch");
  LstmTrace tr;
  Matrix xw = x * Wx;
  xw.rowwise() += b.row(0);
  tr.gates.resize(n, 4 * h);
  tr.cell.resize(n, h);
  tr.hidden.resize(n, h);
  RowVector h_prev = RowVector::Zero(h);
  RowVector c_prev = RowVector::Zero(h);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index t = reverse ? n - 1 - k : k;
    RowVector z = xw.row(t) + h_prev * Wh;
    for (Eigen::Index j = 0; j < h; ++j) {
      z(j) = sigmoid(z(j));
      z(h + j) = sigmoid(z(h + j));
      z(2 * h + j) = std::tanh(z(2 * h + j));
      z(3 * h + j) = sigmoid(z(3 * h + j));
    }
    RowVector c = z.segment(h, h).cwiseProduct(c_prev) + z.segment(0, h).cwiseProduct(z.segment(2 * h, h));
    RowVector hv = z.segment(3 * h, h).cwiseProduct(c.unaryExpr([](double v) { return std::tanh(v); }));
    tr.gates.row(t) = z;
    tr.cell.row(t) = c;
    tr.hidden.row(t) = hv;
    h_prev = hv;
    c_prev = c;
  }
  return tr;
}

// Backpropagation through time for one direction.
inline void lstm_backward(Graph& g, Var x, const LstmVars& p, const LstmTrace& tr, const Matrix& dh_out,
                          bool reverse) {
  const Matrix& xv = g.value(x);
  const Matrix& Wh = g.value(p.Wh);
  const Eigen::Index n = xv.rows();
  const Eigen::Index h = Wh.rows();
  Matrix dz(n, 4 * h);
  RowVector dh_next = RowVector::Zero(h);
  RowVector dc_next = RowVector::Zero(h);
  Matrix dWh = Matrix::Zero(h, 4 * h);
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    const Eigen::Index t = reverse ? n - 1 - k : k;
    const bool first = k == 0;
    const Eigen::Index t_prev = reverse ? t + 1 : t - 1;
    const auto gates = tr.gates.row(t);
    RowVector c_prev = first ? RowVector::Zero(h) : RowVector(tr.cell.row(t_prev));
    RowVector h_prev = first ? RowVector::Zero(h) : RowVector(tr.hidden.row(t_prev));
    RowVector dh = dh_out.row(t) + dh_next;
    RowVector dc = dc_next;
    for (Eigen::Index j = 0; j < h; ++j) {
      const double i = gates(j), f = gates(h + j), cg = gates(2 * h + j), o = gates(3 * h + j);
      const double tc = std::tanh(tr.cell(t, j));
      const double d_o = dh(j) * tc;
      dc(j) += dh(j) * o * (1.0 - tc * tc);
      const double d_i = dc(j) * cg;
      const double d_g = dc(j) * i;
      const double d_f = dc(j) * c_prev(j);
      dz(t, j) = d_i * i * (1.0 - i);
      dz(t, h + j) = d_f * f * (1.0 - f);
      dz(t, 2 * h + j) = d_g * (1.0 - cg * cg);
      dz(t, 3 * h + j) = d_o * o * (1.0 - o);
      dc_next(j) = dc(j) * f;
    }
    dWh.noalias() += h_prev.transpose() * dz.row(t);
    dh_next = dz.row(t) * Wh.transpose();
  }
  if (g.requires_grad(p.Wh)) g.grad(p.Wh) += dWh;
  if (g.requires_grad(p.Wx)) g.grad(p.Wx).noalias() += xv.transpose() * dz;
  if (g.requires_grad(p.b)) g.grad(p.b) += dz.colwise().sum();
  if (g.requires_grad(x)) g.grad(x).noalias() += dz * g.value(p.Wx).transpose();
}

}  // namespace detail

// Bidirectional LSTM: output row t is [forward h_t | backward h_t], width 2H.
inline Var bilstm(Graph& g, Var x, const LstmVars& fwd, const LstmVars& bwd) {
  const Matrix& xv = g.value(x);
  if (xv.rows() < 1) throw ShapeError("bilstm: empty sequence");
  auto tf = std::make_shared<detail::LstmTrace>(
      detail::lstm_forward(xv, g.value(fwd.Wx), g.value(fwd.Wh), g.value(fwd.b), false));
  auto tb = std::make_shared<detail::LstmTrace>(
      detail::lstm_forward(xv, g.value(bwd.Wx), g.value(bwd.Wh), g.value(bwd.b), true));
  const Eigen::Index h = tf->hidden.cols();
  Matrix y(xv.rows(), 2 * h);
  y.leftCols(h) = tf->hidden;
  y.rightCols(h) = tb->hidden;
  return g.record(std::move(y), {x, fwd.Wx, fwd.Wh, fwd.b, bwd.Wx, bwd.Wh, bwd.b},
                  [x, fwd, bwd, tf, tb, h](Graph& g, const Matrix& dy) {
                    detail::lstm_backward(g, x, fwd, *tf, dy.leftCols(h), false);
                    detail::lstm_backward(g, x, bwd, *tb, dy.rightCols(h), true);
                  });
}

// [a | b] per row.
inline Var concat_cols(Graph& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.rows() != bv.rows()) throw ShapeError("concat_cols: row mismatch");
  Matrix y(av.rows(), av.cols() + bv.cols());
  y.leftCols(av.cols()) = av;
  y.rightCols(bv.cols()) = bv;
  const Eigen::Index ca = av.cols();
  const Eigen::Index cb = bv.cols();
  return g.record(std::move(y), {a, b}, [a, b, ca, cb](Graph& g, const Matrix& dy) {
    if (g.requires_grad(a)) g.grad(a) += dy.leftCols(ca);
    if (g.requires_grad(b)) g.grad(b) += dy.rightCols(cb);
  });
}

// sigmoid(lambda) * s + (1 - sigmoid(lambda)) * other, lambda broadcast over rows.
inline Var convex_mix(Graph& g, Var s, Var other, Var lambda) {
  const auto& sv = g.value(s);
  const auto& ov = g.value(other);
  const auto& lv = g.value(lambda);
  if (sv.rows() != ov.rows() || sv.cols() != ov.cols() || lv.rows() != 1 || lv.cols() != sv.cols())
    throw ShapeError("weighted fusion: shape mismatch");
  const RowVector w = sigmoid(lv).row(0);
  Matrix y = sv.array().rowwise() * w.array() + ov.array().rowwise() * (1.0 - w.array());
  return g.record(std::move(y), {s, other, lambda}, [s, other, lambda, w](Graph& g, const Matrix& dy) {
    if (g.requires_grad(s)) g.grad(s) += (dy.array().rowwise() * w.array()).matrix();
    if (g.requires_grad(other)) g.grad(other) += (dy.array().rowwise() * (1.0 - w.array())).matrix();
    if (g.requires_grad(lambda)) {
      const Matrix diff = g.value(s) - g.value(other);
      RowVector d = dy.cwiseProduct(diff).colwise().sum();
      g.grad(lambda) += d.cwiseProduct((w.array() * (1.0 - w.array())).matrix());
    }
  });
}

// Inverted dropout; identity when p == 0.
inline Var dropout(Graph& g, Var x, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw Error("dropout: rate must be < 1");
  const auto& xv = g.value(x);
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  Matrix y = xv.cwiseProduct(mask);
  return g.record(std::move(y), {x}, [x, mask](Graph& g, const Matrix& dy) {
    if (g.requires_grad(x)) g.grad(x) += dy.cwiseProduct(mask);
  });
}

inline Var gather_rows(Graph& g, Var x, std::vector<int> rows) {
  const auto& xv = g.value(x);
  Matrix y(static_cast<Eigen::Index>(rows.size()), xv.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= xv.rows()) throw ShapeError("gather_rows: index out of range");
    y.row(static_cast<Eigen::Index>(r)) = xv.row(rows[r]);
  }
  return g.record(std::move(y), {x}, [x, rows = std::move(rows)](Graph& g, const Matrix& dy) {
    if (!g.requires_grad(x)) return;
    auto& dx = g.grad(x);
    for (std::size_t r = 0; r < rows.size(); ++r) dx.row(rows[r]) += dy.row(static_cast<Eigen::Index>(r));
  });
}

// Mean over rows of KL(softmax(p) || softmax(q)). The p side is a constant:
// gradients reach q_logits only. Zero rows give 0.
inline Var kl_stopgrad(Graph& g, Var p_logits, Var q_logits) {
  const auto& pv = g.value(p_logits);
  const auto& qv = g.value(q_logits);
  if (pv.rows() != qv.rows() || pv.cols() != qv.cols()) throw ShapeError("kl_stopgrad: shape mismatch");
  if (pv.rows() == 0) return g.constant(Matrix::Zero(1, 1));
  const Matrix P = row_softmax(pv);
  const Matrix logP = row_log_softmax(pv);
  const Matrix logQ = row_log_softmax(qv);
  const double rows = static_cast<double>(pv.rows());
  Matrix value(1, 1);
  value(0, 0) = (P.array() * (logP - logQ).array()).sum() / rows;
  return g.record(std::move(value), {q_logits}, [q_logits, P, logQ, rows](Graph& g, const Matrix& dy) {
    g.grad(q_logits) += (dy(0, 0) / rows) * (logQ.array().exp().matrix() - P);
  });
}

// Mean over rows of -log softmax(logits)[target].
inline Var cross_entropy(Graph& g, Var logits, std::vector<int> targets) {
  const auto& lv = g.value(logits);
  if (static_cast<std::size_t>(lv.rows()) != targets.size()) throw ShapeError("cross_entropy: row/target mismatch");
  if (lv.rows() == 0) return g.constant(Matrix::Zero(1, 1));
  const Matrix logp = row_log_softmax(lv);
  double total = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0 || targets[r] >= lv.cols()) throw ShapeError("cross_entropy: target out of range");
    total -= logp(static_cast<Eigen::Index>(r), targets[r]);
  }
  const double rows = static_cast<double>(lv.rows());
  Matrix value(1, 1);
  value(0, 0) = total / rows;
  return g.record(std::move(value), {logits}, [logits, logp, targets = std::move(targets), rows](Graph& g, const Matrix& dy) {
    Matrix d = logp.array().exp().matrix();
    for (std::size_t r = 0; r < targets.size(); ++r) d(static_cast<Eigen::Index>(r), targets[r]) -= 1.0;
    g.grad(logits) += (dy(0, 0) / rows) * d;
  });
}

// sum_i coefficients[i] * terms[i] over 1x1 terms.
inline Var linear_combination(Graph& g, std::vector<Var> terms, std::vector<double> coefficients) {
  if (terms.size() != coefficients.size()) throw ShapeError("linear_combination: size mismatch");
  Matrix value = Matrix::Zero(1, 1);
  bool needs = false;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    value(0, 0) += coefficients[i] * g.scalar(terms[i]);
    needs = needs || g.requires_grad(terms[i]);
  }
  if (!needs) return g.constant(std::move(value));
  return g.record_source(std::move(value), [terms = std::move(terms), coefficients = std::move(coefficients)](
                                               Graph& g, const Matrix& dy) {
    for (std::size_t i = 0; i < terms.size(); ++i)
      if (g.requires_grad(terms[i])) g.grad(terms[i])(0, 0) += coefficients[i] * dy(0, 0);
  });
}

inline Var sum_squares(Graph& g, Var x) {
  Matrix value(1, 1);
  value(0, 0) = g.value(x).squaredNorm();
  return g.record(std::move(value), {x}, [x](Graph& g, const Matrix& dy) { g.grad(x) += 2.0 * dy(0, 0) * g.value(x); });
}

}  // namespace scdag::nn
