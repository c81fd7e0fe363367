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

// Tagger with a gazetteer branch, trained in two stages: first the gazetteer
// network is aligned to a frozen encoder through symmetric stop-gradient KL
// terms, then everything is trained jointly on the tagging loss plus the
// weighted alignment terms.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "scdag/classifiers.hpp"
#include "scdag/corpus.hpp"
#include "scdag/error.hpp"
#include "scdag/gazetteer.hpp"
#include "scdag/matcher.hpp"
#include "scdag/metrics.hpp"
#include "scdag/nn/container.hpp"
#include "scdag/nn/graph.hpp"
#include "scdag/nn/optim.hpp"
#include "scdag/nn/tensor.hpp"
#include "scdag/taxonomy.hpp"

namespace scdag {

enum class FusionMode { concat, weighted_sum };

inline std::string_view fusion_name(FusionMode m) { return m == FusionMode::concat ? "concat" : "weighted_sum"; }

inline FusionMode parse_fusion(std::string_view name) {
  if (name == "concat") return FusionMode::concat;
  if (name == "weighted_sum") return FusionMode::weighted_sum;
  throw Error("unknown fusion mode '" + std::string(name) + "' (expected concat or weighted_sum)");
}

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
  std::optional<double> alpha;  // unset: 100 for crf, 5 otherwise
  double lr_encoder = 1e-3;
  double lr_gazetteer = 1e-2;  // gazetteer network and both projections
  double lr_classifier = 1e-3; // head and fusion weight
  int epochs_stage1 = 5;
  int epochs_stage2 = 20;
  int batch_size = 8;
  double dropout = 0.1;
  FusionMode fusion = FusionMode::concat;
  HeadKind classifier = HeadKind::softmax;
  std::uint64_t seed = 1;
  int hidden = 64;
  int embedding_dim = 32;
  bool use_gazetteer = true;  // false trains the encoder-only baseline
  bool crf_bio_mask = false;
  double weight_decay = 0.01;
  double max_grad_norm = 0.0;
  int subword_chunk = 0;  // 0: one subword per word

  double effective_alpha() const { return alpha.value_or(classifier == HeadKind::crf ? 100.0 : 5.0); }

  SubwordMode subword_mode() const {
    return subword_chunk == 0 ? SubwordMode::identity() : SubwordMode::fixed_chunk(subword_chunk);
  }

  void validate() const {
    if (effective_alpha() < 0.0) throw Error("config: alpha must be >= 0");
    if (epochs_stage1 < 0 || epochs_stage2 < 0) throw Error("config: epochs must be >= 0");
    if (batch_size < 1) throw Error("config: batch_size must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw Error("config: dropout must be in [0, 1)");
    if (hidden < 2 || hidden % 2 != 0) throw Error("config: hidden must be an even number >= 2");
    if (embedding_dim < 1) throw Error("config: embedding_dim must be >= 1");
    if (subword_chunk < 0) throw Error("config: subword_chunk must be >= 0");
    if (lr_encoder < 0.0 || lr_gazetteer < 0.0 || lr_classifier < 0.0) throw Error("config: learning rates must be >= 0");
    if (weight_decay < 0.0 || max_grad_norm < 0.0) throw Error("config: weight_decay and max_grad_norm must be >= 0");
  }
};

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "alpha",      "lr_encoder", "lr_gazetteer", "lr_classifier", "epochs_stage1", "epochs_stage2",
      "batch_size", "dropout",    "fusion_mode",  "classifier",    "seed",          "hidden",
      "embedding_dim", "use_gazetteer", "crf_bio_mask", "weight_decay", "max_grad_norm", "subword_chunk"};
  return keys;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"alpha", c.effective_alpha()},
          {"lr_encoder", c.lr_encoder},
          {"lr_gazetteer", c.lr_gazetteer},
          {"lr_classifier", c.lr_classifier},
          {"epochs_stage1", c.epochs_stage1},
          {"epochs_stage2", c.epochs_stage2},
          {"batch_size", c.batch_size},
          {"dropout", c.dropout},
          {"fusion_mode", fusion_name(c.fusion)},
          {"classifier", head_name(c.classifier)},
          {"seed", c.seed},
          {"hidden", c.hidden},
          {"embedding_dim", c.embedding_dim},
          {"use_gazetteer", c.use_gazetteer},
          {"crf_bio_mask", c.crf_bio_mask},
          {"weight_decay", c.weight_decay},
          {"max_grad_norm", c.max_grad_norm},
          {"subword_chunk", c.subword_chunk}};
}

// Applies the keys present in `j` on top of `base`. Unknown keys are errors.
inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  if (!j.is_object()) throw Error("config: expected a JSON object");
  const auto& keys = config_keys();
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw Error("config: unknown key '" + k + "'; valid keys: " + join(keys, ", "));
  }
  try {
    if (j.contains("alpha")) {
      if (j["alpha"].is_null())
        base.alpha.reset();
      else
        base.alpha = j["alpha"].get<double>();
    }
    auto set = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    set("lr_encoder", base.lr_encoder);
    set("lr_gazetteer", base.lr_gazetteer);
    set("lr_classifier", base.lr_classifier);
    set("epochs_stage1", base.epochs_stage1);
    set("epochs_stage2", base.epochs_stage2);
    set("batch_size", base.batch_size);
    set("dropout", base.dropout);
    set("seed", base.seed);
    set("hidden", base.hidden);
    set("embedding_dim", base.embedding_dim);
    set("use_gazetteer", base.use_gazetteer);
    set("crf_bio_mask", base.crf_bio_mask);
    set("weight_decay", base.weight_decay);
    set("max_grad_norm", base.max_grad_norm);
    set("subword_chunk", base.subword_chunk);
    if (j.contains("fusion_mode")) base.fusion = parse_fusion(j["fusion_mode"].get<std::string>());
    if (j.contains("classifier")) base.classifier = parse_head(j["classifier"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  base.validate();
  return base;
}

// The three systems compared in the experiments.
enum class System { base, integration, scdag };

inline TrainConfig with_system(TrainConfig c, System s) {
  switch (s) {
    case System::base:
      c.use_gazetteer = false;
      c.epochs_stage1 = 0;
      c.alpha = 0.0;
      break;
    case System::integration:
      c.use_gazetteer = true;
      c.epochs_stage1 = 0;
      c.alpha = 0.0;
      break;
    case System::scdag:
      c.use_gazetteer = true;
      break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Vocabulary over lowercased subwords; index 0 is the unknown token.

class Vocabulary {
 public:
  static constexpr int kUnknown = 0;

  Vocabulary() { add("<unk>"); }

  int add(const std::string& token) {
    auto [it, inserted] = index_.emplace(token, static_cast<int>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }
  int lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnknown : it->second;
  }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static Vocabulary build(const std::vector<Sentence>& sentences, SubwordMode mode) {
    Vocabulary v;
    for (const auto& s : sentences)
      for (const auto& sw : subword_tokenize(s, mode).subwords) v.add(to_lower(sw));
    return v;
  }
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.empty() || tokens.front() != "<unk>") throw Error("vocabulary must start with <unk>");
    Vocabulary v;
    for (std::size_t i = 1; i < tokens.size(); ++i)
      if (v.add(tokens[i]) != static_cast<int>(i)) throw Error("vocabulary has duplicate token " + tokens[i]);
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// Model

struct Model {
  TrainConfig config;
  Vocabulary vocab;
  nn::ParamStore params;

  bool has_gazetteer() const { return config.use_gazetteer; }
  int fused_width() const {
    return has_gazetteer() && config.fusion == FusionMode::concat ? 2 * config.hidden : config.hidden;
  }
};

namespace detail {

inline void add_lstm(nn::ParamStore& ps, const std::string& prefix, nn::Group grp, int in, int h, std::mt19937_64& rng) {
  const auto uh = static_cast<std::size_t>(h);
  ps.add(prefix + ".Wx", grp, nn::fan_in_uniform(static_cast<std::size_t>(in), 4 * uh, rng));
  ps.add(prefix + ".Wh", grp, nn::fan_in_uniform(uh, 4 * uh, rng));
  nn::Matrix b = nn::Matrix::Zero(1, 4 * h);
  b.block(0, h, 1, h).setOnes();  // forget gate
  ps.add(prefix + ".b", grp, std::move(b));
}

inline void add_dense(nn::ParamStore& ps, const std::string& prefix, nn::Group grp, int in, int out, std::mt19937_64& rng) {
  ps.add(prefix + ".W", grp, nn::fan_in_uniform(static_cast<std::size_t>(in), static_cast<std::size_t>(out), rng));
  ps.add(prefix + ".b", grp, nn::Matrix::Zero(1, out));
}

inline void apply_learning_rates(Model& m) {
  auto& ps = m.params;
  ps.set_lr(nn::Group::encoder, m.config.lr_encoder);
  ps.set_lr(nn::Group::gazetteer_net, m.config.lr_gazetteer);
  ps.set_lr(nn::Group::proj_gaz, m.config.lr_gazetteer);
  ps.set_lr(nn::Group::proj_enc, m.config.lr_gazetteer);
  ps.set_lr(nn::Group::fusion, m.config.lr_classifier);
  ps.set_lr(nn::Group::classifier, m.config.lr_classifier);
}

}  // namespace detail

inline Model init_model(const TrainConfig& config, Vocabulary vocab) {
  config.validate();
  Model m{config, std::move(vocab), {}};
  std::mt19937_64 rng(config.seed);
  auto& ps = m.params;
  const int d = config.hidden, h = d / 2, k = taxonomy::kTagCount;
  ps.add("encoder.embedding", nn::Group::encoder,
         nn::uniform(m.vocab.size(), static_cast<std::size_t>(config.embedding_dim), 0.1, rng));
  detail::add_lstm(ps, "encoder.fwd", nn::Group::encoder, config.embedding_dim, h, rng);
  detail::add_lstm(ps, "encoder.bwd", nn::Group::encoder, config.embedding_dim, h, rng);
  if (config.use_gazetteer) {
    detail::add_dense(ps, "gazetteer.dense", nn::Group::gazetteer_net, k, d, rng);
    detail::add_lstm(ps, "gazetteer.fwd", nn::Group::gazetteer_net, d, h, rng);
    detail::add_lstm(ps, "gazetteer.bwd", nn::Group::gazetteer_net, d, h, rng);
    detail::add_dense(ps, "proj_gaz", nn::Group::proj_gaz, d, k, rng);
    detail::add_dense(ps, "proj_enc", nn::Group::proj_enc, d, k, rng);
    if (config.fusion == FusionMode::weighted_sum) ps.add("fusion.lambda", nn::Group::fusion, nn::Matrix::Zero(1, d));
  }
  const int f = m.fused_width();
  switch (config.classifier) {
    case HeadKind::softmax:
      detail::add_dense(ps, "head", nn::Group::classifier, f, k, rng);
      break;
    case HeadKind::crf:
      detail::add_dense(ps, "head", nn::Group::classifier, f, k, rng);
      ps.add("crf.transitions", nn::Group::classifier, nn::Matrix::Zero(k, k));
      ps.add("crf.start", nn::Group::classifier, nn::Matrix::Zero(1, k));
      ps.add("crf.end", nn::Group::classifier, nn::Matrix::Zero(1, k));
      break;
    case HeadKind::span:
      detail::add_dense(ps, "span.start", nn::Group::classifier, f, kSpanClasses, rng);
      detail::add_dense(ps, "span.end", nn::Group::classifier, f, kSpanClasses, rng);
      break;
  }
  detail::apply_learning_rates(m);
  return m;
}

// ---------------------------------------------------------------------------
// Inputs

inline nn::Matrix to_matrix(const FeatureMatrix& f) {
  nn::Matrix m(static_cast<Eigen::Index>(f.rows()), FeatureMatrix::kWidth);
  for (std::size_t r = 0; r < f.rows(); ++r)
    for (int c = 0; c < FeatureMatrix::kWidth; ++c) m(static_cast<Eigen::Index>(r), c) = f(r, c);
  return m;
}

// One-hot of each word's gold tag on its first subword; other subword rows are zero.
inline nn::Matrix gold_tag_features(const Sentence& s, const TokenizedSentence& ts) {
  FeatureMatrix words(s.size());
  for (std::size_t w = 0; w < s.size(); ++w) words(w, s.tags[w]) = 1;
  return to_matrix(align_to_subwords(words, ts));
}

// First-subword rows of tokens that lie inside gold entities, in sentence order.
inline std::vector<int> entity_row_indices(const Sentence& s, const TokenizedSentence& ts) {
  std::vector<int> rows;
  for (const auto& e : extract_entities(s))
    for (int w = e.start; w <= e.end; ++w) rows.push_back(ts.first_subword_of_word[static_cast<std::size_t>(w)]);
  return rows;
}

inline nn::Matrix entity_rows(const nn::Matrix& logits, const Sentence& s, const TokenizedSentence& ts) {
  const auto rows = entity_row_indices(s, ts);
  nn::Matrix out(static_cast<Eigen::Index>(rows.size()), logits.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = logits.row(rows[i]);
  return out;
}

// A sentence prepared for the network.
struct Example {
  std::vector<int> ids;
  std::vector<int> first_subword;
  std::vector<TagIndex> tags;
  std::vector<Entity> entities;
  nn::Matrix gold_features;     // [N, 67]
  nn::Matrix matched_features;  // [N, 67]
  std::vector<int> entity_rows;
  std::size_t unknown = 0;
};

inline Example make_example(const Model& m, const Sentence& s, const FeatureMatrix& word_features) {
  Example ex;
  const auto ts = subword_tokenize(s, m.config.subword_mode());
  for (const auto& sw : ts.subwords) {
    const int id = m.vocab.lookup(to_lower(sw));
    if (id == Vocabulary::kUnknown) ++ex.unknown;
    ex.ids.push_back(id);
  }
  ex.first_subword = ts.first_subword_of_word;
  ex.tags = s.tags;
  ex.entities = extract_entities(s);
  if (m.has_gazetteer()) {
    ex.gold_features = gold_tag_features(s, ts);
    ex.matched_features = to_matrix(align_to_subwords(word_features, ts));
  }
  ex.entity_rows = entity_row_indices(s, ts);
  return ex;
}

inline Example make_example(const Model& m, const Sentence& s, const SearchTree& tree) {
  return make_example(m, s, gazetteer_features(tree, s.tokens));
}

// ---------------------------------------------------------------------------
// Forward pass

inline nn::Var fuse(nn::Graph& g, nn::Var s, nn::Var gz, FusionMode mode, std::optional<nn::Var> lambda = {}) {
  const auto& sv = g.value(s);
  const auto& gv = g.value(gz);
  if (sv.rows() != gv.rows() || sv.cols() != gv.cols()) throw ShapeError("fuse: encoder and gazetteer shapes differ");
  if (mode == FusionMode::concat) return nn::concat_cols(g, s, gz);
  if (!lambda) throw Error("fuse: weighted_sum needs a lambda");
  return nn::convex_mix(g, s, gz, *lambda);
}

// Values of the gradient-stopped KL arguments. Capturing them at one point and
// replaying them as constants gives a loss whose true derivative there equals
// the stop-gradient backward pass, which is what finite differences can check.
struct StopGradientTape {
  enum class Mode { capture, replay } mode = Mode::capture;
  std::vector<nn::Matrix> values;
  std::size_t cursor = 0;

  nn::Var target(nn::Graph& g, nn::Var x) {
    if (mode == Mode::capture) {
      values.push_back(g.value(x));
      return x;
    }
    if (cursor >= values.size()) throw Error("stop-gradient tape exhausted");
    return g.constant(values[cursor++]);
  }
};

// KL(a||b) + KL(b||a); each term only trains its second argument.
inline nn::Var symmetric_kl(nn::Graph& g, nn::Var a, nn::Var b, StopGradientTape* tape = nullptr) {
  const auto pa = tape ? tape->target(g, a) : a;
  const auto pb = tape ? tape->target(g, b) : b;
  return nn::linear_combination(g, {nn::kl_stopgrad(g, pa, b), nn::kl_stopgrad(g, pb, a)}, {1.0, 1.0});
}

struct HeadOutput {
  nn::Var scores;  // emissions [M, 67] or span start logits [M, 34]
  std::optional<nn::Var> end_scores;
};

// Builds graph nodes for one model. `learn` is the store receiving gradients
// (the model's own store) or null for inference; frozen groups become
// constants either way. Dropout runs only when `rng` is given.
class ForwardPass {
 public:
  ForwardPass(nn::Graph& g, const Model& m, nn::ParamStore* learn, std::mt19937_64* rng = nullptr)
      : g_(g), m_(m), learn_(learn), rng_(rng), cache_(m.params.size()) {}

  nn::Graph& graph() { return g_; }

  nn::Var leaf(std::string_view name) {
    const auto i = m_.params.index_of(name);
    if (!cache_[i]) {
      const auto& p = m_.params.at(i);
      cache_[i] = trainable(p.group) ? g_.param(learn_->at(i)) : g_.constant(p.value);
    }
    return *cache_[i];
  }

  nn::Var encoder(const Example& ex) {
    const auto i = m_.params.index_of("encoder.embedding");
    nn::Var e;
    if (trainable(nn::Group::encoder)) {
      e = nn::embedding(g_, learn_->at(i), ex.ids);
    } else {
      const auto& table = m_.params.at(i).value;
      nn::Matrix rows(static_cast<Eigen::Index>(ex.ids.size()), table.cols());
      for (std::size_t r = 0; r < ex.ids.size(); ++r) rows.row(static_cast<Eigen::Index>(r)) = table.row(ex.ids[r]);
      e = g_.constant(std::move(rows));
    }
    return nn::bilstm(g_, e, lstm("encoder.fwd"), lstm("encoder.bwd"));
  }

  nn::Var gazetteer_net(const nn::Matrix& features) {
    auto x = nn::dense(g_, g_.constant(features), leaf("gazetteer.dense.W"), leaf("gazetteer.dense.b"));
    return nn::bilstm(g_, x, lstm("gazetteer.fwd"), lstm("gazetteer.bwd"));
  }

  nn::Var project_encoder(nn::Var s) { return nn::dense(g_, s, leaf("proj_enc.W"), leaf("proj_enc.b")); }
  nn::Var project_gazetteer(nn::Var gz) { return nn::dense(g_, gz, leaf("proj_gaz.W"), leaf("proj_gaz.b")); }

  nn::Var drop(nn::Var x) { return rng_ ? nn::dropout(g_, x, m_.config.dropout, *rng_) : x; }

  // Word-level representation fed to the head: first-subword rows of the fused output.
  nn::Var head_input(nn::Var s, const Example& ex) {
    nn::Var fused = drop(s);
    if (m_.has_gazetteer()) {
      auto gz = gazetteer_net(ex.matched_features);
      std::optional<nn::Var> lambda;
      if (m_.config.fusion == FusionMode::weighted_sum) lambda = leaf("fusion.lambda");
      fused = fuse(g_, fused, gz, m_.config.fusion, lambda);
    }
    fused = drop(fused);
    return nn::gather_rows(g_, fused, ex.first_subword);
  }

  HeadOutput head(nn::Var rows) {
    if (m_.config.classifier == HeadKind::span)
      return {nn::dense(g_, rows, leaf("span.start.W"), leaf("span.start.b")),
              nn::dense(g_, rows, leaf("span.end.W"), leaf("span.end.b"))};
    return {nn::dense(g_, rows, leaf("head.W"), leaf("head.b")), std::nullopt};
  }

  nn::Var head_loss(const HeadOutput& out, const Example& ex) {
    switch (m_.config.classifier) {
      case HeadKind::softmax:
        return softmax_loss(g_, out.scores, ex.tags);
      case HeadKind::crf:
        return crf_nll(g_, out.scores, leaf("crf.transitions"), leaf("crf.start"), leaf("crf.end"), ex.tags,
                       m_.config.crf_bio_mask);
      case HeadKind::span:
        return span_loss(g_, out.scores, *out.end_scores, ex.entities, ex.tags.size());
    }
    throw Error("unknown head");
  }

 private:
  bool trainable(nn::Group grp) const { return learn_ != nullptr && !learn_->frozen(grp); }

  nn::LstmVars lstm(const std::string& prefix) {
    return {leaf(prefix + ".Wx"), leaf(prefix + ".Wh"), leaf(prefix + ".b")};
  }

  nn::Graph& g_;
  const Model& m_;
  nn::ParamStore* learn_;
  std::mt19937_64* rng_;
  std::vector<std::optional<nn::Var>> cache_;
};

// ---------------------------------------------------------------------------
// Losses and steps

enum class Stage { adapt = 1, joint = 2 };

struct LossBreakdown {
  double l1 = 0.0;  // sentence-level alignment
  double l2 = 0.0;  // entity-level alignment
  double l3 = 0.0;  // tagging loss
  double l4 = 0.0;  // optimized objective
};

// Freezing used by each stage: stage 1 only moves the gazetteer network and
// the two projections.
inline void set_stage(Model& m, Stage stage) {
  for (int gi = 0; gi < nn::kGroupCount; ++gi) {
    const auto grp = static_cast<nn::Group>(gi);
    const bool adapted = grp == nn::Group::gazetteer_net || grp == nn::Group::proj_gaz || grp == nn::Group::proj_enc;
    m.params.set_frozen(grp, stage == Stage::adapt && !adapted);
  }
}

// Batch objective. Every term is a mean over the batch's sentences (L2 over
// those with at least one entity row, 0 if none). Stage 1 optimizes L1 + L2;
// stage 2 optimizes alpha * (L1 + L2) + L3. With `backward` set, gradients
// are accumulated into the model's unfrozen parameters.
inline LossBreakdown batch_loss(Model& m, const std::vector<const Example*>& batch, Stage stage, bool backward,
                                std::mt19937_64* dropout_rng = nullptr, StopGradientTape* tape = nullptr) {
  if (batch.empty()) throw Error("batch_loss: empty batch");
  if (stage == Stage::adapt && !m.has_gazetteer()) throw Error("stage 1 needs the gazetteer branch");
  nn::Graph g;
  ForwardPass fp(g, m, &m.params, stage == Stage::joint ? dropout_rng : nullptr);
  std::vector<nn::Var> l1, l2, l3;
  for (const Example* ex : batch) {
    if (ex->ids.empty()) continue;
    const auto s = fp.encoder(*ex);
    if (m.has_gazetteer()) {
      const auto gt = fp.project_gazetteer(fp.gazetteer_net(ex->gold_features));
      const auto st = fp.project_encoder(s);
      l1.push_back(symmetric_kl(g, gt, st, tape));
      if (!ex->entity_rows.empty())
        l2.push_back(
            symmetric_kl(g, nn::gather_rows(g, gt, ex->entity_rows), nn::gather_rows(g, st, ex->entity_rows), tape));
    }
    if (stage == Stage::joint) l3.push_back(fp.head_loss(fp.head(fp.head_input(s, *ex)), *ex));
  }
  auto mean = [&](const std::vector<nn::Var>& terms) {
    if (terms.empty()) return g.constant(nn::Matrix::Zero(1, 1));
    return nn::linear_combination(g, terms, std::vector<double>(terms.size(), 1.0 / static_cast<double>(terms.size())));
  };
  const auto L1 = mean(l1), L2 = mean(l2), L3 = mean(l3);
  const double alpha = m.config.effective_alpha();
  const auto L4 = stage == Stage::adapt ? nn::linear_combination(g, {L1, L2}, {1.0, 1.0})
                                         : nn::linear_combination(g, {L1, L2, L3}, {alpha, alpha, 1.0});
  if (backward) g.backward(L4);
  return {g.scalar(L1), g.scalar(L2), g.scalar(L3), g.scalar(L4)};
}

inline nn::AdamWConfig optimizer_config(const TrainConfig& c) {
  nn::AdamWConfig o;
  o.weight_decay = c.weight_decay;
  o.max_grad_norm = c.max_grad_norm;
  return o;
}

// One optimizer update on a batch under the stage's freezing.
inline LossBreakdown train_step(Model& m, const std::vector<const Example*>& batch, Stage stage,
                                std::mt19937_64* dropout_rng = nullptr) {
  set_stage(m, stage);
  m.params.zero_grad();
  const auto losses = batch_loss(m, batch, stage, true, dropout_rng);
  nn::optimizer_step(m.params, optimizer_config(m.config));
  return losses;
}

// ---------------------------------------------------------------------------
// Inference

struct Prediction {
  nn::Matrix logits;  // [M, 67] emissions, or [M, 68] span start|end
  std::vector<TagIndex> tags;
};

inline nn::Matrix crf_transitions_for_decode(const Model& m) {
  nn::Matrix t = m.params.get("crf.transitions").value;
  if (m.config.crf_bio_mask) t += bio_transition_mask();
  return t;
}

// Decodes per-word logits produced by `m` into BIO-valid tags.
inline std::vector<TagIndex> decode(const Model& m, const nn::Matrix& logits) {
  if (logits.rows() == 0) return {};
  std::vector<TagIndex> tags;
  switch (m.config.classifier) {
    case HeadKind::softmax:
      return softmax_decode(logits);
    case HeadKind::span:
      return span_decode_tags(logits);
    case HeadKind::crf: {
      nn::Matrix start = m.params.get("crf.start").value;
      if (m.config.crf_bio_mask) start += bio_start_mask();
      const nn::Matrix trans = crf_transitions_for_decode(m);
      tags = crf_viterbi(CrfView{logits, trans, start, m.params.get("crf.end").value});
      repair_bio(tags);
      return tags;
    }
  }
  return tags;
}

inline Prediction predict_example(const Model& m, const Example& ex) {
  Prediction p;
  if (ex.ids.empty()) {
    p.logits = nn::Matrix(0, m.config.classifier == HeadKind::span ? 2 * kSpanClasses : taxonomy::kTagCount);
    return p;
  }
  nn::Graph g;
  ForwardPass fp(g, m, nullptr);
  const auto out = fp.head(fp.head_input(fp.encoder(ex), ex));
  if (out.end_scores) {
    const auto& a = g.value(out.scores);
    const auto& b = g.value(*out.end_scores);
    p.logits.resize(a.rows(), a.cols() + b.cols());
    p.logits << a, b;
  } else {
    p.logits = g.value(out.scores);
  }
  p.tags = decode(m, p.logits);
  return p;
}

// Prediction with explicit word-level gazetteer features ([M, 67]).
inline Prediction predict_with_features(const Model& m, const Sentence& s, const FeatureMatrix& word_features) {
  return predict_example(m, make_example(m, s, word_features));
}

struct PredictResult {
  std::vector<Prediction> predictions;
  std::size_t unknown_subwords = 0;
};

inline PredictResult predict(const Model& m, const std::vector<Sentence>& sentences, const Gazetteer& gazetteer) {
  const auto tree = build_tree(gazetteer);
  PredictResult r;
  for (const auto& s : sentences) {
    const auto ex = make_example(m, s, tree);
    r.unknown_subwords += ex.unknown;
    r.predictions.push_back(predict_example(m, ex));
  }
  return r;
}

// Sentences carrying the predicted tags.
inline std::vector<Sentence> tagged(const std::vector<Sentence>& sentences, const std::vector<Prediction>& preds) {
  if (sentences.size() != preds.size()) throw Error("tagged: size mismatch");
  std::vector<Sentence> out = sentences;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].tags = preds[i].tags;
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::string_view kModelKind = "scdag-model";

inline nn::Container to_container(const Model& m) {
  nn::Container c;
  c.meta = {{"kind", kModelKind}, {"config", to_json(m.config)}, {"vocab", m.vocab.tokens()}, {"seed", m.config.seed}};
  for (const auto& p : m.params.params()) c.tensors.push_back({p.name, p.value});
  return c;
}

inline Model from_container(const nn::Container& c) {
  if (!c.meta.contains("kind") || c.meta["kind"] != kModelKind) throw Error("container is not a model checkpoint");
  Model m = init_model(config_from_json(c.meta.at("config")),
                       Vocabulary::from_tokens(c.meta.at("vocab").get<std::vector<std::string>>()));
  if (c.tensors.size() != m.params.size())
    throw Error("checkpoint has " + std::to_string(c.tensors.size()) + " tensors, model expects " +
                std::to_string(m.params.size()));
  for (auto& p : m.params.params()) {
    const auto& v = c.get(p.name);
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) throw ShapeError("checkpoint shape mismatch for " + p.name);
    p.value = v;
  }
  return m;
}

inline void save_model(const Model& m, const std::string& path) { nn::save_container(to_container(m), path); }
inline Model load_model(const std::string& path) { return from_container(nn::load_container(path)); }

// ---------------------------------------------------------------------------
// Training loop

struct StepLog {
  Stage stage = Stage::adapt;
  int epoch = 0;
  std::int64_t step = 0;
  LossBreakdown losses;
};

struct EpochLog {
  int epoch = 0;
  double dev_fine_f1 = 0.0;
  LossBreakdown mean_losses;
};

struct TrainResult {
  Model model;  // best on dev (last stage-2 epoch if there is no dev set)
  double best_dev_f1 = 0.0;
  int best_epoch = 0;  // 0: no stage-2 epoch ran
  std::vector<EpochLog> history;
  std::vector<std::string> warnings;
  std::int64_t steps = 0;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EpochLog&)> on_epoch;
};

inline nlohmann::json to_json(const LossBreakdown& l) {
  return {{"L1", l.l1}, {"L2", l.l2}, {"L3", l.l3}, {"L4", l.l4}};
}

inline nlohmann::json to_json(const StepLog& s) {
  auto j = to_json(s.losses);
  j["stage"] = static_cast<int>(s.stage);
  j["epoch"] = s.epoch;
  j["step"] = s.step;
  return j;
}

inline double dev_fine_f1(const Model& m, const std::vector<Sentence>& dev, const std::vector<Example>& examples) {
  std::vector<Prediction> preds;
  preds.reserve(examples.size());
  for (const auto& ex : examples) preds.push_back(predict_example(m, ex));
  return evaluate(tagged(dev, preds), dev).fine_macro.f1;
}

inline TrainResult train(const TrainConfig& config, const std::vector<Sentence>& train_set,
                         const std::vector<Sentence>& dev_set, const Gazetteer& gazetteer, const TrainHooks& hooks = {}) {
  config.validate();
  if (train_set.empty()) throw Error("train: empty training set");
  TrainResult result;
  if (config.use_gazetteer && gazetteer.empty())
    result.warnings.push_back("gazetteer is empty; matched features are all O");

  Model model = init_model(config, Vocabulary::build(train_set, config.subword_mode()));
  const auto tree = build_tree(gazetteer);
  std::vector<Example> examples, dev_examples;
  for (const auto& s : train_set) examples.push_back(make_example(model, s, tree));
  for (const auto& s : dev_set) dev_examples.push_back(make_example(model, s, tree));

  std::mt19937_64 order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 dropout_rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  auto run_epoch = [&](Stage stage, int epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    LossBreakdown sum;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
      std::vector<const Example*> batch;
      for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) batch.push_back(&examples[order[j]]);
      const auto l = train_step(model, batch, stage, &dropout_rng);
      ++result.steps;
      ++batches;
      sum.l1 += l.l1;
      sum.l2 += l.l2;
      sum.l3 += l.l3;
      sum.l4 += l.l4;
      if (hooks.on_step) hooks.on_step({stage, epoch, result.steps, l});
    }
    const double n = static_cast<double>(batches);
    return LossBreakdown{sum.l1 / n, sum.l2 / n, sum.l3 / n, sum.l4 / n};
  };

  if (config.use_gazetteer)
    for (int e = 1; e <= config.epochs_stage1; ++e) run_epoch(Stage::adapt, e);

  std::optional<Model> best;
  double best_f1 = -1.0;
  for (int e = 1; e <= config.epochs_stage2; ++e) {
    EpochLog log;
    log.epoch = e;
    log.mean_losses = run_epoch(Stage::joint, e);
    log.dev_fine_f1 = dev_set.empty() ? 0.0 : dev_fine_f1(model, dev_set, dev_examples);
    if (dev_set.empty() || log.dev_fine_f1 > best_f1) {
      best_f1 = log.dev_fine_f1;
      best = model;
      result.best_epoch = e;
    }
    result.history.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);
  }
  if (!best) {
    best = model;
    if (!dev_set.empty()) best_f1 = dev_fine_f1(model, dev_set, dev_examples);
  }
  result.model = std::move(*best);
  result.best_dev_f1 = std::max(0.0, best_f1);
  for (int gi = 0; gi < nn::kGroupCount; ++gi) result.model.params.set_frozen(static_cast<nn::Group>(gi), false);
  return result;
}

}  // namespace scdag
