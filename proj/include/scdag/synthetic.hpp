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

// Synthetic corpora for end-to-end checks. Entity surfaces are pseudo-words
// and most contexts are label-agnostic, so a surface's label can only be
// learned from training occurrences or looked up in the gazetteer. Dev
// sentences mix seen surfaces with surfaces never seen in training.

#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "scdag/corpus.hpp"
#include "scdag/error.hpp"
#include "scdag/gazetteer.hpp"
#include "scdag/nn/tensor.hpp"
#include "scdag/taxonomy.hpp"

namespace scdag::synthetic {

struct Options {
  std::size_t train_sentences = 400;
  std::size_t dev_sentences = 100;
  std::vector<LabelIndex> labels = default_labels();
  std::size_t surfaces_per_label = 24;
  double unseen_fraction = 0.5;    // share of each label's surfaces kept out of training
  double dev_unseen_rate = 0.5;    // probability a dev entity uses an unseen surface
  double coverage = 0.6;           // probability a surface is in the gazetteer
  double ambiguous_rate = 0.1;     // probability a gazetteer surface also gets a wrong label
  std::uint64_t seed = 1;

  static std::vector<LabelIndex> default_labels() {
    std::vector<LabelIndex> out;
    for (const char* name : {"HumanSettlement", "VisualWork", "MusicalGRP", "Artist", "Food", "Clothing", "Disease",
                             "SportsManager"})
      out.push_back(taxonomy::label_index(name));
    return out;
  }
};

struct Corpus {
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
  Gazetteer gazetteer;
  // surfaces[i] lists label labels[i]'s surfaces; the first `seen` are used in training.
  std::vector<std::vector<std::vector<std::string>>> surfaces;
  std::size_t seen = 0;
};

namespace detail {

inline std::string pseudo_word(std::mt19937_64& rng) {
  static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "tr"};
  static const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::uniform_int_distribution<int> syl(2, 3), on(0, 17), vo(0, 6);
  std::string w;
  for (int i = syl(rng); i > 0; --i) {
    w += onsets[on(rng)];
    w += vowels[vo(rng)];
  }
  return w;
}

// Contexts with `_` marking entity slots.
inline const std::vector<std::vector<std::string>>& templates() {
  static const std::vector<std::vector<std::string>> t = {
      {"where", "to", "find", "_"},
      {"tell", "me", "about", "_"},
      {"what", "is", "_"},
      {"_"},
      {"i", "heard", "about", "_", "yesterday"},
      {"show", "me", "_", "and", "_"},
      {"is", "_", "better", "than", "_"},
      {"news", "about", "_"},
      {"_", "was", "mentioned", "twice"},
      {"search", "for", "_", "please"},
      {"compare", "_", "with", "_"},
      {"everyone", "talks", "about", "_", "now"},
  };
  return t;
}

}  // namespace detail

inline Corpus generate(const Options& opt) {
  if (opt.labels.empty()) throw Error("synthetic: no labels");
  if (opt.surfaces_per_label < 2) throw Error("synthetic: need at least two surfaces per label");
  std::mt19937_64 rng(opt.seed);
  Corpus c;
  c.seen = std::max<std::size_t>(
      1, opt.surfaces_per_label -
             static_cast<std::size_t>(opt.unseen_fraction * static_cast<double>(opt.surfaces_per_label)));

  std::set<std::string> used;
  for (const auto& t : detail::templates())
    for (const auto& w : t) used.insert(w);
  std::uniform_int_distribution<int> length(1, 2);
  for (std::size_t li = 0; li < opt.labels.size(); ++li) {
    std::vector<std::vector<std::string>> pool;
    std::set<std::string> joined;
    while (pool.size() < opt.surfaces_per_label) {
      std::vector<std::string> s;
      for (int k = length(rng); k > 0; --k) s.push_back(detail::pseudo_word(rng));
      const auto key = join(s);
      if (used.contains(s.front()) || !joined.insert(key).second) continue;
      used.insert(s.front());
      pool.push_back(std::move(s));
    }
    c.surfaces.push_back(std::move(pool));
  }

  std::bernoulli_distribution covered(opt.coverage), ambiguous(opt.ambiguous_rate);
  std::uniform_int_distribution<std::size_t> other_label(0, opt.labels.size() - 1);
  for (std::size_t li = 0; li < opt.labels.size(); ++li)
    for (const auto& s : c.surfaces[li]) {
      if (!covered(rng)) continue;
      c.gazetteer.add(opt.labels[li], s);
      if (opt.labels.size() > 1 && ambiguous(rng)) {
        std::size_t o = other_label(rng);
        if (o == li) o = (o + 1) % opt.labels.size();
        c.gazetteer.add(opt.labels[o], s);
      }
    }

  const auto& tpl = detail::templates();
  std::uniform_int_distribution<std::size_t> pick_template(0, tpl.size() - 1), pick_label(0, opt.labels.size() - 1);
  auto make = [&](bool dev, std::size_t n, std::vector<Sentence>& out, const std::string& prefix) {
    std::bernoulli_distribution unseen(opt.dev_unseen_rate);
    for (std::size_t i = 0; i < n; ++i) {
      Sentence s;
      s.id = prefix + std::to_string(i);
      for (const auto& w : tpl[pick_template(rng)]) {
        if (w != "_") {
          s.tokens.push_back(w);
          s.tags.push_back(taxonomy::kOutside);
          continue;
        }
        const std::size_t li = pick_label(rng);
        const auto& pool = c.surfaces[li];
        std::size_t lo = 0, hi = c.seen - 1;
        if (dev && c.seen < pool.size() && unseen(rng)) {
          lo = c.seen;
          hi = pool.size() - 1;
        }
        const auto& surface = pool[std::uniform_int_distribution<std::size_t>(lo, hi)(rng)];
        for (std::size_t k = 0; k < surface.size(); ++k) {
          s.tokens.push_back(surface[k]);
          s.tags.push_back(k == 0 ? taxonomy::begin_tag(opt.labels[li]) : taxonomy::inside_tag(opt.labels[li]));
        }
      }
      out.push_back(std::move(s));
    }
  };
  make(false, opt.train_sentences, c.train, "train-");
  make(true, opt.dev_sentences, c.dev, "dev-");
  return c;
}

// Per-word softmax scores of one strong tagger (gold one-hot times `margin`
// plus noise shared by all copies) and `copies` independently perturbed
// versions of it. Result is indexed [copy][sentence].
inline std::vector<std::vector<nn::Matrix>> noisy_copies(const std::vector<Sentence>& gold, std::size_t copies,
                                                         double margin, double shared_sd, double copy_sd,
                                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> shared(0.0, shared_sd), own(0.0, copy_sd);
  std::vector<nn::Matrix> base;
  for (const auto& s : gold) {
    nn::Matrix m(static_cast<Eigen::Index>(s.size()), taxonomy::kTagCount);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = shared(rng);
    for (std::size_t t = 0; t < s.size(); ++t) m(static_cast<Eigen::Index>(t), s.tags[t]) += margin;
    base.push_back(std::move(m));
  }
  std::vector<std::vector<nn::Matrix>> runs(copies);
  for (auto& run : runs)
    for (const auto& b : base) {
      nn::Matrix m = b;
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += own(rng);
      run.push_back(std::move(m));
    }
  return runs;
}

}  // namespace scdag::synthetic
