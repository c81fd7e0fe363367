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

// Token-level prefix tree over gazetteer surfaces and the 67-slot BIO
// gazetteer features derived from its matches.

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "scdag/corpus.hpp"
#include "scdag/error.hpp"
#include "scdag/gazetteer.hpp"
#include "scdag/taxonomy.hpp"

namespace scdag {

using LabelMask = std::uint64_t;  // bit l set <=> fine label l
static_assert(taxonomy::kFineCount <= 64);

class SearchTree {
 public:
  struct Node {
    std::unordered_map<std::string, int> children;
    LabelMask labels = 0;  // labels whose surface ends exactly here
  };

  SearchTree() : nodes_(1) {}

  explicit SearchTree(const Gazetteer& g) : nodes_(1) {
    for (LabelIndex l = 0; l < taxonomy::kFineCount; ++l)
      for (const auto& surface : g.bucket(l)) insert(split_whitespace(surface), l);
  }

  void insert(const std::vector<std::string>& tokens, LabelIndex label) {
    if (tokens.empty()) return;
    int node = 0;
    for (const auto& t : tokens) {
      auto it = nodes_[static_cast<std::size_t>(node)].children.find(t);
      if (it == nodes_[static_cast<std::size_t>(node)].children.end()) {
        nodes_.emplace_back();
        const int child = static_cast<int>(nodes_.size()) - 1;
        nodes_[static_cast<std::size_t>(node)].children.emplace(t, child);
        node = child;
      } else {
        node = it->second;
      }
    }
    nodes_[static_cast<std::size_t>(node)].labels |= LabelMask{1} << label;
  }

  // Labels under which `tokens` is a complete surface.
  LabelMask lookup(std::span<const std::string> tokens) const {
    int node = 0;
    for (const auto& t : tokens) {
      node = child(node, t);
      if (node < 0) return 0;
    }
    return tokens.empty() ? 0 : nodes_[static_cast<std::size_t>(node)].labels;
  }

  int child(int node, const std::string& token) const {
    const auto& children = nodes_[static_cast<std::size_t>(node)].children;
    auto it = children.find(token);
    return it == children.end() ? -1 : it->second;
  }

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& root() const { return nodes_.front(); }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

inline SearchTree build_tree(const Gazetteer& g) { return SearchTree(g); }

struct Match {
  int start = 0;
  int end = 0;  // inclusive
  LabelIndex label = 0;

  auto operator<=>(const Match&) const = default;
};

// Longest match per (start position, label), sorted by (start, label).
// Tokens must already be lowercased.
inline std::vector<Match> match_sentence(const SearchTree& tree, std::span<const std::string> tokens) {
  std::vector<Match> out;
  const int m = static_cast<int>(tokens.size());
  std::array<int, taxonomy::kFineCount> longest{};
  for (int i = 0; i < m; ++i) {
    LabelMask seen = 0;
    int node = 0;
    for (int j = i; j < m; ++j) {
      node = tree.child(node, tokens[static_cast<std::size_t>(j)]);
      if (node < 0) break;
      LabelMask here = tree.node(node).labels;
      seen |= here;
      while (here) {
        const int l = std::countr_zero(here);
        longest[static_cast<std::size_t>(l)] = j;
        here &= here - 1;
      }
    }
    while (seen) {
      const int l = std::countr_zero(seen);
      out.push_back({i, longest[static_cast<std::size_t>(l)], l});
      seen &= seen - 1;
    }
  }
  return out;
}

inline std::vector<Match> match_sentence(const SearchTree& tree, const std::vector<std::string>& tokens) {
  return match_sentence(tree, std::span<const std::string>(tokens));
}

// Rows of 67 binary slots laid out as the BIO tag space.
class FeatureMatrix {
 public:
  static constexpr int kWidth = taxonomy::kTagCount;

  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t rows) : rows_(rows), data_(rows * kWidth, 0) {}

  std::size_t rows() const { return rows_; }
  std::uint8_t operator()(std::size_t r, int c) const { return data_[r * kWidth + static_cast<std::size_t>(c)]; }
  std::uint8_t& operator()(std::size_t r, int c) { return data_[r * kWidth + static_cast<std::size_t>(c)]; }
  std::span<const std::uint8_t> row(std::size_t r) const { return {data_.data() + r * kWidth, kWidth}; }

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::vector<std::uint8_t> data_;
};

// B-l at a match start, I-l on the rest of the span; O on untouched tokens.
inline FeatureMatrix featurize(const std::vector<Match>& matches, std::size_t length) {
  FeatureMatrix f(length);
  std::vector<bool> touched(length, false);
  for (const auto& mt : matches) {
    if (mt.start < 0 || mt.end < mt.start || static_cast<std::size_t>(mt.end) >= length)
      throw ShapeError("featurize: match outside sentence");
    f(static_cast<std::size_t>(mt.start), taxonomy::begin_tag(mt.label)) = 1;
    for (int k = mt.start + 1; k <= mt.end; ++k) f(static_cast<std::size_t>(k), taxonomy::inside_tag(mt.label)) = 1;
    for (int k = mt.start; k <= mt.end; ++k) touched[static_cast<std::size_t>(k)] = true;
  }
  for (std::size_t r = 0; r < length; ++r)
    if (!touched[r]) f(r, taxonomy::kOutside) = 1;
  return f;
}

// Word rows go to each word's first subword; every other subword row is zero.
inline FeatureMatrix align_to_subwords(const FeatureMatrix& words, const TokenizedSentence& ts) {
  if (words.rows() != ts.word_count())
    throw ShapeError("align_to_subwords: " + std::to_string(words.rows()) + " feature rows for " +
                     std::to_string(ts.word_count()) + " words");
  FeatureMatrix out(ts.size());
  for (std::size_t w = 0; w < words.rows(); ++w) {
    const auto dst = static_cast<std::size_t>(ts.first_subword_of_word[w]);
    for (int c = 0; c < FeatureMatrix::kWidth; ++c) out(dst, c) = words(w, c);
  }
  return out;
}

// Convenience: lowercases, matches and featurizes a sentence's words.
inline FeatureMatrix gazetteer_features(const SearchTree& tree, const std::vector<std::string>& tokens) {
  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const auto& t : tokens) lowered.push_back(to_lower(t));
  return featurize(match_sentence(tree, lowered), tokens.size());
}

// ---------------------------------------------------------------------------
// Debug output

inline nlohmann::json matches_to_json(const Sentence& s, const std::vector<Match>& matches) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : matches) {
    std::vector<std::string> span(s.tokens.begin() + m.start, s.tokens.begin() + m.end + 1);
    arr.push_back({{"start", m.start},
                   {"end", m.end},
                   {"label", std::string(taxonomy::fine_name(m.label))},
                   {"surface", join(span)}});
  }
  return {{"id", s.id}, {"tokens", s.tokens}, {"matches", arr}};
}

namespace detail {
inline std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace detail

inline std::string feature_csv_header() {
  std::string out = "sentence,index,token";
  for (TagIndex t = 0; t < taxonomy::kTagCount; ++t) out += "," + taxonomy::tag_name(t);
  return out + "\n";
}

// One row per token: sentence number, token index, token, 67 slots.
inline std::string feature_csv_rows(std::size_t sentence_no, const std::vector<std::string>& tokens,
                                    const FeatureMatrix& f) {
  std::string out;
  for (std::size_t r = 0; r < f.rows(); ++r) {
    out += std::to_string(sentence_no) + "," + std::to_string(r) + "," + detail::csv_field(tokens[r]);
    for (int c = 0; c < FeatureMatrix::kWidth; ++c) out += f(r, c) ? ",1" : ",0";
    out += '\n';
  }
  return out;
}

}  // namespace scdag
