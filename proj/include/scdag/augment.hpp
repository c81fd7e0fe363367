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

// Data augmentation driven by a gazetteer: gold entity replacement and
// template slotting. Both are deterministic for a given seed.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "scdag/corpus.hpp"
#include "scdag/gazetteer.hpp"
#include "scdag/taxonomy.hpp"

namespace scdag {

struct AugmentResult {
  std::vector<Sentence> sentences;
  std::size_t warnings = 0;  // entities left unchanged or templates skipped
};

namespace detail {

inline std::vector<std::string> draw_surface(const Gazetteer::Bucket& bucket, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, bucket.size() - 1);
  auto it = bucket.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(pick(rng)));
  return split_whitespace(*it);
}

inline void append_entity(Sentence& out, const std::vector<std::string>& tokens, LabelIndex label) {
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    out.tokens.push_back(tokens[k]);
    out.tags.push_back(k == 0 ? taxonomy::begin_tag(label) : taxonomy::inside_tag(label));
  }
}

}  // namespace detail

// Replaces each gold entity, with probability `rate`, by a random entry of the
// same label. Replacement surfaces are retokenized on whitespace.
inline AugmentResult entity_replace_augment(const std::vector<Sentence>& sentences, const Gazetteer& gazetteer,
                                            double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error("entity_replace_augment: rate must be in [0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution replace(rate);
  AugmentResult result;
  result.sentences.reserve(sentences.size());
  for (const auto& s : sentences) {
    Sentence out;
    out.id = s.id;
    std::size_t next = 0;
    for (const auto& e : extract_entities(s)) {
      for (; next < static_cast<std::size_t>(e.start); ++next) {
        out.tokens.push_back(s.tokens[next]);
        out.tags.push_back(s.tags[next]);
      }
      const bool hit = replace(rng);
      const auto& bucket = gazetteer.bucket(e.label);
      if (hit && bucket.empty()) ++result.warnings;
      if (hit && !bucket.empty()) {
        detail::append_entity(out, detail::draw_surface(bucket, rng), e.label);
      } else {
        for (int k = e.start; k <= e.end; ++k) {
          out.tokens.push_back(s.tokens[static_cast<std::size_t>(k)]);
          out.tags.push_back(s.tags[static_cast<std::size_t>(k)]);
        }
      }
      next = static_cast<std::size_t>(e.end) + 1;
    }
    for (; next < s.size(); ++next) {
      out.tokens.push_back(s.tokens[next]);
      out.tags.push_back(s.tags[next]);
    }
    result.sentences.push_back(std::move(out));
  }
  return result;
}

// A template slot is a token `[Label]` tagged B-Label.
inline std::optional<LabelIndex> template_slot(const std::string& token, TagIndex tag) {
  if (token.size() < 3 || token.front() != '[' || token.back() != ']') return std::nullopt;
  auto label = taxonomy::find_label(std::string_view(token).substr(1, token.size() - 2));
  if (!label || tag != taxonomy::begin_tag(*label)) return std::nullopt;
  return label;
}

inline AugmentResult slot_templates(const std::vector<Sentence>& templates, const Gazetteer& gazetteer,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AugmentResult result;
  for (const auto& t : templates) {
    bool missing = false;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (auto l = template_slot(t.tokens[i], t.tags[i]); l && gazetteer.bucket(*l).empty()) missing = true;
    if (missing) {
      ++result.warnings;
      continue;
    }
    Sentence out;
    out.id = t.id;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (auto l = template_slot(t.tokens[i], t.tags[i])) {
        detail::append_entity(out, detail::draw_surface(gazetteer.bucket(*l), rng), *l);
      } else {
        out.tokens.push_back(t.tokens[i]);
        out.tags.push_back(t.tags[i]);
      }
    }
    result.sentences.push_back(std::move(out));
  }
  return result;
}

}  // namespace scdag
