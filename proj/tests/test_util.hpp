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

// Random fixtures shared by the test suites.

#include <random>
#include <string>
#include <vector>

#include "scdag/corpus.hpp"
#include "scdag/taxonomy.hpp"

namespace scdag::testing {

// BIO-valid tag sequence with entities drawn from `labels`.
inline std::vector<TagIndex> random_bio(std::mt19937_64& rng, std::size_t length, int label_count = 4) {
  std::vector<TagIndex> tags;
  std::uniform_int_distribution<int> action(0, 2);
  std::uniform_int_distribution<int> label(0, label_count - 1);
  TagIndex prev = taxonomy::kOutside;
  for (std::size_t i = 0; i < length; ++i) {
    int a = action(rng);
    TagIndex t = taxonomy::kOutside;
    if (a == 1) t = taxonomy::begin_tag(label(rng));
    if (a == 2) t = prev == taxonomy::kOutside ? taxonomy::begin_tag(label(rng)) : taxonomy::inside_tag(taxonomy::label_of_tag(prev));
    tags.push_back(t);
    prev = t;
  }
  return tags;
}

inline std::string random_word(std::mt19937_64& rng, int min_len = 1, int max_len = 7) {
  static const std::string letters = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, letters.size() - 1);
  std::string w;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) w += letters[pick(rng)];
  return w;
}

inline Sentence random_sentence(std::mt19937_64& rng, std::size_t length, int label_count = 4) {
  Sentence s;
  s.tags = random_bio(rng, length, label_count);
  for (std::size_t i = 0; i < length; ++i) s.tokens.push_back(random_word(rng));
  return s;
}

inline Sentence make_sentence(const std::vector<std::string>& tokens, const std::vector<std::string>& tags,
                              std::string id = "") {
  Sentence s;
  s.id = std::move(id);
  s.tokens = tokens;
  for (const auto& t : tags) s.tags.push_back(*taxonomy::find_tag(t));
  return s;
}

// "where to buy apple iphone 14" with its gold tagging.
inline Sentence iphone_sentence() {
  return make_sentence({"where", "to", "buy", "apple", "iphone", "14"},
                       {"O", "O", "O", "B-OtherPROD", "I-OtherPROD", "I-OtherPROD"});
}

}  // namespace scdag::testing
