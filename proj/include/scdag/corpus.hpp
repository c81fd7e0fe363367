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

// Sentences, BIO spans, CoNLL column I/O and subword alignment.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "scdag/error.hpp"
#include "scdag/taxonomy.hpp"

namespace scdag {

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<TagIndex> tags;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence&) const = default;
};

// Inclusive token span [start, end] carrying a fine label.
struct Entity {
  int start = 0;
  int end = 0;
  LabelIndex label = 0;

  auto operator<=>(const Entity&) const = default;
};

// ---------------------------------------------------------------------------
// Text helpers

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// BIO semantics

// Index of the first tag that breaks BIO, or nullopt if the sequence is valid.
inline std::optional<std::size_t> first_bio_violation(const std::vector<TagIndex>& tags) {
  TagIndex prev = -1;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!taxonomy::allowed_transition(prev, tags[i])) return i;
    prev = tags[i];
  }
  return std::nullopt;
}

inline bool is_bio_valid(const std::vector<TagIndex>& tags) { return !first_bio_violation(tags); }

// Rewrites every orphan I-X as B-X. Returns the number of rewritten tags.
inline std::size_t repair_bio(std::vector<TagIndex>& tags) {
  std::size_t fixed = 0;
  TagIndex prev = -1;
  for (auto& t : tags) {
    if (!taxonomy::allowed_transition(prev, t)) {
      t = taxonomy::begin_tag(taxonomy::label_of_tag(t));
      ++fixed;
    }
    prev = t;
  }
  return fixed;
}

// Maximal B-initiated spans, left to right. Tags must be BIO-valid.
inline std::vector<Entity> extract_entities(const std::vector<TagIndex>& tags) {
  std::vector<Entity> out;
  const int n = static_cast<int>(tags.size());
  int i = 0;
  while (i < n) {
    if (!taxonomy::is_begin(tags[i])) {
      ++i;
      continue;
    }
    const LabelIndex label = taxonomy::label_of_tag(tags[i]);
    int j = i;
    while (j + 1 < n && tags[j + 1] == taxonomy::inside_tag(label)) ++j;
    out.push_back({i, j, label});
    i = j + 1;
  }
  return out;
}

inline std::vector<Entity> extract_entities(const Sentence& s) { return extract_entities(s.tags); }

// Inverse of extract_entities for non-overlapping spans.
inline std::vector<TagIndex> tags_from_entities(std::size_t length, const std::vector<Entity>& entities) {
  std::vector<TagIndex> tags(length, taxonomy::kOutside);
  for (const auto& e : entities) {
    if (e.start < 0 || e.end < e.start || static_cast<std::size_t>(e.end) >= length)
      throw ShapeError("entity span outside sentence");
    tags[static_cast<std::size_t>(e.start)] = taxonomy::begin_tag(e.label);
    for (int k = e.start + 1; k <= e.end; ++k) tags[static_cast<std::size_t>(k)] = taxonomy::inside_tag(e.label);
  }
  return tags;
}

// Lowercased surface of an entity, tokens joined by single spaces.
inline std::string entity_surface(const Sentence& s, const Entity& e) {
  std::string out;
  for (int k = e.start; k <= e.end; ++k) {
    if (k > e.start) out += ' ';
    out += to_lower(s.tokens[static_cast<std::size_t>(k)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CoNLL I/O
//
// One `token <whitespace> tag` per line; any middle columns are ignored. A blank
// line ends a sentence. A line `# id <value>` sets the id of the next sentence.

enum class BioMode { strict, lenient };

struct ConllParseResult {
  std::vector<Sentence> sentences;
  std::size_t repaired_tags = 0;  // lenient mode only
};

inline ConllParseResult parse_conll_report(std::string_view text, BioMode mode = BioMode::strict) {
  ConllParseResult result;
  Sentence current;
  bool open = false;
  std::size_t line_no = 0;

  auto finish = [&] {
    if (!open) return;
    if (auto bad = first_bio_violation(current.tags)) {
      if (mode == BioMode::strict) {
        const std::string who = current.id.empty()
                                    ? "sentence #" + std::to_string(result.sentences.size() + 1)
                                    : "sentence " + current.id;
        throw ParseError(who + ": BIO violation at token " + std::to_string(*bad) + " (" +
                         taxonomy::tag_name(current.tags[*bad]) + ")");
      }
      result.repaired_tags += repair_bio(current.tags);
    }
    result.sentences.push_back(std::move(current));
    current = Sentence{};
    open = false;
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto fields = split_whitespace(line);
    if (fields.empty()) {
      finish();
      if (nl == text.size()) break;
      continue;
    }
    if (fields[0] == "#" && fields.size() >= 3 && fields[1] == "id") {
      finish();
      current.id = fields[2];
      open = true;
    } else {
      if (fields.size() < 2) throw ParseError("expected `token tag`", line_no);
      auto tag = taxonomy::find_tag(fields.back());
      if (!tag) throw ParseError("unknown tag '" + fields.back() + "'", line_no);
      current.tokens.push_back(fields.front());
      current.tags.push_back(*tag);
      open = true;
    }
    if (nl == text.size()) break;
  }
  finish();
  // A header line with no tokens is not a sentence.
  std::erase_if(result.sentences, [](const Sentence& s) { return s.tokens.empty(); });
  return result;
}

inline std::vector<Sentence> parse_conll(std::string_view text, BioMode mode = BioMode::strict) {
  return parse_conll_report(text, mode).sentences;
}

inline std::string emit_conll(const std::vector<Sentence>& sentences) {
  std::ostringstream out;
  for (const auto& s : sentences) {
    if (!s.id.empty()) out << "# id " << s.id << '\n';
    for (std::size_t i = 0; i < s.size(); ++i) out << s.tokens[i] << '\t' << taxonomy::tag_name(s.tags[i]) << '\n';
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Subword tokenization

struct TokenizedSentence {
  std::vector<std::string> subwords;
  std::vector<int> word_of_subword;
  std::vector<int> first_subword_of_word;

  std::size_t size() const { return subwords.size(); }
  std::size_t word_count() const { return first_subword_of_word.size(); }
};

struct SubwordMode {
  // 0 means identity (one subword per word); k >= 1 splits words into k-character chunks.
  int chunk = 0;

  static SubwordMode identity() { return {0}; }
  static SubwordMode fixed_chunk(int k) {
    if (k < 1) throw Error("fixed_chunk size must be >= 1");
    return {k};
  }
};

namespace detail {
// Byte length of the UTF-8 sequence starting with `lead`.
inline std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}
}  // namespace detail

// Chunks count characters (UTF-8 code points), not bytes.
inline TokenizedSentence subword_tokenize(const std::vector<std::string>& words, SubwordMode mode) {
  TokenizedSentence ts;
  ts.first_subword_of_word.reserve(words.size());
  for (std::size_t w = 0; w < words.size(); ++w) {
    ts.first_subword_of_word.push_back(static_cast<int>(ts.subwords.size()));
    const std::string& word = words[w];
    if (mode.chunk <= 0 || word.empty()) {
      ts.subwords.push_back(word);
      ts.word_of_subword.push_back(static_cast<int>(w));
      continue;
    }
    std::size_t i = 0;
    while (i < word.size()) {
      std::size_t j = i;
      for (int c = 0; c < mode.chunk && j < word.size(); ++c)
        j = std::min(word.size(), j + detail::utf8_length(static_cast<unsigned char>(word[j])));
      ts.subwords.push_back(word.substr(i, j - i));
      ts.word_of_subword.push_back(static_cast<int>(w));
      i = j;
    }
  }
  return ts;
}

inline TokenizedSentence subword_tokenize(const Sentence& s, SubwordMode mode) {
  return subword_tokenize(s.tokens, mode);
}

}  // namespace scdag
