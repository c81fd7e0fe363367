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

#include <gtest/gtest.h>

#include <random>

#include "scdag/corpus.hpp"
#include "scdag/taxonomy.hpp"
#include "test_util.hpp"

namespace scdag {
namespace {

using testing::make_sentence;

TEST(Taxonomy, Shape) {
  EXPECT_EQ(taxonomy::kFineCount, 33);
  EXPECT_EQ(taxonomy::kCoarseCount, 6);
  EXPECT_EQ(taxonomy::kTagCount, 67);
  std::array<int, taxonomy::kCoarseCount> per_coarse{};
  for (LabelIndex l = 0; l < taxonomy::kFineCount; ++l) ++per_coarse[static_cast<std::size_t>(taxonomy::coarse_of(l))];
  EXPECT_EQ(per_coarse, (std::array<int, 6>{4, 5, 7, 7, 5, 5}));
  int total = 0;
  for (int c : per_coarse) total += c;
  EXPECT_EQ(total, 33);
}

TEST(Taxonomy, TagLayoutIsStable) {
  EXPECT_EQ(taxonomy::tag_name(0), "O");
  EXPECT_EQ(taxonomy::tag_name(1), "B-Facility");
  EXPECT_EQ(taxonomy::tag_name(2), "I-Facility");
  EXPECT_EQ(taxonomy::tag_name(66), "I-Disease");
  EXPECT_EQ(*taxonomy::find_tag("B-Food"), 51);
  EXPECT_EQ(*taxonomy::find_tag("I-OtherPROD"), 56);
  EXPECT_EQ(*taxonomy::find_tag("B-Medication/Vaccine"), 57);
  for (TagIndex t = 0; t < taxonomy::kTagCount; ++t) EXPECT_EQ(*taxonomy::find_tag(taxonomy::tag_name(t)), t);
  EXPECT_FALSE(taxonomy::find_tag("B-Fruit"));
  EXPECT_FALSE(taxonomy::find_tag("X-Food"));
}

TEST(Taxonomy, CoarseOf) {
  const auto coarse = [](std::string_view fine) {
    return std::string(taxonomy::coarse_name(taxonomy::coarse_of(taxonomy::label_index(fine))));
  };
  EXPECT_EQ(coarse("Scientist"), "Person");
  EXPECT_EQ(coarse("Station"), "Location");
  EXPECT_EQ(coarse("Disease"), "Medical");
  EXPECT_EQ(coarse("Software"), "Creative Work");
  EXPECT_EQ(coarse("CarManufacturer"), "Group");
  EXPECT_EQ(coarse("OtherPROD"), "Product");
  EXPECT_THROW(taxonomy::coarse_of(33), Error);
  EXPECT_THROW(taxonomy::coarse_of(-1), Error);
}

TEST(Conll, ParsesIphoneBlock) {
  const auto out = parse_conll("where O\nto O\nbuy O\napple B-Food\niphone B-OtherPROD\n14 I-OtherPROD\n");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].size(), 6u);
  EXPECT_EQ(out[0].tags[3], *taxonomy::find_tag("B-Food"));
  EXPECT_EQ(out[0].tags[5], *taxonomy::find_tag("I-OtherPROD"));
}

TEST(Conll, EmptyInput) {
  EXPECT_TRUE(parse_conll("").empty());
  EXPECT_TRUE(parse_conll("\n\n").empty());
  EXPECT_EQ(emit_conll({}), "");
}

TEST(Conll, AcceptsTabsMiddleColumnsAndIds) {
  const auto out = parse_conll("# id abc domain=en\nthe _ _ O\nnile\t_ _ B-OtherLOC\r\n\n\nx O\n");
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].id, "abc");
  EXPECT_EQ(out[0].tokens, (std::vector<std::string>{"the", "nile"}));
  EXPECT_EQ(out[1].id, "");
}

TEST(Conll, UnknownTagNamesLine) {
  try {
    parse_conll("a O\nb B-Fruit\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_conll("lonely\n"), ParseError);
}

TEST(Conll, StrictRejectsOrphanInside) {
  EXPECT_THROW(parse_conll("apple I-Food\n"), ParseError);
  try {
    parse_conll("# id s42\na O\nb I-Food\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("s42"), std::string::npos);
  }
  // I-X after B-Y is also an orphan.
  EXPECT_THROW(parse_conll("a B-Drink\nb I-Food\n"), ParseError);
}

TEST(Conll, LenientRepairsOrphanInside) {
  auto r = parse_conll_report("apple I-Food\npie I-Food\n", BioMode::lenient);
  ASSERT_EQ(r.sentences.size(), 1u);
  EXPECT_EQ(r.repaired_tags, 1u);
  EXPECT_EQ(r.sentences[0].tags, (std::vector<TagIndex>{taxonomy::begin_tag(25), taxonomy::inside_tag(25)}));
}

TEST(Conll, EmitIphone) {
  const auto text = emit_conll({testing::iphone_sentence()});
  EXPECT_EQ(text,
            "where\tO\nto\tO\nbuy\tO\napple\tB-OtherPROD\niphone\tI-OtherPROD\n14\tI-OtherPROD\n\n");
}

TEST(Conll, TwoSentencesOneBlankBetween) {
  const auto text = emit_conll({make_sentence({"a"}, {"O"}), make_sentence({"b"}, {"B-Food"})});
  EXPECT_EQ(text, "a\tO\n\nb\tB-Food\n\n");
}

TEST(Conll, RoundTripProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Sentence> corpus;
    const int n = std::uniform_int_distribution<int>(0, 5)(rng);
    for (int i = 0; i < n; ++i) {
      auto s = testing::random_sentence(rng, std::uniform_int_distribution<std::size_t>(1, 12)(rng), 33);
      if (i % 2) s.id = "id" + std::to_string(i);
      corpus.push_back(s);
    }
    ASSERT_EQ(parse_conll(emit_conll(corpus)), corpus);
  }
}

TEST(Entities, GoldSpan) {
  const auto ents = extract_entities(testing::iphone_sentence());
  ASSERT_EQ(ents.size(), 1u);
  EXPECT_EQ(ents[0], (Entity{3, 5, taxonomy::label_index("OtherPROD")}));
}

TEST(Entities, AllOutside) { EXPECT_TRUE(extract_entities(make_sentence({"a", "b"}, {"O", "O"})).empty()); }

TEST(Entities, AdjacentBegins) {
  const auto ents = extract_entities(make_sentence({"a", "b"}, {"B-Food", "B-Food"}));
  const LabelIndex food = taxonomy::label_index("Food");
  EXPECT_EQ(ents, (std::vector<Entity>{{0, 0, food}, {1, 1, food}}));
}

// Naive scanner: every (i, j) pair checked for being a maximal B-initiated run.
std::vector<Entity> naive_spans(const std::vector<TagIndex>& tags) {
  std::vector<Entity> out;
  const int n = static_cast<int>(tags.size());
  for (int i = 0; i < n; ++i) {
    if (!taxonomy::is_begin(tags[static_cast<std::size_t>(i)])) continue;
    const LabelIndex l = taxonomy::label_of_tag(tags[static_cast<std::size_t>(i)]);
    for (int j = i; j < n; ++j) {
      bool inside = true;
      for (int k = i + 1; k <= j; ++k) inside = inside && tags[static_cast<std::size_t>(k)] == taxonomy::inside_tag(l);
      const bool maximal = j + 1 == n || tags[static_cast<std::size_t>(j + 1)] != taxonomy::inside_tag(l);
      if (inside && maximal) out.push_back({i, j, l});
    }
  }
  return out;
}

TEST(Entities, AgreesWithNaiveScanner) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto tags = testing::random_bio(rng, std::uniform_int_distribution<std::size_t>(0, 15)(rng));
    ASSERT_TRUE(is_bio_valid(tags));
    ASSERT_EQ(extract_entities(tags), naive_spans(tags));
    ASSERT_EQ(tags_from_entities(tags.size(), extract_entities(tags)), tags);
  }
}

TEST(Subwords, Identity) {
  const auto ts = subword_tokenize(testing::iphone_sentence(), SubwordMode::identity());
  EXPECT_EQ(ts.size(), 6u);
  EXPECT_EQ(ts.first_subword_of_word, (std::vector<int>{0, 1, 2, 3, 4, 5}));
}

TEST(Subwords, FixedChunk) {
  const auto ts = subword_tokenize(testing::iphone_sentence(), SubwordMode::fixed_chunk(3));
  // where -> whe re, to, buy, apple -> app le, iphone -> iph one, 14
  EXPECT_EQ(ts.subwords, (std::vector<std::string>{"whe", "re", "to", "buy", "app", "le", "iph", "one", "14"}));
  EXPECT_EQ(ts.first_subword_of_word, (std::vector<int>{0, 2, 3, 4, 6, 8}));
  EXPECT_EQ(ts.subwords[static_cast<std::size_t>(ts.first_subword_of_word[4])], "iph");
  EXPECT_EQ(ts.word_of_subword, (std::vector<int>{0, 0, 1, 2, 3, 3, 4, 4, 5}));

  const auto wide = subword_tokenize(std::vector<std::string>{"14"}, SubwordMode::fixed_chunk(10));
  EXPECT_EQ(wide.subwords, (std::vector<std::string>{"14"}));
  EXPECT_THROW(SubwordMode::fixed_chunk(0), Error);
}

TEST(Subwords, ChunksCountCharactersNotBytes) {
  const auto ts = subword_tokenize(std::vector<std::string>{"caf\xC3\xA9s"}, SubwordMode::fixed_chunk(2));
  EXPECT_EQ(ts.subwords, (std::vector<std::string>{"ca", "f\xC3\xA9", "s"}));
}

TEST(Subwords, InvariantsOnRandomWords) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = testing::random_sentence(rng, 1 + trial % 9);
    const int k = 1 + trial % 4;
    const auto ts = subword_tokenize(s, SubwordMode::fixed_chunk(k));
    ASSERT_GE(ts.size(), s.size());
    for (std::size_t w = 0; w < s.size(); ++w) {
      std::string rebuilt;
      for (std::size_t j = 0; j < ts.size(); ++j)
        if (ts.word_of_subword[j] == static_cast<int>(w)) rebuilt += ts.subwords[j];
      ASSERT_EQ(rebuilt, s.tokens[w]);
      ASSERT_EQ(ts.word_of_subword[static_cast<std::size_t>(ts.first_subword_of_word[w])], static_cast<int>(w));
    }
  }
}

}  // namespace
}  // namespace scdag
