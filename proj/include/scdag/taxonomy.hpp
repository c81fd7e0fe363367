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

// The MultiCoNER II label system: 33 fine labels grouped into 6 coarse labels,
// and the 67-slot BIO tag space built from them.
//
// Tag layout (stable across runs):
//   0          O
//   1 + 2*l    B-<fine label l>
//   2 + 2*l    I-<fine label l>

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "scdag/error.hpp"

namespace scdag {

using LabelIndex = int;   // fine label, [0, 33)
using CoarseIndex = int;  // coarse label, [0, 6)
using TagIndex = int;     // BIO tag, [0, 67)

namespace taxonomy {

inline constexpr int kFineCount = 33;
inline constexpr int kCoarseCount = 6;
inline constexpr int kTagCount = 2 * kFineCount + 1;
inline constexpr TagIndex kOutside = 0;

inline constexpr std::array<std::string_view, kCoarseCount> kCoarseNames = {
    "Location", "Creative Work", "Group", "Person", "Product", "Medical"};

struct FineEntry {
  std::string_view name;
  CoarseIndex coarse;
};

inline constexpr std::array<FineEntry, kFineCount> kFine = {{
    {"Facility", 0},
    {"OtherLOC", 0},
    {"HumanSettlement", 0},
    {"Station", 0},
    {"VisualWork", 1},
    {"MusicalWork", 1},
    {"WrittenWork", 1},
    {"ArtWork", 1},
    {"Software", 1},
    {"MusicalGRP", 2},
    {"PublicCORP", 2},
    {"PrivateCORP", 2},
    {"AerospaceManufacturer", 2},
    {"SportsGRP", 2},
    {"CarManufacturer", 2},
    {"ORG", 2},
    {"Scientist", 3},
    {"Artist", 3},
    {"Athlete", 3},
    {"Politician", 3},
    {"Cleric", 3},
    {"SportsManager", 3},
    {"OtherPER", 3},
    {"Clothing", 4},
    {"Vehicle", 4},
    {"Food", 4},
    {"Drink", 4},
    {"OtherPROD", 4},
    {"Medication/Vaccine", 5},
    {"MedicalProcedure", 5},
    {"AnatomicalStructure", 5},
    {"Symptom", 5},
    {"Disease", 5},
}};

constexpr bool valid_label(LabelIndex l) { return l >= 0 && l < kFineCount; }
constexpr bool valid_tag(TagIndex t) { return t >= 0 && t < kTagCount; }

inline std::string_view fine_name(LabelIndex l) {
  if (!valid_label(l)) throw Error("fine label index out of range: " + std::to_string(l));
  return kFine[static_cast<std::size_t>(l)].name;
}

inline CoarseIndex coarse_of(LabelIndex l) {
  if (!valid_label(l)) throw Error("fine label index out of range: " + std::to_string(l));
  return kFine[static_cast<std::size_t>(l)].coarse;
}

inline std::string_view coarse_name(CoarseIndex c) {
  if (c < 0 || c >= kCoarseCount) throw Error("coarse label index out of range: " + std::to_string(c));
  return kCoarseNames[static_cast<std::size_t>(c)];
}

inline std::optional<LabelIndex> find_label(std::string_view name) {
  for (LabelIndex l = 0; l < kFineCount; ++l)
    if (kFine[static_cast<std::size_t>(l)].name == name) return l;
  return std::nullopt;
}

inline LabelIndex label_index(std::string_view name) {
  auto l = find_label(name);
  if (!l) throw Error("unknown fine label: " + std::string(name));
  return *l;
}

constexpr TagIndex begin_tag(LabelIndex l) { return 1 + 2 * l; }
constexpr TagIndex inside_tag(LabelIndex l) { return 2 + 2 * l; }
constexpr bool is_begin(TagIndex t) { return t > 0 && t % 2 == 1; }
constexpr bool is_inside(TagIndex t) { return t > 0 && t % 2 == 0; }
// Fine label carried by a B/I tag; -1 for O.
constexpr LabelIndex label_of_tag(TagIndex t) { return t == kOutside ? -1 : (t - 1) / 2; }

inline std::string tag_name(TagIndex t) {
  if (!valid_tag(t)) throw Error("tag index out of range: " + std::to_string(t));
  if (t == kOutside) return "O";
  return std::string(is_begin(t) ? "B-" : "I-") + std::string(fine_name(label_of_tag(t)));
}

inline std::optional<TagIndex> find_tag(std::string_view name) {
  if (name == "O") return kOutside;
  if (name.size() < 3 || name[1] != '-' || (name[0] != 'B' && name[0] != 'I')) return std::nullopt;
  auto l = find_label(name.substr(2));
  if (!l) return std::nullopt;
  return name[0] == 'B' ? begin_tag(*l) : inside_tag(*l);
}

// A tag may follow `prev` (use -1 for sentence start) without breaking BIO.
constexpr bool allowed_transition(TagIndex prev, TagIndex next) {
  if (!is_inside(next)) return true;
  return prev > 0 && label_of_tag(prev) == label_of_tag(next);
}

}  // namespace taxonomy
}  // namespace scdag
