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

// Fine-label gazetteer construction from a typed-entity dump.
//
// A dump is a list of (surface, source type) records, e.g. entities exported
// from a knowledge base together with their ontology types. Two builders are
// provided: the manual one-to-one type->label mapping, and the statistical
// builder that sends each source type to the k labels whose gold entities it
// covers best on a reference corpus.

#include <algorithm>
#include <array>
#include <cstddef>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scdag/corpus.hpp"
#include "scdag/error.hpp"
#include "scdag/io.hpp"
#include "scdag/taxonomy.hpp"

namespace scdag {

struct TypeRecord {
  std::vector<std::string> surface;  // lowercased tokens
  std::string source_type;
};

// Surfaces are stored lowercased with tokens joined by single spaces.
class Gazetteer {
 public:
  using Bucket = std::set<std::string>;

  Gazetteer() : buckets_(taxonomy::kFineCount) {}

  void add(LabelIndex label, std::string_view surface) {
    check(label);
    auto norm = join(split_whitespace(to_lower(surface)));
    if (norm.empty()) throw Error("empty gazetteer surface");
    buckets_[static_cast<std::size_t>(label)].insert(std::move(norm));
  }

  void add(LabelIndex label, const std::vector<std::string>& tokens) { add(label, join(tokens)); }

  bool contains(LabelIndex label, const std::string& normalized_surface) const {
    check(label);
    return buckets_[static_cast<std::size_t>(label)].count(normalized_surface) > 0;
  }

  bool contains_any(const std::string& normalized_surface) const {
    for (const auto& b : buckets_)
      if (b.count(normalized_surface)) return true;
    return false;
  }

  const Bucket& bucket(LabelIndex label) const {
    check(label);
    return buckets_[static_cast<std::size_t>(label)];
  }

  // Number of (surface, label) entries.
  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& b : buckets_) n += b.size();
    return n;
  }

  std::size_t unique_surface_count() const {
    std::set<std::string_view> all;
    for (const auto& b : buckets_)
      for (const auto& s : b) all.insert(s);
    return all.size();
  }

  bool empty() const { return entry_count() == 0; }

  // Adds every entry of `other`.
  void merge(const Gazetteer& other) {
    for (LabelIndex l = 0; l < taxonomy::kFineCount; ++l)
      for (const auto& s : other.bucket(l)) buckets_[static_cast<std::size_t>(l)].insert(s);
  }

  bool operator==(const Gazetteer&) const = default;

 private:
  static void check(LabelIndex label) {
    if (!taxonomy::valid_label(label)) throw Error("fine label index out of range: " + std::to_string(label));
  }

  std::vector<Bucket> buckets_;
};

// ---------------------------------------------------------------------------
// Coverage statistics

using CoverageRow = std::array<double, taxonomy::kFineCount>;

struct TypeLabelCoverage {
  // source type -> coverage of each fine label's gold entities
  std::map<std::string, CoverageRow> rows;
  // labels with no gold entity in the reference (coverage defined as 0)
  std::vector<LabelIndex> empty_labels;

  double at(const std::string& type, LabelIndex label) const {
    auto it = rows.find(type);
    return it == rows.end() ? 0.0 : it->second[static_cast<std::size_t>(label)];
  }
};

namespace detail {

// Gold entity occurrences of the reference, grouped by label.
inline std::vector<std::vector<std::string>> gold_surfaces_by_label(const std::vector<Sentence>& reference) {
  std::vector<std::vector<std::string>> by_label(taxonomy::kFineCount);
  for (const auto& s : reference)
    for (const auto& e : extract_entities(s)) by_label[static_cast<std::size_t>(e.label)].push_back(entity_surface(s, e));
  return by_label;
}

inline std::map<std::string, std::set<std::string>> surfaces_by_type(const std::vector<TypeRecord>& records) {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& r : records) {
    auto norm = join(split_whitespace(to_lower(join(r.surface))));
    if (!norm.empty()) out[r.source_type].insert(std::move(norm));
  }
  return out;
}

}  // namespace detail

inline TypeLabelCoverage type_label_coverage(const std::vector<TypeRecord>& records,
                                             const std::vector<Sentence>& reference) {
  TypeLabelCoverage cov;
  const auto gold = detail::gold_surfaces_by_label(reference);
  for (LabelIndex l = 0; l < taxonomy::kFineCount; ++l)
    if (gold[static_cast<std::size_t>(l)].empty()) cov.empty_labels.push_back(l);

  for (const auto& [type, surfaces] : detail::surfaces_by_type(records)) {
    CoverageRow row{};
    for (LabelIndex l = 0; l < taxonomy::kFineCount; ++l) {
      const auto& occ = gold[static_cast<std::size_t>(l)];
      if (occ.empty()) continue;
      std::size_t hit = 0;
      for (const auto& s : occ) hit += surfaces.count(s);
      row[static_cast<std::size_t>(l)] = static_cast<double>(hit) / static_cast<double>(occ.size());
    }
    cov.rows.emplace(type, row);
  }
  return cov;
}

// Labels with nonzero coverage, best first; ties go to the lower label index.
inline std::vector<LabelIndex> top_labels(const CoverageRow& row, int k) {
  std::vector<LabelIndex> order;
  for (LabelIndex l = 0; l < taxonomy::kFineCount; ++l)
    if (row[static_cast<std::size_t>(l)] > 0.0) order.push_back(l);
  std::stable_sort(order.begin(), order.end(), [&](LabelIndex a, LabelIndex b) {
    return row[static_cast<std::size_t>(a)] > row[static_cast<std::size_t>(b)];
  });
  if (order.size() > static_cast<std::size_t>(k)) order.resize(static_cast<std::size_t>(k));
  return order;
}

// The one-to-one mapping obtained by sending each type to its best-covered label.
inline std::map<std::string, LabelIndex> argmax_mapping(const TypeLabelCoverage& cov) {
  std::map<std::string, LabelIndex> mapping;
  for (const auto& [type, row] : cov.rows) {
    auto top = top_labels(row, 1);
    if (!top.empty()) mapping.emplace(type, top.front());
  }
  return mapping;
}

inline Gazetteer build_statistical(const std::vector<TypeRecord>& records, const std::vector<Sentence>& reference,
                                   int k = 2) {
  if (k < 1) throw Error("build_statistical: k must be >= 1");
  if (reference.empty()) throw Error("build_statistical: empty reference corpus, coverage undefined");
  const auto cov = type_label_coverage(records, reference);
  const auto surfaces = detail::surfaces_by_type(records);
  Gazetteer g;
  for (const auto& [type, row] : cov.rows)
    for (LabelIndex l : top_labels(row, k))
      for (const auto& s : surfaces.at(type)) g.add(l, s);
  return g;
}

inline Gazetteer build_one_to_one(const std::vector<TypeRecord>& records,
                                  const std::map<std::string, LabelIndex>& mapping) {
  for (const auto& [type, label] : mapping)
    if (!taxonomy::valid_label(label))
      throw Error("build_one_to_one: type '" + type + "' mapped to unknown label " + std::to_string(label));
  Gazetteer g;
  for (const auto& [type, surfaces] : detail::surfaces_by_type(records)) {
    auto it = mapping.find(type);
    if (it == mapping.end()) continue;
    for (const auto& s : surfaces) g.add(it->second, s);
  }
  return g;
}

// Same as above with label names, as read from a mapping file.
inline Gazetteer build_one_to_one(const std::vector<TypeRecord>& records,
                                  const std::map<std::string, std::string>& mapping) {
  std::map<std::string, LabelIndex> resolved;
  for (const auto& [type, name] : mapping) {
    auto l = taxonomy::find_label(name);
    if (!l) throw Error("build_one_to_one: type '" + type + "' mapped to unknown label '" + name + "'");
    resolved.emplace(type, *l);
  }
  return build_one_to_one(records, resolved);
}

struct CoverageRate {
  std::size_t total = 0;             // gold entity occurrences
  std::size_t matched = 0;           // surface present under the gold label
  std::size_t matched_any_label = 0; // surface present under any label

  double rate() const { return total ? static_cast<double>(matched) / static_cast<double>(total) : 0.0; }
  double any_label_rate() const {
    return total ? static_cast<double>(matched_any_label) / static_cast<double>(total) : 0.0;
  }
};

inline CoverageRate coverage_counts(const Gazetteer& g, const std::vector<Sentence>& reference) {
  if (reference.empty()) throw Error("coverage_rate: empty reference corpus");
  CoverageRate c;
  for (const auto& s : reference)
    for (const auto& e : extract_entities(s)) {
      const auto surface = entity_surface(s, e);
      ++c.total;
      if (g.contains(e.label, surface)) ++c.matched;
      if (g.contains_any(surface)) ++c.matched_any_label;
    }
  return c;
}

// Fraction of gold entity occurrences whose (surface, label) pair is in `g`.
inline double coverage_rate(const Gazetteer& g, const std::vector<Sentence>& reference) {
  return coverage_counts(g, reference).rate();
}

struct CoverageReport {
  std::map<std::string, CoverageRow> per_type_label;
  std::map<LabelIndex, double> per_label_rate;  // labels with gold entities only
  double overall_rate = 0.0;
  double overall_any_label_rate = 0.0;
  std::size_t gazetteer_entries = 0;
  std::size_t gazetteer_surfaces = 0;
  std::size_t gold_entities = 0;
  std::size_t matched_entities = 0;
};

inline CoverageReport coverage_report(const Gazetteer& g, const std::vector<TypeRecord>& records,
                                      const std::vector<Sentence>& reference) {
  CoverageReport r;
  r.per_type_label = type_label_coverage(records, reference).rows;
  const auto counts = coverage_counts(g, reference);
  r.overall_rate = counts.rate();
  r.overall_any_label_rate = counts.any_label_rate();
  r.gold_entities = counts.total;
  r.matched_entities = counts.matched;
  r.gazetteer_entries = g.entry_count();
  r.gazetteer_surfaces = g.unique_surface_count();
  const auto gold = detail::gold_surfaces_by_label(reference);
  for (LabelIndex l = 0; l < taxonomy::kFineCount; ++l) {
    const auto& occ = gold[static_cast<std::size_t>(l)];
    if (occ.empty()) continue;
    std::size_t hit = 0;
    for (const auto& s : occ) hit += g.contains(l, s);
    r.per_label_rate[l] = static_cast<double>(hit) / static_cast<double>(occ.size());
  }
  return r;
}

inline nlohmann::json to_json(const CoverageReport& r) {
  nlohmann::json j;
  nlohmann::json per_type = nlohmann::json::object();
  for (const auto& [type, row] : r.per_type_label) {
    nlohmann::json labels = nlohmann::json::object();
    for (LabelIndex l = 0; l < taxonomy::kFineCount; ++l)
      if (row[static_cast<std::size_t>(l)] > 0.0) labels[std::string(taxonomy::fine_name(l))] = row[static_cast<std::size_t>(l)];
    per_type[type] = labels;
  }
  j["per_type_label"] = per_type;
  nlohmann::json per_label = nlohmann::json::object();
  for (const auto& [l, rate] : r.per_label_rate) per_label[std::string(taxonomy::fine_name(l))] = rate;
  j["per_label_rate"] = per_label;
  j["overall_rate"] = r.overall_rate;
  j["overall_any_label_rate"] = r.overall_any_label_rate;
  j["totals"] = {{"gazetteer_entries", r.gazetteer_entries},
                 {"gazetteer_surfaces", r.gazetteer_surfaces},
                 {"gold_entities", r.gold_entities},
                 {"matched_entities", r.matched_entities}};
  return j;
}

// Per-label gold counts and coverage, then the overall row.
inline std::string format_coverage_table(const CoverageReport& r, const std::vector<Sentence>& reference) {
  const auto gold = detail::gold_surfaces_by_label(reference);
  std::ostringstream out;
  out << std::left << std::setw(24) << "label" << std::right << std::setw(12) << "Total Num." << std::setw(12)
      << "coverage %" << '\n';
  out << std::fixed << std::setprecision(2);
  for (const auto& [l, rate] : r.per_label_rate)
    out << std::left << std::setw(24) << taxonomy::fine_name(l) << std::right << std::setw(12)
        << gold[static_cast<std::size_t>(l)].size() << std::setw(12) << 100.0 * rate << '\n';
  out << std::left << std::setw(24) << "Average" << std::right << std::setw(12) << r.gold_entities << std::setw(12)
      << 100.0 * r.overall_rate << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// TSV I/O

inline std::vector<TypeRecord> parse_dump(std::string_view text) {
  std::vector<TypeRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("dump: expected `surface<TAB>source_type`", line_no);
    TypeRecord r;
    r.surface = split_whitespace(to_lower(std::string_view(line).substr(0, tab)));
    r.source_type = line.substr(tab + 1);
    if (r.surface.empty() || r.source_type.empty()) throw ParseError("dump: empty surface or type", line_no);
    out.push_back(std::move(r));
  }
  return out;
}

inline constexpr std::string_view kGazetteerHeader = "surface\tfine_label";

inline std::string format_gazetteer(const Gazetteer& g) {
  std::string out(kGazetteerHeader);
  out += '\n';
  for (LabelIndex l = 0; l < taxonomy::kFineCount; ++l)
    for (const auto& s : g.bucket(l)) {
      out += s;
      out += '\t';
      out += taxonomy::fine_name(l);
      out += '\n';
    }
  return out;
}

inline Gazetteer parse_gazetteer(std::string_view text) {
  Gazetteer g;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line == kGazetteerHeader) continue;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError("gazetteer: expected `surface<TAB>fine_label`", line_no);
    auto label = taxonomy::find_label(std::string_view(line).substr(tab + 1));
    if (!label) throw ParseError("gazetteer: unknown label '" + line.substr(tab + 1) + "'", line_no);
    if (split_whitespace(std::string_view(line).substr(0, tab)).empty())
      throw ParseError("gazetteer: empty surface", line_no);
    g.add(*label, std::string_view(line).substr(0, tab));
  }
  return g;
}

inline void save_gazetteer(const Gazetteer& g, const std::string& path) { write_file(path, format_gazetteer(g)); }
inline Gazetteer load_gazetteer(const std::string& path) { return parse_gazetteer(read_file(path)); }

}  // namespace scdag
