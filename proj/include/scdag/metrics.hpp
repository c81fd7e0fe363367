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

// Exact-span entity metrics at fine and coarse granularity.

#include <array>
#include <cstddef>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "scdag/corpus.hpp"
#include "scdag/error.hpp"
#include "scdag/taxonomy.hpp"

namespace scdag {

struct ClassCounts {
  std::size_t gold = 0;      // TRUE
  std::size_t predicted = 0; // PRED
  std::size_t recalled = 0;  // RECALLED: exact (start, end, label) matches
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline Prf prf(const ClassCounts& c) {
  Prf out;
  out.precision = safe_ratio(static_cast<double>(c.recalled), static_cast<double>(c.predicted));
  out.recall = safe_ratio(static_cast<double>(c.recalled), static_cast<double>(c.gold));
  out.f1 = safe_ratio(2.0 * out.precision * out.recall, out.precision + out.recall);
  return out;
}

enum class MacroMode {
  present,  // skip classes with no gold and no predicted entities
  all       // average over every class
};

struct MetricsReport {
  std::array<ClassCounts, taxonomy::kFineCount> fine{};
  std::array<ClassCounts, taxonomy::kCoarseCount> coarse{};
  ClassCounts total;
  Prf fine_macro;
  Prf coarse_macro;
  Prf micro;
  std::size_t fine_classes_averaged = 0;
  std::size_t coarse_classes_averaged = 0;
  MacroMode mode = MacroMode::present;
};

namespace detail {

template <std::size_t K>
Prf macro_average(const std::array<ClassCounts, K>& counts, MacroMode mode, std::size_t& used) {
  Prf sum;
  used = 0;
  for (const auto& c : counts) {
    if (mode == MacroMode::present && c.gold == 0 && c.predicted == 0) continue;
    const Prf p = prf(c);
    sum.precision += p.precision;
    sum.recall += p.recall;
    sum.f1 += p.f1;
    ++used;
  }
  if (used == 0) return {};
  const double n = static_cast<double>(used);
  return {sum.precision / n, sum.recall / n, sum.f1 / n};
}

using SpanKey = std::tuple<int, int, int>;

template <std::size_t K, typename MapLabel>
void count_sentence(const std::vector<Entity>& pred, const std::vector<Entity>& gold, MapLabel map,
                    std::array<ClassCounts, K>& counts) {
  std::set<SpanKey> gold_keys;
  for (const auto& e : gold) {
    gold_keys.insert({e.start, e.end, map(e.label)});
    ++counts[static_cast<std::size_t>(map(e.label))].gold;
  }
  for (const auto& e : pred) {
    const int l = map(e.label);
    ++counts[static_cast<std::size_t>(l)].predicted;
    if (gold_keys.contains({e.start, e.end, l})) ++counts[static_cast<std::size_t>(l)].recalled;
  }
}

}  // namespace detail

inline MetricsReport evaluate(const std::vector<Sentence>& pred, const std::vector<Sentence>& gold,
                              MacroMode mode = MacroMode::present) {
  if (pred.size() != gold.size())
    throw Error("evaluate: " + std::to_string(pred.size()) + " predicted vs " + std::to_string(gold.size()) +
                " gold sentences");
  MetricsReport r;
  r.mode = mode;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (pred[i].size() != gold[i].size())
      throw Error("evaluate: sentence " + std::to_string(i) + " has mismatched token counts");
    const auto pe = extract_entities(pred[i]);
    const auto ge = extract_entities(gold[i]);
    detail::count_sentence(pe, ge, [](int l) { return l; }, r.fine);
    detail::count_sentence(pe, ge, [](int l) { return taxonomy::coarse_of(l); }, r.coarse);
  }
  for (const auto& c : r.fine) {
    r.total.gold += c.gold;
    r.total.predicted += c.predicted;
    r.total.recalled += c.recalled;
  }
  r.fine_macro = detail::macro_average(r.fine, mode, r.fine_classes_averaged);
  r.coarse_macro = detail::macro_average(r.coarse, mode, r.coarse_classes_averaged);
  r.micro = prf(r.total);
  return r;
}

inline nlohmann::json to_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json fine = nlohmann::json::object();
  for (int l = 0; l < taxonomy::kFineCount; ++l) {
    const auto& c = r.fine[static_cast<std::size_t>(l)];
    if (c.gold == 0 && c.predicted == 0) continue;
    auto j = to_json(prf(c));
    j["true"] = c.gold;
    j["pred"] = c.predicted;
    j["recalled"] = c.recalled;
    fine[std::string(taxonomy::fine_name(l))] = j;
  }
  nlohmann::json coarse = nlohmann::json::object();
  for (int c = 0; c < taxonomy::kCoarseCount; ++c) {
    const auto& k = r.coarse[static_cast<std::size_t>(c)];
    if (k.gold == 0 && k.predicted == 0) continue;
    auto j = to_json(prf(k));
    j["true"] = k.gold;
    j["pred"] = k.predicted;
    j["recalled"] = k.recalled;
    coarse[std::string(taxonomy::coarse_name(c))] = j;
  }
  return {{"fine_macro", to_json(r.fine_macro)},
          {"coarse_macro", to_json(r.coarse_macro)},
          {"micro", to_json(r.micro)},
          {"true", r.total.gold},
          {"pred", r.total.predicted},
          {"recalled", r.total.recalled},
          {"macro_mode", r.mode == MacroMode::all ? "all" : "present"},
          {"fine", fine},
          {"coarse", coarse}};
}

// Fixed-width summary with the leaderboard row names.
inline std::string format_table(const MetricsReport& r) {
  std::ostringstream out;
  auto row = [&](std::string_view name, double v) {
    out << std::left << std::setw(12) << name << std::right << std::setw(10) << std::fixed << std::setprecision(4) << v
        << '\n';
  };
  auto count = [&](std::string_view name, std::size_t v) {
    out << std::left << std::setw(12) << name << std::right << std::setw(10) << v << '\n';
  };
  row("f-macro@F1", r.fine_macro.f1);
  row("f-macro@P", r.fine_macro.precision);
  row("f-macro@R", r.fine_macro.recall);
  row("c-macro@F1", r.coarse_macro.f1);
  row("c-macro@P", r.coarse_macro.precision);
  row("c-macro@R", r.coarse_macro.recall);
  count("TRUE", r.total.gold);
  count("PRED", r.total.predicted);
  count("RECALLED", r.total.recalled);
  return out.str();
}

}  // namespace scdag
