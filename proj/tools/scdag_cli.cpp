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

// scdag: command-line front end. Every command writes a JSON run manifest next
// to its main output.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scdag/scdag.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scdag::cli {
namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kIo = 2;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  // Reads a file and records its digest.
  std::string input(const std::string& path) {
    std::string bytes = read_file(path);
    inputs_[path] = sha256_hex(bytes);
    return bytes;
  }
  void artifact(const std::string& path) { artifacts_.push_back(path); }
  void set(const std::string& key, json value) { extra_[key] = std::move(value); }

  void write(const std::string& path) const {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j = {{"command", command_}, {"inputs", inputs_}, {"artifacts", artifacts_}, {"wall_clock_seconds", seconds}};
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    write_file(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::object();
  json artifacts_ = json::array();
  json extra_ = json::object();
};

enum class InputFormat { automatic, conll, text };

const std::map<std::string, InputFormat> kFormats = {
    {"auto", InputFormat::automatic}, {"conll", InputFormat::conll}, {"text", InputFormat::text}};

// Text input: one whitespace-tokenized sentence per line, all tags O.
std::vector<Sentence> parse_text(std::string_view text) {
  std::vector<Sentence> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    Sentence s;
    s.id = std::to_string(out.size() + 1);
    s.tags.assign(tokens.size(), taxonomy::kOutside);
    s.tokens = std::move(tokens);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> parse_sentences(const std::string& path, std::string_view bytes, InputFormat format) {
  if (format == InputFormat::automatic)
    format = fs::path(path).extension() == ".txt" ? InputFormat::text : InputFormat::conll;
  return format == InputFormat::text ? parse_text(bytes) : parse_conll(bytes);
}

std::string with_suffix(const std::string& path, std::string_view suffix) { return path + std::string(suffix); }

void write_manifest(Manifest& m, const std::string& out) {
  m.write(with_suffix(out, ".manifest.json"));
}

// ---------------------------------------------------------------------------
// build-gazetteer

struct BuildGazetteerArgs {
  std::string dump, train, mode = "statistical", mapping, out, report;
  int k = 2;
};

std::map<std::string, std::string> parse_mapping(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("mapping: expected `source_type<TAB>fine_label`", line_no);
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

int build_gazetteer(const BuildGazetteerArgs& a) {
  Manifest man("build-gazetteer");
  const auto records = parse_dump(man.input(a.dump));
  if (records.empty()) throw IoError("dump " + a.dump + " has no records");
  const auto reference = parse_conll(man.input(a.train));
  if (reference.empty()) throw IoError("reference corpus " + a.train + " has no sentences");

  const auto one_to_one = [&] {
    if (!a.mapping.empty()) return build_one_to_one(records, parse_mapping(man.input(a.mapping)));
    return build_one_to_one(records, argmax_mapping(type_label_coverage(records, reference)));
  };
  Gazetteer g;
  if (a.mode == "statistical") {
    g = build_statistical(records, reference, a.k);
  } else {
    g = one_to_one();
  }
  save_gazetteer(g, a.out);
  man.artifact(a.out);

  const auto report = coverage_report(g, records, reference);
  std::cout << format_coverage_table(report, reference);
  if (a.mode == "statistical") {
    const double base = coverage_rate(one_to_one(), reference);
    std::cout << "one-to-one average coverage: " << std::fixed << std::setprecision(2) << 100.0 * base << "%\n";
    man.set("one_to_one_coverage", base);
  }
  if (!a.report.empty()) {
    write_file(a.report, to_json(report).dump(2) + "\n");
    man.artifact(a.report);
  }
  man.set("config", {{"mode", a.mode}, {"k", a.k}, {"mapping", a.mapping}});
  man.set("coverage", report.overall_rate);
  write_manifest(man, a.out);
  return kOk;
}

// ---------------------------------------------------------------------------
// match

struct MatchArgs {
  std::string gazetteer, input, out, format = "auto";
};

int match(const MatchArgs& a) {
  Manifest man("match");
  const auto g = parse_gazetteer(man.input(a.gazetteer));
  const auto sentences = parse_sentences(a.input, man.input(a.input), kFormats.at(a.format));
  const auto tree = build_tree(g);

  std::string jsonl, csv;
  std::size_t tokens = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    std::vector<std::string> lowered;
    for (const auto& t : s.tokens) lowered.push_back(to_lower(t));
    const auto matches = match_sentence(tree, lowered);
    jsonl += matches_to_json(s, matches).dump() + "\n";
    csv += feature_csv_rows(i, s.tokens, featurize(matches, s.size()));
    tokens += s.size();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!sentences.empty()) csv = feature_csv_header() + csv;

  const auto matches_path = with_suffix(a.out, ".matches.jsonl"), csv_path = with_suffix(a.out, ".features.csv");
  write_file(matches_path, jsonl);
  write_file(csv_path, csv);
  man.artifact(matches_path);
  man.artifact(csv_path);
  man.set("tokens", tokens);
  man.set("match_seconds", seconds);
  std::cerr << "matched " << tokens << " tokens in " << seconds << " s ("
            << (seconds > 0 ? static_cast<double>(tokens) / seconds : 0.0) << " tokens/s)\n";
  write_manifest(man, a.out);
  return kOk;
}

// ---------------------------------------------------------------------------
// Training config: JSON file first, then any flag given on the command line.

struct ConfigArgs {
  std::string config, system;
  std::vector<std::string> set;  // key=json-value
  std::optional<double> alpha, lr_encoder, lr_gazetteer, lr_classifier, dropout;
  std::optional<int> epochs_stage1, epochs_stage2, batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> head, fusion;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& c) {
  cmd->add_option("--config", c.config, "JSON training config")->check(CLI::ExistingFile);
  cmd->add_option("--system", c.system, "preset applied after the config: base, integration or scdag")
      ->check(CLI::IsMember({"base", "integration", "scdag"}));
  cmd->add_option("--alpha", c.alpha, "weight of the adaptation losses in stage 2");
  cmd->add_option("--lr-encoder", c.lr_encoder, "encoder learning rate");
  cmd->add_option("--lr-gazetteer", c.lr_gazetteer, "gazetteer network learning rate");
  cmd->add_option("--lr-classifier", c.lr_classifier, "classifier learning rate");
  cmd->add_option("--dropout", c.dropout, "dropout probability");
  cmd->add_option("--epochs-stage1", c.epochs_stage1, "adaptation epochs");
  cmd->add_option("--epochs-stage2", c.epochs_stage2, "joint training epochs");
  cmd->add_option("--batch-size", c.batch_size, "sentences per batch");
  cmd->add_option("--seed", c.seed, "training seed");
  cmd->add_option("--head", c.head, "classifier head: softmax, crf or span");
  cmd->add_option("--fusion", c.fusion, "fusion mode: concat or weighted_sum");
  cmd->add_option("--set", c.set, "any other config key, as key=value (value parsed as JSON)");
}

TrainConfig resolve_config(const ConfigArgs& a, Manifest& man) {
  TrainConfig c;
  if (!a.config.empty()) {
    json j;
    try {
      j = json::parse(man.input(a.config));
    } catch (const json::parse_error& e) {
      throw IoError("config " + a.config + ": " + e.what());
    }
    c = config_from_json(j, c);
  }
  json over = json::object();
  for (const auto& kv : a.set) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    const std::string value = kv.substr(eq + 1);
    over[kv.substr(0, eq)] = json::accept(value) ? json::parse(value) : json(value);
  }
  if (a.alpha) over["alpha"] = *a.alpha;
  if (a.lr_encoder) over["lr_encoder"] = *a.lr_encoder;
  if (a.lr_gazetteer) over["lr_gazetteer"] = *a.lr_gazetteer;
  if (a.lr_classifier) over["lr_classifier"] = *a.lr_classifier;
  if (a.dropout) over["dropout"] = *a.dropout;
  if (a.epochs_stage1) over["epochs_stage1"] = *a.epochs_stage1;
  if (a.epochs_stage2) over["epochs_stage2"] = *a.epochs_stage2;
  if (a.batch_size) over["batch_size"] = *a.batch_size;
  if (a.seed) over["seed"] = *a.seed;
  if (a.head) over["classifier"] = *a.head;
  if (a.fusion) over["fusion_mode"] = *a.fusion;
  c = config_from_json(over, c);
  if (a.system == "base") c = with_system(c, System::base);
  if (a.system == "integration") c = with_system(c, System::integration);
  c.validate();
  man.set("config", to_json(c));
  man.set("seed", c.seed);
  return c;
}

Gazetteer load_optional_gazetteer(const std::string& path, Manifest& man) {
  return path.empty() ? Gazetteer{} : parse_gazetteer(man.input(path));
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  ConfigArgs config;
  std::string train, dev, gazetteer, out;
};

int train_cmd(const TrainArgs& a) {
  Manifest man("train");
  const auto c = resolve_config(a.config, man);
  const auto train_set = parse_conll(man.input(a.train));
  const auto dev_set = a.dev.empty() ? std::vector<Sentence>{} : parse_conll(man.input(a.dev));
  const auto gaz = load_optional_gazetteer(a.gazetteer, man);

  const auto log_path = with_suffix(a.out, ".losses.jsonl");
  std::ofstream log(log_path);
  if (!log) throw IoError("cannot write " + log_path);
  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& s) { log << to_json(s).dump() << '\n'; };
  hooks.on_epoch = [&](const EpochLog& e) {
    std::cerr << "epoch " << e.epoch << "  L4 " << e.mean_losses.l4 << "  dev fine F1 " << e.dev_fine_f1 << '\n';
  };
  const auto result = train(c, train_set, dev_set, gaz, hooks);
  log.close();
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';

  save_model(result.model, a.out);
  man.artifact(a.out);
  man.artifact(log_path);
  man.set("best_dev_f1", result.best_dev_f1);
  man.set("best_epoch", result.best_epoch);
  man.set("steps", result.steps);
  man.set("warnings", result.warnings);
  std::cout << "best dev fine macro-F1 " << result.best_dev_f1 << " at epoch " << result.best_epoch << '\n';
  write_manifest(man, a.out);
  return kOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model, input, gazetteer, out, logits, format = "auto";
  int threads = 1;
};

// Read-only inference split across worker threads; output order is input order.
PredictResult predict_parallel(const Model& m, const std::vector<Sentence>& sentences, const Gazetteer& g,
                               int threads) {
  const std::size_t n = sentences.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(threads), n));
  if (workers == 1) return predict(m, sentences, g);
  std::vector<PredictResult> parts(workers);
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      const auto lo = std::min(n, w * chunk), hi = std::min(n, lo + chunk);
      parts[w] = predict(m, {sentences.begin() + static_cast<std::ptrdiff_t>(lo), sentences.begin() + static_cast<std::ptrdiff_t>(hi)}, g);
    });
  for (auto& t : pool) t.join();
  PredictResult r;
  for (auto& p : parts) {
    r.unknown_subwords += p.unknown_subwords;
    for (auto& pr : p.predictions) r.predictions.push_back(std::move(pr));
  }
  return r;
}

int predict_cmd(const PredictArgs& a) {
  Manifest man("predict");
  auto model_bytes = man.input(a.model);
  const auto m = from_container(nn::deserialize(model_bytes));
  const auto sentences = parse_sentences(a.input, man.input(a.input), kFormats.at(a.format));
  const auto gaz = load_optional_gazetteer(a.gazetteer, man);
  const auto r = predict_parallel(m, sentences, gaz, a.threads);

  write_file(a.out, emit_conll(tagged(sentences, r.predictions)));
  man.artifact(a.out);
  if (!a.logits.empty()) {
    nn::Container side;
    side.meta = {{"kind", "scdag-logits"}, {"classifier", head_name(m.config.classifier)}};
    for (std::size_t i = 0; i < r.predictions.size(); ++i)
      side.tensors.push_back({std::to_string(i), r.predictions[i].logits});
    nn::save_container(side, a.logits);
    man.artifact(a.logits);
  }
  man.set("config", to_json(m.config));
  man.set("seed", m.config.seed);
  man.set("unknown_subwords", r.unknown_subwords);
  if (r.unknown_subwords) std::cerr << r.unknown_subwords << " subwords mapped to <unk>\n";
  write_manifest(man, a.out);
  return kOk;
}

// ---------------------------------------------------------------------------
// ensemble

struct EnsembleArgs {
  std::vector<std::string> models, predictions;
  std::string input, gazetteer, out, method = "avg-logits", weights, format = "auto";
};

std::vector<double> parse_weights(std::string_view text) {
  std::vector<double> out;
  for (const auto& field : split_whitespace(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw ParseError("weights: not a number: '" + field + "'", 0);
    }
  }
  return out;
}

int ensemble_cmd(const EnsembleArgs& a) {
  Manifest man("ensemble");
  const auto method = parse_ensemble_method(a.method);
  const auto weights = a.weights.empty() ? std::vector<double>{} : parse_weights(man.input(a.weights));
  std::vector<Sentence> base;
  std::vector<std::vector<TagIndex>> combined;

  if (!a.predictions.empty()) {
    // Decoded prediction files ("tracks"): only voting applies.
    if (!a.models.empty()) throw Error("ensemble: give either --models or --predictions, not both");
    if (method != EnsembleMethod::token_vote) throw Error("ensemble: --predictions only supports token-vote");
    std::vector<std::vector<Sentence>> runs;
    for (const auto& p : a.predictions) runs.push_back(parse_conll(man.input(p)));
    base = runs.front();
    for (std::size_t i = 0; i < base.size(); ++i) {
      std::vector<std::vector<TagIndex>> tags;
      for (const auto& r : runs) {
        if (r.size() != base.size()) throw Error("ensemble: prediction files differ in sentence count");
        tags.push_back(r[i].tags);
      }
      combined.push_back(token_vote(tags, weights));
    }
  } else {
    if (a.models.empty()) throw Error("ensemble: no --models or --predictions given");
    base = parse_sentences(a.input, man.input(a.input), kFormats.at(a.format));
    const auto gaz = load_optional_gazetteer(a.gazetteer, man);
    std::vector<std::vector<Prediction>> runs;
    std::optional<HeadKind> head;
    for (const auto& path : a.models) {
      const auto m = from_container(nn::deserialize(man.input(path)));
      if (head && *head != m.config.classifier) throw Error("ensemble: models use different classifier heads");
      head = m.config.classifier;
      runs.push_back(predict(m, base, gaz).predictions);
    }
    combined = combine(runs, *head, method, weights);
  }
  for (std::size_t i = 0; i < base.size(); ++i) base[i].tags = combined[i];
  write_file(a.out, emit_conll(base));
  man.artifact(a.out);
  man.set("config", {{"method", a.method}, {"weights", weights}});
  write_manifest(man, a.out);
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string pred, gold, out, macro = "present";
};

int evaluate_cmd(const EvaluateArgs& a) {
  Manifest man("evaluate");
  const auto pred = parse_conll(man.input(a.pred));
  const auto gold = parse_conll(man.input(a.gold));
  const auto report = evaluate(pred, gold, a.macro == "all" ? MacroMode::all : MacroMode::present);
  std::cout << format_table(report);
  if (!a.out.empty()) {
    write_file(a.out, to_json(report).dump(2) + "\n");
    man.artifact(a.out);
    man.set("config", {{"macro", a.macro}});
    write_manifest(man, a.out);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// augment

struct AugmentArgs {
  std::string input, gazetteer, out, mode = "replace";
  double rate = 0.5;
  std::uint64_t seed = 1;
};

int augment_cmd(const AugmentArgs& a) {
  Manifest man("augment");
  const auto input = parse_conll(man.input(a.input));
  const auto gaz = parse_gazetteer(man.input(a.gazetteer));
  const auto r = a.mode == "templates" ? slot_templates(input, gaz, a.seed)
                                       : entity_replace_augment(input, gaz, a.rate, a.seed);
  if (r.warnings) std::cerr << "warning: " << r.warnings << " entities or templates left unchanged\n";
  write_file(a.out, emit_conll(r.sentences));
  man.artifact(a.out);
  man.set("config", {{"mode", a.mode}, {"rate", a.rate}});
  man.set("seed", a.seed);
  man.set("warnings", r.warnings);
  write_manifest(man, a.out);
  return kOk;
}

// ---------------------------------------------------------------------------
// kfold

struct KfoldArgs {
  ConfigArgs config;
  std::string train, gazetteer, holdout, out;
  std::size_t k = 5;
  std::uint64_t split_seed = 1;
};

int kfold_cmd(const KfoldArgs& a) {
  Manifest man("kfold");
  const auto c = resolve_config(a.config, man);
  const auto corpus = parse_conll(man.input(a.train));
  const auto gaz = load_optional_gazetteer(a.gazetteer, man);
  fs::create_directories(a.out);

  const auto r = train_kfold(c, corpus, gaz, a.k, a.split_seed);
  json summary = {{"k", a.k}, {"split_seed", a.split_seed}, {"fold_dev_f1", r.fold_dev_f1}};
  json folds = json::array();
  for (std::size_t f = 0; f < a.k; ++f) {
    const auto path = (fs::path(a.out) / ("fold" + std::to_string(f) + ".model")).string();
    save_model(r.models[f], path);
    man.artifact(path);
    folds.push_back({{"validation", r.plan.folds[f].validation}, {"model", path}});
  }
  summary["folds"] = folds;

  if (!a.holdout.empty()) {
    const auto held = parse_conll(man.input(a.holdout));
    std::vector<std::vector<Prediction>> runs;
    std::vector<double> single;
    for (const auto& m : r.models) {
      runs.push_back(predict(m, held, gaz).predictions);
      single.push_back(evaluate(tagged(held, runs.back()), held).fine_macro.f1);
    }
    json ens = json::object();
    for (auto method : {EnsembleMethod::avg_logits, EnsembleMethod::token_vote}) {
      if (method == EnsembleMethod::avg_logits && c.classifier == HeadKind::crf) continue;
      auto out = held;
      const auto tags = combine(runs, c.classifier, method);
      for (std::size_t i = 0; i < out.size(); ++i) out[i].tags = tags[i];
      ens[method == EnsembleMethod::avg_logits ? "avg-logits" : "token-vote"] = evaluate(out, held).fine_macro.f1;
    }
    summary["holdout"] = {{"fold_f1", single},
                          {"mean_fold_f1", std::accumulate(single.begin(), single.end(), 0.0) / static_cast<double>(single.size())},
                          {"ensemble_f1", ens}};
    std::cout << summary["holdout"].dump(2) << '\n';
  }
  const auto summary_path = (fs::path(a.out) / "summary.json").string();
  write_file(summary_path, summary.dump(2) + "\n");
  man.artifact(summary_path);
  man.write((fs::path(a.out) / "manifest.json").string());
  return kOk;
}

}  // namespace
}  // namespace scdag::cli

int main(int argc, char** argv) {
  using namespace scdag::cli;
  CLI::App app{"Gazetteer-enhanced fine-grained NER"};
  app.require_subcommand(1);
  const auto formats = CLI::IsMember({"auto", "conll", "text"});

  BuildGazetteerArgs bg;
  auto* c_bg = app.add_subcommand("build-gazetteer", "build a gazetteer from a type dump and a tagged corpus");
  c_bg->add_option("--dump", bg.dump, "TSV of surface<TAB>source_type")->required();
  c_bg->add_option("--train", bg.train, "CoNLL corpus used to score type/label coverage")->required();
  c_bg->add_option("--mode", bg.mode, "statistical or one-to-one")->check(CLI::IsMember({"statistical", "one-to-one"}));
  c_bg->add_option("--k", bg.k, "labels kept per source type (statistical mode)")->check(CLI::PositiveNumber);
  c_bg->add_option("--mapping", bg.mapping, "one-to-one mapping TSV source_type<TAB>fine_label; default argmax coverage");
  c_bg->add_option("--report", bg.report, "write the coverage report as JSON");
  c_bg->add_option("--out", bg.out, "output gazetteer TSV")->required();

  MatchArgs ma;
  auto* c_ma = app.add_subcommand("match", "match sentences against a gazetteer");
  c_ma->add_option("--gazetteer", ma.gazetteer, "gazetteer TSV")->required();
  c_ma->add_option("--input", ma.input, "sentences (.txt one per line, otherwise CoNLL)")->required();
  c_ma->add_option("--format", ma.format, "input format: auto, conll or text")->check(formats);
  c_ma->add_option("--out", ma.out, "output prefix for .matches.jsonl and .features.csv")->required();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "two-stage training");
  add_config_flags(c_tr, tr.config);
  c_tr->add_option("--train", tr.train, "training CoNLL")->required();
  c_tr->add_option("--dev", tr.dev, "dev CoNLL for model selection");
  c_tr->add_option("--gazetteer", tr.gazetteer, "gazetteer TSV");
  c_tr->add_option("--out", tr.out, "checkpoint path")->required();

  PredictArgs pr;
  auto* c_pr = app.add_subcommand("predict", "tag sentences with a checkpoint");
  c_pr->add_option("--model", pr.model, "checkpoint")->required();
  c_pr->add_option("--input", pr.input, "sentences (.txt one per line, otherwise CoNLL)")->required();
  c_pr->add_option("--format", pr.format, "input format: auto, conll or text")->check(formats);
  c_pr->add_option("--gazetteer", pr.gazetteer, "gazetteer TSV");
  c_pr->add_option("--logits", pr.logits, "also write per-sentence scores to this container");
  c_pr->add_option("--threads", pr.threads, "inference threads")->check(CLI::PositiveNumber);
  c_pr->add_option("--out", pr.out, "output CoNLL")->required();

  EnsembleArgs en;
  auto* c_en = app.add_subcommand("ensemble", "combine several models or prediction files");
  c_en->add_option("--models", en.models, "checkpoints sharing one classifier head");
  c_en->add_option("--predictions", en.predictions, "CoNLL prediction files (token-vote only)");
  c_en->add_option("--input", en.input, "sentences to tag (with --models)");
  c_en->add_option("--format", en.format, "input format: auto, conll or text")->check(formats);
  c_en->add_option("--gazetteer", en.gazetteer, "gazetteer TSV");
  c_en->add_option("--method", en.method, "avg-logits or token-vote")->check(CLI::IsMember({"avg-logits", "token-vote"}));
  c_en->add_option("--weights", en.weights, "file with one vote weight per run");
  c_en->add_option("--out", en.out, "output CoNLL")->required();

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "exact-span precision/recall/F1");
  c_ev->add_option("--pred", ev.pred, "predicted CoNLL")->required();
  c_ev->add_option("--gold", ev.gold, "gold CoNLL")->required();
  c_ev->add_option("--macro", ev.macro, "macro average over present classes or all classes")
      ->check(CLI::IsMember({"present", "all"}));
  c_ev->add_option("--out", ev.out, "write the report as JSON");

  AugmentArgs au;
  auto* c_au = app.add_subcommand("augment", "entity replacement or template filling");
  c_au->add_option("--input", au.input, "CoNLL sentences or templates")->required();
  c_au->add_option("--gazetteer", au.gazetteer, "gazetteer TSV")->required();
  c_au->add_option("--mode", au.mode, "replace or templates")->check(CLI::IsMember({"replace", "templates"}));
  c_au->add_option("--rate", au.rate, "replacement probability per entity")->check(CLI::Range(0.0, 1.0));
  c_au->add_option("--seed", au.seed, "random seed");
  c_au->add_option("--out", au.out, "output CoNLL")->required();

  KfoldArgs kf;
  auto* c_kf = app.add_subcommand("kfold", "train one model per fold");
  add_config_flags(c_kf, kf.config);
  c_kf->add_option("--train", kf.train, "CoNLL corpus to split")->required();
  c_kf->add_option("--gazetteer", kf.gazetteer, "gazetteer TSV");
  c_kf->add_option("--k", kf.k, "number of folds")->check(CLI::Range(2, 1000));
  c_kf->add_option("--split-seed", kf.split_seed, "seed of the fold assignment");
  c_kf->add_option("--holdout", kf.holdout, "held-out CoNLL scored per fold and by the ensembles");
  c_kf->add_option("--out", kf.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kIo;
  }

  try {
    if (*c_bg) return build_gazetteer(bg);
    if (*c_ma) return match(ma);
    if (*c_tr) return train_cmd(tr);
    if (*c_pr) return predict_cmd(pr);
    if (*c_en) return ensemble_cmd(en);
    if (*c_ev) return evaluate_cmd(ev);
    if (*c_au) return augment_cmd(au);
    if (*c_kf) return kfold_cmd(kf);
  } catch (const scdag::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const scdag::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kOk;
}
