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

// Runs the scdag binary end to end on small fixtures.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "scdag/scdag.hpp"

namespace scdag {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kData = SCDAG_TEST_DATA;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("scdag_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Exit status of `scdag <args>`; stdout and stderr go to files in the work dir.
  int run(const std::string& args) const {
    const std::string cmd = std::string(SCDAG_CLI) + " " + args + " > " + path("stdout") + " 2> " + path("stderr");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string out() const { return read_file(path("stdout")); }
  std::string err() const { return read_file(path("stderr")); }

  fs::path dir_;
};

std::string data(const std::string& name) { return kData + "/" + name; }

void write_corpus(const std::string& file, const std::vector<Sentence>& s) { write_file(file, emit_conll(s)); }

TEST_F(Cli, StatisticalCoverageBeatsOneToOne) {
  ASSERT_EQ(run("build-gazetteer --dump " + data("dump.tsv") + " --train " + data("train.conll") + " --out " +
                path("stat.tsv")),
            0)
      << err();
  const auto man = json::parse(read_file(path("stat.tsv.manifest.json")));
  EXPECT_GT(man["coverage"].get<double>(), man["one_to_one_coverage"].get<double>());
  EXPECT_NE(out().find("Total Num."), std::string::npos);
  EXPECT_EQ(man["inputs"].size(), 2u);
  EXPECT_EQ(man["inputs"][data("dump.tsv")].get<std::string>().size(), 64u);
}

TEST_F(Cli, TopOneEqualsArgmaxOneToOne) {
  const std::string common = " --dump " + data("dump.tsv") + " --train " + data("train.conll");
  ASSERT_EQ(run("build-gazetteer" + common + " --k 1 --out " + path("k1.tsv")), 0) << err();
  ASSERT_EQ(run("build-gazetteer" + common + " --mode one-to-one --out " + path("o2o.tsv")), 0) << err();
  EXPECT_EQ(read_file(path("k1.tsv")), read_file(path("o2o.tsv")));
}

TEST_F(Cli, GazetteerErrors) {
  write_file(path("empty.tsv"), "");
  EXPECT_EQ(run("build-gazetteer --dump " + path("empty.tsv") + " --train " + data("train.conll") + " --out " +
                path("g.tsv")),
            2);
  EXPECT_EQ(run("build-gazetteer --dump " + path("missing.tsv") + " --train " + data("train.conll") + " --out " +
                path("g.tsv")),
            2);
  EXPECT_NE(err().find("missing.tsv"), std::string::npos);
  EXPECT_EQ(run("build-gazetteer --dump " + data("dump.tsv")), 2);
}

TEST_F(Cli, MatchReproducesIphoneFeatures) {
  ASSERT_EQ(run("match --gazetteer " + data("iphone_gazetteer.tsv") + " --input " + data("iphone.txt") + " --out " +
                path("iphone")),
            0)
      << err();
  std::istringstream csv(read_file(path("iphone.features.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, feature_csv_header().substr(0, feature_csv_header().size() - 1));
  const auto food = taxonomy::label_index("Food"), prod = taxonomy::label_index("OtherPROD");
  const std::vector<std::set<TagIndex>> expected = {{0},
                                                    {0},
                                                    {0},
                                                    {taxonomy::begin_tag(food), taxonomy::begin_tag(prod)},
                                                    {taxonomy::begin_tag(prod), taxonomy::inside_tag(prod)},
                                                    {taxonomy::inside_tag(prod)}};
  for (std::size_t r = 0; r < expected.size(); ++r) {
    ASSERT_TRUE(std::getline(csv, line));
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 3u + taxonomy::kTagCount);
    EXPECT_EQ(cells[1], std::to_string(r));
    for (TagIndex t = 0; t < taxonomy::kTagCount; ++t)
      EXPECT_EQ(cells[3 + static_cast<std::size_t>(t)], expected[r].contains(t) ? "1" : "0") << "row " << r << " tag " << t;
  }
  EXPECT_FALSE(std::getline(csv, line));
}

TEST_F(Cli, MatchEmptyInput) {
  write_file(path("empty.txt"), "");
  ASSERT_EQ(run("match --gazetteer " + data("iphone_gazetteer.tsv") + " --input " + path("empty.txt") + " --out " +
                path("e")),
            0);
  EXPECT_EQ(read_file(path("e.matches.jsonl")), "");
  EXPECT_EQ(read_file(path("e.features.csv")), "");
}

TEST_F(Cli, MatchThroughputSmoke) {
  const auto corpus = synthetic::generate({.train_sentences = 30000, .dev_sentences = 0, .seed = 3});
  save_gazetteer(corpus.gazetteer, path("g.tsv"));
  std::vector<Sentence> half, full;
  std::size_t tokens = 0;
  for (const auto& s : corpus.train) {
    if (tokens >= 100000) break;
    tokens += s.size();
    full.push_back(s);
    if (tokens <= 50000) half.push_back(s);
  }
  write_corpus(path("half.conll"), half);
  write_corpus(path("full.conll"), full);
  auto timed = [&](const std::string& input) {
    double best = 1e9;
    for (int rep = 0; rep < 3; ++rep) {
      EXPECT_EQ(run("match --gazetteer " + path("g.tsv") + " --input " + path(input) + " --out " + path("m")), 0);
      best = std::min(best, json::parse(read_file(path("m.manifest.json")))["match_seconds"].get<double>());
    }
    return best;
  };
  const double t_half = timed("half.conll"), t_full = timed("full.conll");
  EXPECT_GE(json::parse(read_file(path("m.manifest.json")))["tokens"].get<std::size_t>(), 100000u);
  std::cout << "match: 50k tokens " << t_half << " s, 100k tokens " << t_full << " s\n";
  // Linear scaling would give 2; allow for timer noise.
  EXPECT_LT(t_full / t_half, 4.0);
}

TEST_F(Cli, TrainAlphaZeroLogsL4EqualL3) {
  const auto corpus = synthetic::generate({.train_sentences = 20, .dev_sentences = 5, .seed = 4});
  write_corpus(path("train.conll"), corpus.train);
  save_gazetteer(corpus.gazetteer, path("g.tsv"));
  write_file(path("cfg.json"), R"({"alpha": 0, "epochs_stage1": 1, "epochs_stage2": 2, "hidden": 8, "embedding_dim": 8})");
  ASSERT_EQ(run("train --config " + path("cfg.json") + " --train " + path("train.conll") + " --gazetteer " +
                path("g.tsv") + " --out " + path("m.model")),
            0)
      << err();
  std::ifstream log(path("m.model.losses.jsonl"));
  int stage2 = 0;
  for (std::string line; std::getline(log, line);) {
    const auto j = json::parse(line);
    if (j["stage"] == 2) {
      ++stage2;
      EXPECT_EQ(j["L4"].get<double>(), j["L3"].get<double>());
    }
  }
  EXPECT_EQ(stage2, 6);  // 20 sentences, batch 8, 2 epochs
  const auto man = json::parse(read_file(path("m.model.manifest.json")));
  EXPECT_EQ(man["config"]["alpha"], 0.0);
}

TEST_F(Cli, TrainIsReproducibleAndFlagsOverrideConfig) {
  const auto corpus = synthetic::generate({.train_sentences = 16, .dev_sentences = 4, .seed = 5});
  write_corpus(path("train.conll"), corpus.train);
  write_corpus(path("dev.conll"), corpus.dev);
  save_gazetteer(corpus.gazetteer, path("g.tsv"));
  write_file(path("cfg.json"), R"({"epochs_stage1": 1, "epochs_stage2": 2, "hidden": 8, "embedding_dim": 8, "seed": 3})");
  const std::string common = "train --config " + path("cfg.json") + " --train " + path("train.conll") + " --dev " +
                             path("dev.conll") + " --gazetteer " + path("g.tsv");
  ASSERT_EQ(run(common + " --out " + path("a.model")), 0) << err();
  ASSERT_EQ(run(common + " --out " + path("b.model")), 0) << err();
  ASSERT_EQ(run(common + " --seed 4 --head crf --out " + path("c.model")), 0) << err();
  EXPECT_EQ(read_file(path("a.model")), read_file(path("b.model")));
  EXPECT_EQ(read_file(path("a.model.losses.jsonl")), read_file(path("b.model.losses.jsonl")));
  const auto c = load_model(path("c.model"));
  EXPECT_EQ(c.config.seed, 4u);
  EXPECT_EQ(c.config.classifier, HeadKind::crf);
  EXPECT_EQ(c.config.hidden, 8);
}

TEST_F(Cli, InvalidConfigKeyListsValidKeys) {
  write_corpus(path("train.conll"), synthetic::generate({.train_sentences = 4, .dev_sentences = 0}).train);
  write_file(path("cfg.json"), R"({"learning_rate": 0.1})");
  EXPECT_EQ(run("train --config " + path("cfg.json") + " --train " + path("train.conll") + " --out " + path("m")), 1);
  EXPECT_NE(err().find("learning_rate"), std::string::npos);
  for (const auto& k : config_keys()) EXPECT_NE(err().find(k), std::string::npos) << k;
  EXPECT_EQ(run("train --set epochs_stage2=-1 --train " + path("train.conll") + " --out " + path("m")), 1);
  write_file(path("bad.json"), "{not json");
  EXPECT_EQ(run("train --config " + path("bad.json") + " --train " + path("train.conll") + " --out " + path("m")), 2);
}

TEST_F(Cli, OverfitConfigReachesFullDevF1) {
  const auto corpus = synthetic::generate({.train_sentences = 50, .dev_sentences = 0, .seed = 6});
  write_corpus(path("train.conll"), corpus.train);
  save_gazetteer(corpus.gazetteer, path("g.tsv"));
  write_file(path("cfg.json"),
             R"({"epochs_stage1": 2, "epochs_stage2": 30, "lr_encoder": 0.01, "lr_classifier": 0.01, "dropout": 0.0})");
  ASSERT_EQ(run("train --config " + path("cfg.json") + " --train " + path("train.conll") + " --dev " +
                path("train.conll") + " --gazetteer " + path("g.tsv") + " --out " + path("m.model")),
            0)
      << err();
  EXPECT_GE(json::parse(read_file(path("m.model.manifest.json")))["best_dev_f1"].get<double>(), 0.99);
}

TEST_F(Cli, PredictEnsembleEvaluate) {
  const auto corpus = synthetic::generate({.train_sentences = 30, .dev_sentences = 10, .seed = 7});
  write_corpus(path("train.conll"), corpus.train);
  write_corpus(path("dev.conll"), corpus.dev);
  save_gazetteer(corpus.gazetteer, path("g.tsv"));
  ASSERT_EQ(run("train --train " + path("train.conll") + " --gazetteer " + path("g.tsv") +
                " --epochs-stage1 1 --epochs-stage2 2 --set hidden=8 --out " + path("m.model")),
            0)
      << err();
  const std::string in = " --input " + path("dev.conll") + " --gazetteer " + path("g.tsv");
  ASSERT_EQ(run("predict --model " + path("m.model") + in + " --out " + path("p.conll") + " --logits " + path("p.bin")), 0)
      << err();
  ASSERT_EQ(run("predict --model " + path("m.model") + in + " --threads 3 --out " + path("p3.conll")), 0) << err();
  EXPECT_EQ(read_file(path("p.conll")), read_file(path("p3.conll")));
  EXPECT_EQ(nn::load_container(path("p.bin")).tensors.size(), corpus.dev.size());

  for (const char* method : {"avg-logits", "token-vote"}) {
    ASSERT_EQ(run("ensemble --models " + path("m.model") + in + " --method " + method + " --out " + path("e.conll")), 0)
        << err();
    EXPECT_EQ(read_file(path("e.conll")), read_file(path("p.conll"))) << method;
  }
  ASSERT_EQ(run("ensemble --predictions " + path("p.conll") + " " + path("p.conll") + " " + path("dev.conll") +
                " --method token-vote --out " + path("v.conll")),
            0)
      << err();
  EXPECT_EQ(read_file(path("v.conll")), read_file(path("p.conll")));

  ASSERT_EQ(run("evaluate --pred " + path("dev.conll") + " --gold " + path("dev.conll") + " --out " + path("r.json")), 0);
  const auto r = json::parse(read_file(path("r.json")));
  for (const char* k : {"fine_macro", "coarse_macro", "micro"})
    for (const char* m : {"precision", "recall", "f1"}) EXPECT_EQ(r[k][m], 1.0) << k << " " << m;
  EXPECT_NE(out().find("f-macro@F1"), std::string::npos);
}

TEST_F(Cli, EnsembleRejectsCrfAveraging) {
  const auto corpus = synthetic::generate({.train_sentences = 8, .dev_sentences = 2, .seed = 8});
  write_corpus(path("train.conll"), corpus.train);
  ASSERT_EQ(run("train --train " + path("train.conll") + " --head crf --epochs-stage2 1 --out " + path("c.model")), 0);
  EXPECT_EQ(run("ensemble --models " + path("c.model") + " " + path("c.model") + " --input " + path("train.conll") +
                " --method avg-logits --out " + path("e.conll")),
            1);
  EXPECT_NE(err().find("token_vote"), std::string::npos);
  EXPECT_EQ(run("ensemble --models " + path("c.model") + " " + path("c.model") + " --input " + path("train.conll") +
                " --method token-vote --out " + path("e.conll")),
            0);
}

TEST_F(Cli, AugmentIsSeeded) {
  ASSERT_EQ(run("build-gazetteer --dump " + data("dump.tsv") + " --train " + data("train.conll") + " --out " +
                path("g.tsv")),
            0);
  const std::string aug = "augment --input " + data("train.conll") + " --gazetteer " + path("g.tsv") + " --rate 1";
  ASSERT_EQ(run(aug + " --seed 3 --out " + path("a.conll")), 0) << err();
  ASSERT_EQ(run(aug + " --seed 3 --out " + path("b.conll")), 0);
  EXPECT_EQ(read_file(path("a.conll")), read_file(path("b.conll")));
  EXPECT_EQ(parse_conll(read_file(path("a.conll"))).size(), parse_conll(read_file(data("train.conll"))).size());
  ASSERT_EQ(run("augment --mode templates --input " + data("templates.conll") + " --gazetteer " + path("g.tsv") +
                " --out " + path("t.conll")),
            0)
      << err();
  for (const auto& s : parse_conll(read_file(path("t.conll"))))
    for (const auto& t : s.tokens) EXPECT_NE(t.front(), '[');
}

TEST_F(Cli, KfoldWritesFoldsAndHoldoutScores) {
  const auto corpus = synthetic::generate({.train_sentences = 20, .dev_sentences = 10, .seed = 9});
  write_corpus(path("train.conll"), corpus.train);
  write_corpus(path("held.conll"), corpus.dev);
  save_gazetteer(corpus.gazetteer, path("g.tsv"));
  ASSERT_EQ(run("kfold --train " + path("train.conll") + " --holdout " + path("held.conll") + " --gazetteer " +
                path("g.tsv") + " --k 4 --epochs-stage1 1 --epochs-stage2 1 --set hidden=8 --out " + path("kf")),
            0)
      << err();
  const auto s = json::parse(read_file(path("kf/summary.json")));
  EXPECT_EQ(s["folds"].size(), 4u);
  EXPECT_EQ(s["holdout"]["fold_f1"].size(), 4u);
  EXPECT_TRUE(s["holdout"]["ensemble_f1"].contains("avg-logits"));
  for (int f = 0; f < 4; ++f) EXPECT_TRUE(fs::exists(path("kf/fold" + std::to_string(f) + ".model")));
  EXPECT_TRUE(fs::exists(path("kf/manifest.json")));
}

// Statistical harness: a 5-fold avg-logits ensemble should match or beat the
// mean of its members on held-out data for most seeds.
TEST(KfoldHarness, AveragedFoldsBeatMeanFold) {
  int wins = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto corpus = synthetic::generate({.train_sentences = 100, .dev_sentences = 100, .seed = 200 + s});
    TrainConfig c;
    c.classifier = HeadKind::softmax;
    c.hidden = 16;
    c.embedding_dim = 16;
    c.epochs_stage1 = 1;
    c.epochs_stage2 = 15;
    c.batch_size = 4;
    c.lr_encoder = c.lr_classifier = 1e-2;
    c.seed = s + 1;
    const auto r = train_kfold(c, corpus.train, corpus.gazetteer, 5, s);
    std::vector<std::vector<Prediction>> runs;
    double mean = 0.0;
    for (const auto& m : r.models) {
      runs.push_back(predict(m, corpus.dev, corpus.gazetteer).predictions);
      mean += evaluate(tagged(corpus.dev, runs.back()), corpus.dev).fine_macro.f1 / 5.0;
    }
    auto ensembled = corpus.dev;
    const auto tags = combine(runs, HeadKind::softmax, EnsembleMethod::avg_logits);
    for (std::size_t i = 0; i < tags.size(); ++i) ensembled[i].tags = tags[i];
    const double f1 = evaluate(ensembled, corpus.dev).fine_macro.f1;
    EXPECT_GT(mean, 0.1) << "seed " << s << ": folds did not learn";
    wins += f1 >= mean;
  }
  std::cout << "avg-logits >= mean fold: " << wins << "/20\n";
  EXPECT_GE(wins, 14);
}

}  // namespace
}  // namespace scdag
