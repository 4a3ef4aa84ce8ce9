#include "eataudit/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <json.hpp>
#include <sstream>

#include "eataudit/csv.hpp"
#include "eataudit/embedding_io.hpp"
#include "eataudit/error.hpp"
#include "test_support.hpp"

using namespace eataudit;
using fixtures::TempDir;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Two-target fixture: X = {(1,0), (0.6,0.8)}, Y = {(0,1), (0.8,0.6)},
// A = {(1,0)}, B = {(0,1)}.
void write_fixture(const TempDir& dir, bool degenerate = false) {
  std::vector<double> data = {1, 0, 0.6, 0.8, 0, 1, 0.8, 0.6, 1, 0, 0, 1};
  if (degenerate) data = {1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 0, 1};
  save_npy(dir.file("emb.npy"), EmbeddingMatrix(6, 2, DType::float64, data));
  write_file(dir.file("manifest.jsonl"),
             R"({"id": "x1", "group": "X", "row": 0}
{"id": "x2", "group": "X", "row": 1}
{"id": "y1", "group": "Y", "row": 2}
{"id": "y2", "group": "Y", "row": 3}
{"id": "a1", "group": "A", "row": 4, "kind": "text", "text": "angry person"}
{"id": "b1", "group": "B", "row": 5, "kind": "text", "text": "person"}
)");
  write_file(dir.file("eat.json"),
             R"({"embeddings": "emb.npy", "manifest": "manifest.jsonl",
                 "groups": {"X": "X", "Y": "Y", "A": "A", "B": "B"}})");
}

}  // namespace

TEST(CliPrompts, BuiltinCatalogCsv) {
  const auto r = run({"prompts", "--catalog", "emotion_angry"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv::parse(r.out);
  ASSERT_EQ(rows.size(), 61u);
  EXPECT_EQ(rows[0], (csv::Row{"set", "stimulus", "template_index", "text"}));
  std::size_t a = 0, b = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    (rows[i][0] == "A" ? a : b)++;
  }
  EXPECT_EQ(a, 30u);
  EXPECT_EQ(b, 30u);
  EXPECT_EQ(rows[3], (csv::Row{"A", "angry person", "2", "a photo of a angry person"}));
}

TEST(CliPrompts, CustomTemplatesAndJson) {
  TempDir dir;
  write_file(dir.file("t.json"), R"(["[stimulus]", "art of [stimulus]"])");
  const auto r = run({"prompts", "--catalog", "sex_vs_science", "--templates",
                      dir.file("t.json"), "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["B"].size(), 12u);
  EXPECT_EQ(j["B"][1]["text"], "art of scientist");
}

TEST(CliPrompts, ConfigErrors) {
  EXPECT_EQ(run({"prompts", "--catalog", "no_such_catalog"}).code, kExitConfig);
  EXPECT_EQ(run({"prompts"}).code, kExitConfig);
  EXPECT_EQ(run({"bogus"}).code, kExitConfig);
  EXPECT_EQ(run({"prompts", "--catalog", "sex_vs_science", "--format", "xml"}).code,
            kExitConfig);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(CliEat, FixtureMatchesOracleAndIsDeterministic) {
  TempDir dir;
  write_fixture(dir);
  const auto r = run({"eat", "--config", dir.file("eat.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["d"].get<double>(), 0.8 / std::sqrt(0.52), 1e-12);
  EXPECT_DOUBLE_EQ(j["p"].get<double>(), 1.0 / 3.0);
  EXPECT_EQ(j["method"], "exact");
  EXPECT_EQ(run({"eat", "--config", dir.file("eat.json")}).out, r.out);

  const auto mc = run({"eat", "--config", dir.file("eat.json"), "--mode",
                       "monte_carlo", "--samples", "5000", "--seed", "7"});
  ASSERT_EQ(mc.code, 0) << mc.err;
  EXPECT_EQ(json::parse(mc.out)["seed"], 7);
  EXPECT_NEAR(json::parse(mc.out)["p"].get<double>(), 1.0 / 3.0, 0.03);
  EXPECT_EQ(run({"eat", "--config", dir.file("eat.json"), "--mode",
                 "monte_carlo", "--samples", "5000", "--seed", "7"})
                .out,
            mc.out);
}

TEST(CliEat, CatalogResolvesAttributesByPromptText) {
  TempDir dir;
  write_fixture(dir);
  write_file(dir.file("cat.json"),
             R"({"embeddings": "emb.npy", "manifest": "manifest.jsonl",
                 "groups": {"X": "X", "Y": "Y"},
                 "catalog": {"name": "tiny", "A": ["angry person"],
                             "B": ["person"], "templates": ["[stimulus]"]}})");
  const auto r = run({"eat", "--config", dir.file("cat.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(json::parse(r.out)["d"].get<double>(), 0.8 / std::sqrt(0.52),
              1e-12);
}

TEST(CliEat, WritesToOutFileAndMarkdown) {
  TempDir dir;
  write_fixture(dir);
  const auto r = run({"eat", "--config", dir.file("eat.json"), "--format",
                      "markdown", "--out", dir.file("res.md")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto text = read_file(dir.file("res.md"));
  EXPECT_NE(text.find("| cell | 1.11 |"), std::string::npos) << text;
  EXPECT_NE(text.find("| d | 1.1094 |"), std::string::npos) << text;
}

TEST(CliEat, ExitCodes) {
  TempDir dir;
  write_fixture(dir);
  EXPECT_EQ(run({"eat", "--embeddings", dir.file("emb.npy"), "--manifest",
                 dir.file("missing.jsonl"), "--config", dir.file("eat.json")})
                .code,
            kExitData);
  EXPECT_EQ(run({"eat", "--config", dir.file("nope.json")}).code, kExitConfig);
  write_file(dir.file("bad.json"), R"({"embeddings": "emb.npy"})");
  EXPECT_EQ(run({"eat", "--config", dir.file("bad.json")}).code, kExitConfig);
  EXPECT_EQ(run({"eat", "--config", dir.file("eat.json"), "--mode",
                 "monte_carlo", "--samples", "0"})
                .code,
            kExitConfig);

  TempDir degen;
  write_fixture(degen, true);
  const auto r = run({"eat", "--config", degen.file("eat.json")});
  EXPECT_EQ(r.code, kExitDegenerate) << r.err;
}

TEST(CliCaptions, PlantedCorpus) {
  TempDir dir;
  std::string text;
  auto add = [&](const std::string& g, const std::string& c, int times) {
    for (int i = 0; i < times; ++i) {
      text += R"({"group": ")" + g + R"(", "caption": ")" + c + "\"}\n";
    }
  };
  add("g1", "a man smiling", 100);
  add("g1", "a frowning man", 100);
  add("g2", "a woman", 100);
  add("g2", "a happy woman", 99);
  write_file(dir.file("caps.jsonl"), text);
  write_file(dir.file("lex.json"),
             R"({"label": "joy", "words": ["smiling", "happy"]})");
  const auto r = run({"captions", "--corpus", dir.file("caps.jsonl"),
                      "--lexicon", dir.file("lex.json"), "--lexicon", "anger"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv::parse(r.out);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[1], (csv::Row{"g1", "joy", "500.0"}));
  EXPECT_EQ(rows[2], (csv::Row{"g1", "anger", "500.0"}));
  EXPECT_EQ(rows[3], (csv::Row{"g2", "joy", "0.0"}));  // happy: 99 < 100
  EXPECT_EQ(rows[4], (csv::Row{"g2", "anger", "0.0"}));
  EXPECT_EQ(run({"captions", "--corpus", dir.file("caps.jsonl"), "--lexicon",
                 "nonexistent"})
                .code,
            kExitConfig);
  EXPECT_EQ(run({"captions", "--corpus", dir.file("gone.jsonl")}).code,
            kExitData);
}

namespace {

void write_labels(const TempDir& dir) {
  std::string text = "image_id,group,rater,category\n";
  for (int i = 0; i < 100; ++i) {
    text += "g" + std::to_string(i) + ",girl_18,nsfw," +
            (i < 47 ? "sexy" : "neutral") + "\n";
    text += "b" + std::to_string(i) + ",boy_18,nsfw," +
            (i < 3 ? "pornographic" : "neutral") + "\n";
  }
  write_file(dir.file("labels.csv"), text);

  const std::vector<std::vector<int>> cols = {
      {1, 1, 0, 0}, {1, 0, 0, 0}, {1, 1, 0, 1}};
  std::string alpha = "image_id,group,rater,category\n";
  for (std::size_t r = 0; r < cols.size(); ++r) {
    for (std::size_t i = 0; i < 4; ++i) {
      alpha += "img" + std::to_string(i) + ",g,r" + std::to_string(r) + "," +
               (cols[r][i] ? "sexualized" : "non_sexualized") + "\n";
    }
  }
  write_file(dir.file("alpha.csv"), alpha);
}

}  // namespace

TEST(CliRates, FortySevenPercent) {
  TempDir dir;
  write_labels(dir);
  const auto r = run({"rates", "--labels", dir.file("labels.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "group,n,sexualized,rate_percent\r\n"
            "girl_18,100,47,47.0\r\n"
            "boy_18,100,3,3.0\r\n");
  EXPECT_EQ(run({"rates", "--labels", dir.file("labels.csv"), "--rater", "x"})
                .code,
            kExitData);
}

TEST(CliAlpha, Fixture) {
  TempDir dir;
  write_labels(dir);
  const auto r = run({"alpha", "--labels", dir.file("alpha.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["alpha"].get<double>(), 0.75, 1e-12);
  EXPECT_EQ(j["k"], 3);
  EXPECT_EQ(j["pairwise_alphas"].size(), 3u);
}

TEST(CliReport, TableFromResultsAndLiterals) {
  TempDir dir;
  write_fixture(dir);
  ASSERT_EQ(run({"eat", "--config", dir.file("eat.json"), "--out",
                 dir.file("r.json")})
                .code,
            0);
  write_file(dir.file("report.json"),
             R"({"rows": ["ViT-B32", "ViT-L14"], "columns": ["Angry", "Sad"],
                 "cells": [{"row": "ViT-B32", "column": "Angry", "result": "r.json"},
                           {"row": "ViT-L14", "column": "Angry", "d": 0.26, "p": 0.12},
                           {"row": "ViT-L14", "column": "Sad", "d": -0.06, "p": 0.6}]})");
  const auto r = run({"report", "--config", dir.file("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "| model | Angry | Sad |\n"
            "| --- | ---: | ---: |\n"
            "| ViT-B32 | 1.11 | n/a |\n"
            "| ViT-L14 | 0.26 | -0.06 |\n");
  const auto star = run({"report", "--config", dir.file("report.json"),
                         "--alpha", "0.5", "--format", "csv"});
  EXPECT_NE(star.out.find("1.11*"), std::string::npos);
  EXPECT_EQ(run({"report"}).code, kExitConfig);
}

TEST(CliBinary, ExitCodePropagates) {
  const std::string bin = EAT_AUDIT_BINARY;
  const int ok = std::system((bin + " prompts --catalog sex_vs_science > /dev/null").c_str());
  ASSERT_NE(ok, -1);
  EXPECT_EQ(WEXITSTATUS(ok), 0);
  const int bad =
      std::system((bin + " prompts --catalog nope > /dev/null 2>&1").c_str());
  EXPECT_EQ(WEXITSTATUS(bad), kExitConfig);
}
