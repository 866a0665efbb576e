// Copyright 2026 The mamlst Authors.
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

#include "mamlst/experiment.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "mamlst/checkpoint.h"
#include "mamlst/errors.h"

namespace mamlst {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("mamlst_exp_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string ReadBytes(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Json Tiny(const std::string &out, Json patch) {
  Json j = Json::parse(R"({
    "model": {"d_model": 16, "n_enc": 1, "n_dec": 1, "n_heads": 2, "d_ff": 32,
              "conv_channels": 4},
    "hyper": {"meta_steps": 6, "finetune_steps": 8, "eval_every": 4, "k": 4, "l": 4,
              "m_batch": 4, "pretrain_batch": 4},
    "data": {"synthetic": {"alphabet_size": 5, "min_len": 3, "max_len": 8,
                           "asr_size": 40, "mt_size": 40, "st_size": 20}}
  })");
  j["output_dir"] = out;
  if (!patch.is_null()) j.merge_patch(patch);
  return j;
}

std::string ConfigErrorOf(const Json &j) {
  try {
    ParseExperimentConfig(j, fs::temp_directory_path().string());
  } catch (const ConfigError &e) {
    return e.what();
  }
  return "";
}

TEST_CASE("config parsing fills defaults and derives model dimensions") {
  const fs::path dir = TempDir("parse");
  const ExperimentConfig c =
      ParseExperimentConfig(Tiny("out", {{"strategy", "metalearn"}}), dir.string());
  CHECK(c.strategies == std::vector<Strategy>{Strategy::kMetaLearn});
  CHECK(c.output_dir == (dir / "out").string());
  CHECK(c.seeds == std::vector<uint64_t>{c.hyper.seed});
  CHECK(c.model.vocab_size == SyntheticVocab(c.data.spec).size());
  CHECK(c.model.frame_dim == c.data.spec.frame_dim);
  CHECK(c.hyper.alpha == HyperParams{}.alpha);
  CHECK(c.data.synthetic);
  CHECK_FALSE(fs::exists(dir / "out"));

  // The resolved form parses back to itself.
  const Json resolved = ToJson(c);
  const ExperimentConfig again = ParseExperimentConfig(resolved, "/");
  CHECK(ToJson(again) == resolved);
  CHECK(again.model == c.model);
  CHECK(again.hyper == c.hyper);
  fs::remove_all(dir);
}

TEST_CASE("config errors name the field") {
  const std::string out = (fs::temp_directory_path() / "mamlst_exp_never").string();
  fs::remove_all(out);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategy", "MetaLearning"}})).rfind("strategy:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategies", {"Transfer", "Bogus"}}}))
            .rfind("strategies[1]:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategies", {"Transfer", "transfer"}}}))
            .rfind("strategies[1]:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(out, {})).rfind("strategy:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategy", "Scratch"}, {"hyper", {{"alpha", "x"}}}}))
            .rfind("hyper.alpha:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategy", "Scratch"}, {"hyper", {{"k", 0}}}}))
            .find("hyper: k") == 0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategy", "Scratch"}, {"model", {{"dmodel", 8}}}}))
            .rfind("model.dmodel:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategy", "Scratch"}, {"model", {{"vocab_size", 3}}}}))
            .rfind("model.vocab_size:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategy", "Scratch"}, {"model", {{"n_heads", 3}}}}))
            .rfind("model:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategy", "Scratch"}, {"seeds", {1, -2}}}))
            .rfind("seeds[1]:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategy", "Scratch"}, {"bogus", true}})).rfind("bogus:", 0) ==
        0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategy", "Scratch"},
                                 {"data", {{"asr", "missing.tsv"}, {"synthetic", nullptr}}}}))
            .rfind("data.asr:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(out, {{"strategy", "Scratch"},
                                 {"data", {{"synthetic", {{"noise", -1.0}}}}}}))
            .rfind("data.synthetic:", 0) == 0);
  Json no_out = Tiny(out, {{"strategy", "Scratch"}});
  no_out.erase("output_dir");
  CHECK(ConfigErrorOf(no_out).rfind("output_dir:", 0) == 0);
  const fs::path file = fs::temp_directory_path() / "mamlst_exp_file";
  std::ofstream(file) << "x";
  CHECK(ConfigErrorOf(Tiny((file / "out").string(), {{"strategy", "Scratch"}}))
            .rfind("output_dir:", 0) == 0);
  CHECK(ConfigErrorOf(Tiny(file.string(), {{"strategy", "Scratch"}})).rfind("output_dir:", 0) ==
        0);
  fs::remove(file);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("invalid config file writes nothing") {
  const fs::path dir = TempDir("invalid");
  const Json j = Tiny("out", {{"strategy", "Nope"}});
  std::ofstream(dir / "run.json") << j.dump();
  CHECK_THROWS_AS(LoadExperimentConfig((dir / "run.json").string()), ConfigError);
  CHECK_FALSE(fs::exists(dir / "out"));
  std::ofstream(dir / "broken.json") << "{\"strategy\": ";
  CHECK_THROWS_AS(LoadExperimentConfig((dir / "broken.json").string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("scratch with no fine-tuning returns the initialization") {
  const fs::path dir = TempDir("scratch");
  const ExperimentConfig c = ParseExperimentConfig(
      Tiny("out", {{"strategy", "Scratch"}, {"hyper", {{"finetune_steps", 0}}}, {"seeds", {5}}}),
      dir.string());
  const Json summary = RunExperiment(c);
  CHECK(fs::exists(dir / "out" / "summary.json"));
  CHECK(Json::parse(ReadBytes(dir / "out" / "summary.json")) == summary);
  CHECK(summary.at("Scratch").at("5").at("steps") == 0);
  const fs::path ckpts = dir / "out" / "seed-5" / "checkpoints" / "Scratch";
  const Checkpoint init = LoadCheckpoint((ckpts / "init").string());
  const Checkpoint final = LoadCheckpoint((ckpts / "final").string());
  CHECK(ReadBytes(ckpts / "init" / "tensors.bin") == ReadBytes(ckpts / "final" / "tensors.bin"));
  CHECK(init.params == InitParams<float>(c.model, 5));
  CHECK(final.info.seed == 5);
  CHECK(fs::exists(dir / "out" / "config.resolved"));
  CHECK(ParseExperimentConfig(Json::parse(ReadBytes(dir / "out" / "config.resolved")), "/")
            .model == c.model);
  fs::remove_all(dir);
}

TEST_CASE("identical runs give identical artifacts, sequential or parallel") {
  const fs::path dir = TempDir("repro");
  const Json patch{{"strategies", {"MetaLearn", "Transfer"}}, {"seeds", {1, 2}}};
  Json parallel = patch;
  parallel["parallel_seeds"] = true;
  RunExperiment(ParseExperimentConfig(Tiny("a", patch), dir.string()));
  RunExperiment(ParseExperimentConfig(Tiny("b", patch), dir.string()));
  RunExperiment(ParseExperimentConfig(Tiny("c", parallel), dir.string()));
  for (const char *run : {"b", "c"}) {
    for (const char *seed : {"seed-1", "seed-2"}) {
      CHECK(ReadBytes(dir / "a" / seed / "metrics.csv") ==
            ReadBytes(dir / run / seed / "metrics.csv"));
      for (const char *s : {"MetaLearn", "Transfer"}) {
        const fs::path rel = fs::path(seed) / "checkpoints" / s / "final";
        CHECK(ReadBytes(dir / "a" / rel / "tensors.bin") ==
              ReadBytes(dir / run / rel / "tensors.bin"));
        CHECK(ReadBytes(dir / "a" / rel / "manifest.json") ==
              ReadBytes(dir / run / rel / "manifest.json"));
      }
    }
    CHECK(ReadBytes(dir / "a" / "summary.json") == ReadBytes(dir / run / "summary.json"));
  }
  CHECK(ReadBytes(dir / "a" / "seed-1" / "metrics.csv") !=
        ReadBytes(dir / "a" / "seed-2" / "metrics.csv"));
  fs::remove_all(dir);
}

TEST_CASE("generated TSV corpora reproduce the synthetic run") {
  const fs::path dir = TempDir("tsv");
  const Json spec = Tiny("x", {}).at("data").at("synthetic");
  Json spec_with_seed = spec;
  spec_with_seed["seed"] = 9;
  GenerateData(spec_with_seed, (dir / "gen").string());
  CHECK(fs::exists(dir / "gen" / "frames" / "asr" / "000039.bin"));

  const Json patch{{"strategy", "MultiTask"}, {"data", {{"synthetic", spec}, {"seed", 9}}}};
  RunExperiment(ParseExperimentConfig(Tiny("syn", patch), dir.string()));
  Json tsv = Tiny("tsv", {{"strategy", "MultiTask"}});
  tsv["data"] = {{"asr", "gen/asr.tsv"}, {"mt", "gen/mt.tsv"}, {"st", "gen/st.tsv"},
                 {"vocab", "gen/vocab.txt"}};
  RunExperiment(ParseExperimentConfig(tsv, dir.string()));
  CHECK(ReadBytes(dir / "syn" / "seed-1" / "metrics.csv") ==
        ReadBytes(dir / "tsv" / "seed-1" / "metrics.csv"));
  fs::remove_all(dir);
}

void WriteLog(const fs::path &dir, const std::vector<std::string> &strategies, int checkpoints,
              double offset) {
  fs::create_directories(dir);
  MetricLog log;
  for (size_t s = 0; s < strategies.size(); ++s) {
    for (int i = 1; i <= checkpoints; ++i) {
      log.Add(200 * i, strategies[s], "train", "loss", 1.0);
      log.Add(200 * i, strategies[s], "dev", "loss", 1.0 / i + 0.1 * s + offset);
      log.Add(200 * i, strategies[s], "dev", "bleu", 10.0 * i - s);
      log.Add(200 * i, strategies[s], "dev", "wer", 0.5);
    }
  }
  log.WriteCsv((dir / "metrics.csv").string());
}

std::vector<std::vector<std::string>> CsvRows(const std::string &csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream cl(line);
    std::string cell;
    while (std::getline(cl, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST_CASE("compare: two strategies, ten checkpoints") {
  const fs::path dir = TempDir("compare");
  WriteLog(dir / "run", {"MetaLearn", "Transfer"}, 10, 0.0);
  const std::vector<std::string> dirs{(dir / "run").string()};
  const Comparison cmp = CompareRuns(dirs);
  const auto rows = CsvRows(cmp.csv);
  REQUIRE(rows.size() == 21);
  CHECK(rows[0] == std::vector<std::string>{"metric", "step", "run/MetaLearn", "run/Transfer",
                                            "delta:run/Transfer-run/MetaLearn", "best"});
  int loss_rows = 0, bleu_rows = 0;
  for (size_t i = 1; i < rows.size(); ++i) {
    (rows[i][0] == "loss" ? loss_rows : bleu_rows)++;
    CHECK(rows[i][5] == "run/MetaLearn");
  }
  CHECK(loss_rows == 10);
  CHECK(bleu_rows == 10);
  REQUIRE(cmp.verdicts.size() == 2);
  CHECK(cmp.verdicts[0].find("dominant: run/MetaLearn") != std::string::npos);
  CHECK(cmp.verdicts[1].find("dominant: run/MetaLearn") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("compare: a run against itself has zero deltas") {
  const fs::path dir = TempDir("self");
  WriteLog(dir / "run", {"Transfer"}, 10, 0.0);
  const std::vector<std::string> dirs{(dir / "run").string(), (dir / "run").string()};
  const auto rows = CsvRows(CompareRuns(dirs).csv);
  REQUIRE(rows.size() == 21);
  CHECK(rows[0][3] == "run/Transfer#2");
  for (size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][4] == "0");
    CHECK(rows[i][5] == "tie");
  }
  fs::remove_all(dir);
}

TEST_CASE("compare errors") {
  const fs::path dir = TempDir("cmperr");
  WriteLog(dir / "a", {"MetaLearn"}, 10, 0.0);
  WriteLog(dir / "b", {"Transfer"}, 9, 0.0);
  fs::create_directories(dir / "empty");
  const std::vector<std::string> misaligned{(dir / "a").string(), (dir / "b").string()};
  CHECK_THROWS_AS(CompareRuns(misaligned), ContractError);
  const std::vector<std::string> missing{(dir / "a").string(), (dir / "empty").string()};
  try {
    CompareRuns(missing);
    FAIL("expected an error");
  } catch (const ParseError &e) {
    CHECK(std::string(e.what()).find((dir / "empty").string()) != std::string::npos);
  }
  const std::vector<std::string> single{(dir / "a").string()};
  CHECK_THROWS_AS(CompareRuns(single), ContractError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace mamlst
