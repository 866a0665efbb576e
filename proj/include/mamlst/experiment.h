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

// Experiment runner: JSON config, per-seed data and strategy runs,
// checkpoints, metric CSVs, summaries and run comparison.

#ifndef MAMLST_EXPERIMENT_H_
#define MAMLST_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mamlst/config_io.h"
#include "mamlst/meta.h"
#include "mamlst/model.h"
#include "mamlst/tasks.h"
#include "mamlst/vocab.h"

namespace mamlst {

struct DataConfig {
  // Synthetic tasks, or TSV corpora when asr/mt/st paths are given.
  bool synthetic = true;
  SyntheticSpec spec;
  std::optional<uint64_t> seed;  // synthetic corpora; defaults to the run seed
  std::string asr, mt, st, st_dev, vocab;  // absolute once parsed
  double dev_fraction = 0.1;  // ST dev split when st_dev is empty
};

struct ExperimentConfig {
  ModelConfig model;
  HyperParams hyper;
  std::vector<Strategy> strategies;
  DataConfig data;
  std::string output_dir;
  std::vector<uint64_t> seeds;
  bool parallel_seeds = false;
  // Add ST pairs synthesized by an MT model from the ASR corpus to ST train.
  bool augment = false;
  // Also score the ASR -> MT cascade on ST dev.
  bool cascade = false;
};

// Relative paths resolve against base_dir. Checks every field, every
// referenced path and the output directory, and fills vocab_size and
// frame_dim from the data; throws ConfigError naming the field. Writes
// nothing.
ExperimentConfig ParseExperimentConfig(const Json &j, const std::string &base_dir);
ExperimentConfig LoadExperimentConfig(const std::string &path);
// Every setting spelled out; parses back to the same config.
Json ToJson(const ExperimentConfig &config);

Vocabulary ExperimentVocab(const ExperimentConfig &config);

struct SeedData {
  Task asr, mt, st_train, st_dev;
};
SeedData BuildSeedData(const ExperimentConfig &config, const Vocabulary &vocab,
                       uint64_t seed);

// Writes config.resolved, seed-<s>/metrics.csv, seed-<s>/checkpoints/... and
// summary.json under output_dir; returns the summary. Artifacts written
// before a failure are kept.
Json RunExperiment(const ExperimentConfig &config, std::ostream *progress = nullptr);

struct Comparison {
  std::string csv;
  std::vector<std::string> verdicts;
};

// Side-by-side dev loss and BLEU per checkpoint for every (run dir,
// strategy) series with dev curves, deltas against the first series, and one verdict line
// per metric. Each dir must hold a metrics.csv; all series must share the
// same evaluation steps.
Comparison CompareRuns(std::span<const std::string> run_dirs);

// Writes the synthetic corpora of a spec as TSV datasets with frames files
// and a vocabulary file under out_dir. spec_json holds SyntheticSpec fields
// plus an optional "seed".
void GenerateData(const Json &spec_json, const std::string &out_dir);

}  // namespace mamlst

#endif  // MAMLST_EXPERIMENT_H_
