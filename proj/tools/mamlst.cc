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

// Command-line front end: run experiments, compare runs, check gradients and
// generate synthetic corpora.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mamlst/check_suite.h"
#include "mamlst/errors.h"
#include "mamlst/experiment.h"

namespace {

constexpr int kConfigExit = 2;

int Run(const std::string &config_path, bool quiet) {
  const mamlst::ExperimentConfig config = mamlst::LoadExperimentConfig(config_path);
  mamlst::RunExperiment(config, quiet ? nullptr : &std::cerr);
  std::cout << config.output_dir << "/summary.json\n";
  return 0;
}

int Compare(const std::vector<std::string> &dirs, const std::string &csv_path) {
  const mamlst::Comparison cmp = mamlst::CompareRuns(dirs);
  if (csv_path.empty()) {
    std::cout << cmp.csv;
  } else {
    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    out << cmp.csv;
    if (!out) throw std::runtime_error("cannot write " + csv_path);
  }
  for (const std::string &line : cmp.verdicts) std::cout << "verdict " << line << '\n';
  return 0;
}

int GradCheck(uint64_t seed, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  const auto checks = mamlst::GradCheckSuite(seed);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool ok = true;
  for (const auto &c : checks) {
    const bool pass = c.result.max_rel_error < tolerance;
    ok = ok && pass;
    std::printf("%-20s max_rel_error %.3e  %s\n", c.name.c_str(), c.result.max_rel_error,
                pass ? "ok" : "FAILED");
  }
  std::printf("%zu checks in %.2f s: %s\n", checks.size(), seconds, ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int GenData(const std::string &spec_path, const std::string &out_dir) {
  std::ifstream in(spec_path, std::ios::binary);
  if (!in) throw mamlst::ConfigError("cannot read spec " + spec_path);
  mamlst::Json spec;
  try {
    spec = mamlst::Json::parse(in);
  } catch (const mamlst::Json::exception &e) {
    throw mamlst::ConfigError(spec_path + ": " + e.what());
  }
  mamlst::GenerateData(spec, out_dir);
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"First-order meta-learning for low-resource speech translation"};
  app.require_subcommand(1);

  std::string config_path;
  bool quiet = false;
  auto *run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config_path, "Experiment config")->required();
  run->add_flag("-q,--quiet", quiet, "No progress output");

  std::vector<std::string> dirs;
  std::string csv_path;
  auto *compare = app.add_subcommand("compare", "Compare dev curves of run directories");
  compare->add_option("dirs", dirs, "Directories holding metrics.csv")->required();
  compare->add_option("--csv", csv_path, "Write the table here instead of stdout");

  uint64_t seed = 1;
  double tolerance = 1e-4;
  auto *gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every op");
  gradcheck->add_option("--seed", seed, "Input seed");
  gradcheck->add_option("--tolerance", tolerance, "Largest accepted relative error");

  std::string spec_path, out_dir;
  auto *gen = app.add_subcommand("gen-data", "Write synthetic corpora as TSV datasets");
  gen->add_option("spec", spec_path, "Synthetic spec JSON")->required();
  gen->add_option("out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return Run(config_path, quiet);
    if (*compare) return Compare(dirs, csv_path);
    if (*gradcheck) return GradCheck(seed, tolerance);
    if (*gen) return GenData(spec_path, out_dir);
  } catch (const mamlst::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
