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

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mamlst/checkpoint.h"
#include "mamlst/errors.h"
#include "mamlst/metrics.h"

namespace mamlst {
namespace {

namespace fs = std::filesystem;

void WriteText(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void CheckOutputDir(const fs::path &out) {
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) {
      throw ConfigError("output_dir: " + out.string() + " is not a directory");
    }
    if (access(out.c_str(), W_OK | X_OK) != 0) {
      throw ConfigError("output_dir: " + out.string() + " is not writable");
    }
    return;
  }
  fs::path p = out.parent_path();
  while (!p.empty() && !fs::exists(p)) p = p.parent_path();
  if (p.empty()) p = fs::current_path();
  if (!fs::is_directory(p) || access(p.c_str(), W_OK | X_OK) != 0) {
    throw ConfigError("output_dir: cannot create " + out.string() + " (" + p.string() +
                      " is not a writable directory)");
  }
}

void CheckFile(const std::string &field, const std::string &path) {
  if (!fs::is_regular_file(path)) throw ConfigError(field + ": no such file " + path);
}

// "source<TAB>target" rows, for building a vocabulary before loading.
std::vector<std::pair<std::string, std::string>> ReadTsvText(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset " + path);
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path + ": line " + std::to_string(number) + ": no TAB separator");
    }
    rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return rows;
}

int FirstFrameDim(const std::string &tsv) {
  const auto rows = ReadTsvText(tsv);
  if (rows.empty()) throw ParseError(tsv + ": no examples");
  fs::path fp(rows.front().first);
  if (fp.is_relative()) fp = fs::path(tsv).parent_path() / fp;
  return ReadFrames(fp.string()).frame_dim;
}

DataConfig ParseData(const Json &j, const fs::path &base) {
  DataConfig d;
  JsonFields f(j, "data");
  auto path = [&](const char *key, std::string *out) {
    f.Get(key, out);
    if (out->empty()) return;
    fs::path p(*out);
    if (p.is_relative()) p = base / p;
    *out = p.lexically_normal().string();
    CheckFile(f.Path(key), *out);
  };
  path("asr", &d.asr);
  path("mt", &d.mt);
  path("st", &d.st);
  path("st_dev", &d.st_dev);
  path("vocab", &d.vocab);
  d.synthetic = d.asr.empty() && d.mt.empty() && d.st.empty();
  if (f.Has("synthetic")) {
    if (!d.synthetic) throw ConfigError("data.synthetic: cannot be combined with TSV paths");
    d.spec = SyntheticSpecFromJson(f.Raw("synthetic"), "data.synthetic");
  }
  if (f.Has("seed")) {
    if (!d.synthetic) throw ConfigError("data.seed: only applies to synthetic data");
    uint64_t seed = 0;
    f.Get("seed", &seed);
    d.seed = seed;
  }
  f.Get("dev_fraction", &d.dev_fraction);
  f.Finish();
  if (!d.synthetic) {
    for (const auto &[key, value] : {std::pair{"asr", d.asr}, {"mt", d.mt}, {"st", d.st}}) {
      if (value.empty()) throw ConfigError(std::string("data.") + key + ": missing TSV path");
    }
  } else if (!d.st_dev.empty() || !d.vocab.empty()) {
    throw ConfigError(std::string("data.") + (d.st_dev.empty() ? "vocab" : "st_dev") +
                      ": only applies to TSV data");
  }
  if (!(d.dev_fraction > 0.0 && d.dev_fraction < 1.0) && d.st_dev.empty()) {
    throw ConfigError("data.dev_fraction: must be in (0, 1)");
  }
  return d;
}

Strategy StrategyField(const Json &v, const std::string &path) {
  if (!v.is_string()) throw ConfigError(path + ": expected a strategy name");
  try {
    return ParseStrategy(v.get<std::string>());
  } catch (const std::exception &) {
    throw ConfigError(path + ": unknown strategy '" + v.get<std::string>() +
                      "' (expected MetaLearn, Transfer, MultiTask or Scratch)");
  }
}

}  // namespace

ExperimentConfig ParseExperimentConfig(const Json &j, const std::string &base_dir) {
  ExperimentConfig c;
  const fs::path base = base_dir.empty() ? fs::current_path() : fs::path(base_dir);
  JsonFields f(j, "");
  bool vocab_given = false, frame_dim_given = false;
  if (f.Has("model")) {
    const Json &m = f.Raw("model");
    c.model = ModelConfigFromJson(m, "model");
    vocab_given = m.contains("vocab_size");
    frame_dim_given = m.contains("frame_dim");
  }
  if (f.Has("hyper")) c.hyper = HyperParamsFromJson(f.Raw("hyper"), "hyper");

  if (f.Has("strategy") && f.Has("strategies")) {
    throw ConfigError("strategies: give either strategy or strategies, not both");
  }
  if (f.Has("strategy")) c.strategies.push_back(StrategyField(f.Raw("strategy"), "strategy"));
  if (f.Has("strategies")) {
    const Json &list = f.Raw("strategies");
    if (!list.is_array()) throw ConfigError("strategies: expected an array");
    for (size_t i = 0; i < list.size(); ++i) {
      const std::string path = "strategies[" + std::to_string(i) + "]";
      const Strategy s = StrategyField(list[i], path);
      if (std::find(c.strategies.begin(), c.strategies.end(), s) != c.strategies.end()) {
        throw ConfigError(path + ": duplicate strategy " + StrategyName(s));
      }
      c.strategies.push_back(s);
    }
  }

  c.data = f.Has("data") ? ParseData(f.Raw("data"), base) : DataConfig{};

  f.Get("output_dir", &c.output_dir);
  if (c.output_dir.empty()) throw ConfigError("output_dir: missing");
  {
    fs::path out(c.output_dir);
    if (out.is_relative()) out = base / out;
    c.output_dir = out.lexically_normal().string();
  }

  if (f.Has("seeds")) {
    const Json &list = f.Raw("seeds");
    if (!list.is_array() || list.empty()) throw ConfigError("seeds: expected a non-empty array");
    for (size_t i = 0; i < list.size(); ++i) {
      const std::string path = "seeds[" + std::to_string(i) + "]";
      if (!list[i].is_number_integer() ||
          (!list[i].is_number_unsigned() && list[i].get<int64_t>() < 0)) {
        throw ConfigError(path + ": expected a non-negative integer");
      }
      const auto s = list[i].get<uint64_t>();
      if (std::find(c.seeds.begin(), c.seeds.end(), s) != c.seeds.end()) {
        throw ConfigError(path + ": duplicate seed " + std::to_string(s));
      }
      c.seeds.push_back(s);
    }
  } else {
    c.seeds.push_back(c.hyper.seed);
  }
  f.Get("parallel_seeds", &c.parallel_seeds);
  f.Get("augment", &c.augment);
  f.Get("cascade", &c.cascade);
  f.Finish();
  if (c.strategies.empty() && !c.cascade) throw ConfigError("strategy: missing");

  Vocabulary vocab;
  int frame_dim = 0;
  try {
    vocab = ExperimentVocab(c);
    frame_dim = c.data.synthetic ? c.data.spec.frame_dim : FirstFrameDim(c.data.asr);
  } catch (const ConfigError &) {
    throw;
  } catch (const std::exception &e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  if (!vocab_given) {
    c.model.vocab_size = vocab.size();
  } else if (c.model.vocab_size != vocab.size()) {
    throw ConfigError("model.vocab_size: " + std::to_string(c.model.vocab_size) +
                      " but the data vocabulary has " + std::to_string(vocab.size()) +
                      " symbols");
  }
  if (!frame_dim_given) {
    c.model.frame_dim = frame_dim;
  } else if (c.model.frame_dim != frame_dim) {
    throw ConfigError("model.frame_dim: " + std::to_string(c.model.frame_dim) +
                      " but the data frames are " + std::to_string(frame_dim) + " wide");
  }
  try {
    c.model.Validate();
  } catch (const std::exception &e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  CheckOutputDir(c.output_dir);
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception &e) {
    throw ConfigError(path + ": " + e.what());
  }
  return ParseExperimentConfig(j, fs::absolute(path).parent_path().string());
}

Json ToJson(const ExperimentConfig &c) {
  Json strategies = Json::array();
  for (Strategy s : c.strategies) strategies.push_back(StrategyName(s));
  Json data{{"dev_fraction", c.data.dev_fraction}};
  if (c.data.synthetic) {
    data["synthetic"] = ToJson(c.data.spec);
    if (c.data.seed) data["seed"] = *c.data.seed;
  } else {
    data["asr"] = c.data.asr;
    data["mt"] = c.data.mt;
    data["st"] = c.data.st;
    if (!c.data.st_dev.empty()) data["st_dev"] = c.data.st_dev;
    if (!c.data.vocab.empty()) data["vocab"] = c.data.vocab;
  }
  return Json{{"model", ToJson(c.model)},
              {"hyper", ToJson(c.hyper)},
              {"strategies", strategies},
              {"data", data},
              {"output_dir", c.output_dir},
              {"seeds", c.seeds},
              {"parallel_seeds", c.parallel_seeds},
              {"augment", c.augment},
              {"cascade", c.cascade}};
}

Vocabulary ExperimentVocab(const ExperimentConfig &c) {
  if (c.data.synthetic) return SyntheticVocab(c.data.spec);
  if (!c.data.vocab.empty()) return Vocabulary::Load(c.data.vocab);
  std::vector<std::vector<std::string>> corpora;
  for (const std::string *path : {&c.data.asr, &c.data.mt, &c.data.st, &c.data.st_dev}) {
    if (path->empty()) continue;
    std::vector<std::string> text;
    for (auto &[source, target] : ReadTsvText(*path)) {
      if (path == &c.data.mt) text.push_back(std::move(source));
      text.push_back(std::move(target));
    }
    corpora.push_back(std::move(text));
  }
  return BuildUniversalVocab(corpora);
}

SeedData BuildSeedData(const ExperimentConfig &c, const Vocabulary &vocab, uint64_t seed) {
  SeedData d;
  Task st;
  if (c.data.synthetic) {
    const SyntheticSpec &spec = c.data.spec;
    const uint64_t base = c.data.seed.value_or(seed);
    d.asr = GenAsrTask(spec, vocab, spec.asr_size, DeriveSeed(base, 1));
    d.mt = GenMtTask(spec, vocab, spec.mt_size, DeriveSeed(base, 2));
    st = GenStTask(spec, vocab, spec.st_size, DeriveSeed(base, 3));
  } else {
    d.asr = LoadTsvTask(c.data.asr, Modality::kFrames, TaskRole::kAsr, vocab);
    d.mt = LoadTsvTask(c.data.mt, Modality::kTokens, TaskRole::kMt, vocab);
    st = LoadTsvTask(c.data.st, Modality::kFrames, TaskRole::kSt, vocab);
  }
  if (!c.data.st_dev.empty()) {
    d.st_train = std::move(st);
    d.st_dev = LoadTsvTask(c.data.st_dev, Modality::kFrames, TaskRole::kSt, vocab);
  } else {
    TaskSplit split = SplitDev(st, c.data.dev_fraction);
    d.st_train = std::move(split.train);
    d.st_dev = std::move(split.dev);
  }
  return d;
}

Json RunExperiment(const ExperimentConfig &c, std::ostream *progress) {
  const fs::path out(c.output_dir);
  fs::create_directories(out);
  WriteText(out / "config.resolved", ToJson(c).dump(2) + "\n");
  const Vocabulary vocab = ExperimentVocab(c);
  vocab.Save((out / "vocab.txt").string());

  std::mutex mu;
  Json summary = Json::object();
  auto say = [&](uint64_t seed, const std::string &msg) {
    if (progress == nullptr) return;
    std::lock_guard<std::mutex> lock(mu);
    *progress << "[seed " << seed << "] " << msg << std::endl;
  };
  auto record = [&](const std::string &name, uint64_t seed, Json entry) {
    std::lock_guard<std::mutex> lock(mu);
    summary[name][std::to_string(seed)] = std::move(entry);
    WriteText(out / "summary.json", summary.dump(2) + "\n");
  };

  auto run_seed = [&](uint64_t seed) {
    HyperParams hyper = c.hyper;
    hyper.seed = seed;
    const ModelConfig &model = c.model;
    const fs::path dir = out / ("seed-" + std::to_string(seed));
    const fs::path ckpt_dir = dir / "checkpoints";
    fs::create_directories(dir);
    MetricLog log;
    auto flush = [&] { log.WriteCsv((dir / "metrics.csv").string()); };

    SeedData data = BuildSeedData(c, vocab, seed);
    say(seed, "data: asr " + std::to_string(data.asr.examples.size()) + ", mt " +
                  std::to_string(data.mt.examples.size()) + ", st train " +
                  std::to_string(data.st_train.examples.size()) + ", st dev " +
                  std::to_string(data.st_dev.examples.size()));

    std::optional<ParamMap<float>> mt_model;
    if (c.augment || c.cascade) {
      say(seed, "training MT model (" + std::to_string(hyper.meta_steps) + " steps)");
      const Task *mt_tasks[] = {&data.mt};
      mt_model = SupervisedTrain<float>(mt_tasks, model, hyper, hyper.meta_steps, "MT", &log);
      SaveCheckpoint((ckpt_dir / "MT").string(), *mt_model,
                     {model, seed, hyper.meta_steps, "MT"});
      flush();
    }
    if (c.augment) {
      SynthesisReport rep = SynthesizeStData(model, *mt_model, data.asr, hyper);
      log.Add(0, "Augment", "synthesis", "pairs",
              static_cast<double>(rep.task.examples.size()));
      log.Add(0, "Augment", "synthesis", "dropped", rep.dropped);
      for (auto &ex : rep.task.examples) data.st_train.examples.push_back(std::move(ex));
      say(seed, "augmented ST train to " + std::to_string(data.st_train.examples.size()) +
                    " pairs (" + std::to_string(rep.dropped) + " dropped)");
      flush();
    }

    const StrategyTasks tasks{&data.asr, &data.mt, &data.st_train, &data.st_dev};
    std::optional<ParamMap<float>> asr_model;
    for (Strategy s : c.strategies) {
      const std::string name = StrategyName(s);
      say(seed, name + ": start");
      StrategyResult<float> r = RunStrategy<float>(s, tasks, vocab, model, hyper, &log);
      flush();
      const int64_t init_step = s == Strategy::kScratch ? 0 : hyper.meta_steps;
      SaveCheckpoint((ckpt_dir / name / "init").string(), r.theta_init,
                     {model, seed, init_step, name + "/init"});
      SaveCheckpoint((ckpt_dir / name / "final").string(), r.final.params,
                     {model, seed, r.final.selected_step, name + "/final"});
      // Transfer's initialization is exactly the ASR model a cascade needs.
      if (s == Strategy::kTransfer) asr_model = r.theta_init;
      std::ostringstream msg;
      msg << name << ": dev loss " << r.final.dev_loss << ", BLEU " << r.final.dev_report.bleu
          << ", WER " << r.final.dev_report.wer << " (step " << r.final.selected_step << ")";
      say(seed, msg.str());
      record(name, seed,
             Json{{"bleu", r.final.dev_report.bleu},
                  {"wer", r.final.dev_report.wer},
                  {"final_loss", r.final.dev_loss},
                  {"steps", hyper.finetune_steps},
                  {"selected_step", r.final.selected_step}});
    }

    if (c.cascade) {
      if (!asr_model) {
        say(seed, "training ASR model (" + std::to_string(hyper.meta_steps) + " steps)");
        const Task *asr_tasks[] = {&data.asr};
        asr_model =
            SupervisedTrain<float>(asr_tasks, model, hyper, hyper.meta_steps, "ASR", &log);
        flush();
      }
      SaveCheckpoint((ckpt_dir / "ASR").string(), *asr_model,
                     {model, seed, hyper.meta_steps, "ASR"});
      const auto outputs = CascadeTranslateTask(model, *asr_model, *mt_model, data.st_dev, hyper);
      std::vector<std::string> hyps, refs;
      for (size_t i = 0; i < outputs.size(); ++i) {
        hyps.push_back(vocab.Decode(outputs[i]));
        refs.push_back(vocab.Decode(data.st_dev.examples[i].target_ids));
      }
      const EvalReport report = Evaluate(hyps, refs);
      log.Add(0, "Cascade", "dev", "bleu", report.bleu);
      log.Add(0, "Cascade", "dev", "wer", report.wer);
      flush();
      say(seed, "Cascade: BLEU " + std::to_string(report.bleu));
      record("Cascade", seed,
             Json{{"bleu", report.bleu}, {"wer", report.wer}, {"final_loss", nullptr},
                  {"steps", 0}});
    }
  };

  if (c.parallel_seeds && c.seeds.size() > 1) {
    std::vector<std::exception_ptr> errors(c.seeds.size());
    std::vector<std::thread> threads;
    for (size_t i = 0; i < c.seeds.size(); ++i) {
      threads.emplace_back([&, i] {
        try {
          run_seed(c.seeds[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto &t : threads) t.join();
    for (auto &e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (uint64_t seed : c.seeds) run_seed(seed);
  }
  return summary;
}

namespace {

struct Series {
  std::string label;
  std::map<int64_t, double> loss, bleu;
};

std::string StepList(const std::map<int64_t, double> &m) {
  std::string s = "[";
  for (const auto &[step, v] : m) s += (s.size() > 1 ? " " : "") + std::to_string(step);
  return s + "]";
}

}  // namespace

Comparison CompareRuns(std::span<const std::string> run_dirs) {
  std::vector<Series> series;
  std::set<std::string> labels;
  for (const std::string &dir : run_dirs) {
    const fs::path csv = fs::path(dir) / "metrics.csv";
    if (!fs::is_regular_file(csv)) {
      std::string hint;
      for (const auto &entry : fs::directory_iterator(dir, fs::directory_options::skip_permission_denied)) {
        if (entry.path().filename().string().rfind("seed-", 0) == 0) {
          hint = " (pass per-seed directories such as " + entry.path().string() + ")";
          break;
        }
      }
      throw ParseError("run directory " + dir + " has no metrics.csv" + hint);
    }
    const MetricLog log = MetricLog::ReadCsv(csv.string());
    std::string run = fs::path(dir).lexically_normal().filename().string();
    if (run.empty() || run == ".") run = fs::path(dir).lexically_normal().parent_path().filename().string();
    std::vector<std::string> order;
    std::map<std::string, Series> by_strategy;
    for (const MetricRow &row : log.rows()) {
      if (row.split != "dev" || (row.metric != "loss" && row.metric != "bleu")) continue;
      if (!by_strategy.count(row.strategy)) order.push_back(row.strategy);
      Series &s = by_strategy[row.strategy];
      (row.metric == "loss" ? s.loss : s.bleu)[row.step] = row.value;
    }
    for (const std::string &strategy : order) {
      Series s = std::move(by_strategy[strategy]);
      // Single scores (the cascade) have no curve to compare.
      if (s.loss.empty() || s.bleu.empty()) continue;
      std::string label = run + "/" + strategy;
      for (int k = 2; labels.count(label); ++k) label = run + "/" + strategy + "#" + std::to_string(k);
      labels.insert(label);
      s.label = label;
      series.push_back(std::move(s));
    }
  }
  if (series.size() < 2) {
    throw ContractError("need at least two strategy series with dev evaluations to compare");
  }
  for (const Series &s : series) {
    for (auto metric : {&Series::loss, &Series::bleu}) {
      const auto &a = series.front().*metric;
      const auto &b = s.*metric;
      bool same = a.size() == b.size();
      for (auto i = a.begin(), j = b.begin(); same && i != a.end(); ++i, ++j) {
        same = i->first == j->first;
      }
      if (!same) {
        throw ContractError("misaligned eval grids: " + series.front().label +
                            " evaluates at steps " + StepList(a) + " but " + s.label +
                            " at " + StepList(b));
      }
    }
  }

  Comparison result;
  std::ostringstream csv;
  csv.precision(10);
  csv << "metric,step";
  for (const Series &s : series) csv << ',' << s.label;
  for (size_t i = 1; i < series.size(); ++i) {
    csv << ",delta:" << series[i].label << '-' << series[0].label;
  }
  csv << ",best\n";
  struct MetricSpec {
    const char *name;
    std::map<int64_t, double> Series::*values;
    bool lower_is_better;
  };
  for (const MetricSpec &m : {MetricSpec{"loss", &Series::loss, true},
                              MetricSpec{"bleu", &Series::bleu, false}}) {
    std::vector<int> wins(series.size(), 0);
    int ties = 0, checkpoints = 0;
    for (const auto &[step, unused] : series.front().*m.values) {
      (void)unused;
      ++checkpoints;
      csv << m.name << ',' << step;
      std::vector<double> v;
      for (const Series &s : series) v.push_back((s.*m.values).at(step));
      for (double x : v) csv << ',' << x;
      for (size_t i = 1; i < v.size(); ++i) csv << ',' << v[i] - v[0];
      const double best = m.lower_is_better ? *std::min_element(v.begin(), v.end())
                                            : *std::max_element(v.begin(), v.end());
      const auto n_best = std::count(v.begin(), v.end(), best);
      if (n_best > 1) {
        ++ties;
        csv << ",tie\n";
      } else {
        const size_t w = std::find(v.begin(), v.end(), best) - v.begin();
        ++wins[w];
        csv << ',' << series[w].label << '\n';
      }
    }
    std::ostringstream verdict;
    verdict << m.name << " (" << (m.lower_is_better ? "lower" : "higher")
            << " is better): ";
    size_t top = 0;
    for (size_t i = 0; i < series.size(); ++i) {
      verdict << series[i].label << " best at " << wins[i] << "/" << checkpoints << ", ";
      if (wins[i] > wins[top]) top = i;
    }
    verdict << "ties " << ties << "/" << checkpoints << "; ";
    if (2 * wins[top] > checkpoints) {
      verdict << "dominant: " << series[top].label;
    } else {
      verdict << "dominant: none";
    }
    result.verdicts.push_back(verdict.str());
  }
  result.csv = csv.str();
  return result;
}

void GenerateData(const Json &spec_json, const std::string &out_dir) {
  if (!spec_json.is_object()) throw ConfigError("spec: expected an object");
  Json fields = spec_json;
  uint64_t seed = 1;
  if (fields.contains("seed")) {
    const Json seed_only = Json::object({{"seed", fields["seed"]}});
    JsonFields f(seed_only, "spec");
    f.Get("seed", &seed);
    fields.erase("seed");
  }
  const SyntheticSpec spec = SyntheticSpecFromJson(fields, "spec");
  CheckOutputDir(out_dir);

  const fs::path out(out_dir);
  const Vocabulary vocab = SyntheticVocab(spec);
  fs::create_directories(out);
  vocab.Save((out / "vocab.txt").string());
  Json resolved = ToJson(spec);
  resolved["seed"] = seed;
  WriteText(out / "spec.json", resolved.dump(2) + "\n");

  auto write_frames_task = [&](const Task &task, const std::string &name) {
    fs::create_directories(out / "frames" / name);
    std::ostringstream tsv;
    for (size_t i = 0; i < task.examples.size(); ++i) {
      const Example &ex = task.examples[i];
      char file[32];
      std::snprintf(file, sizeof file, "%06zu.bin", i);
      const std::string rel = "frames/" + name + "/" + file;
      WriteFrames((out / rel).string(), FrameMatrix{ex.num_frames, task.frame_dim, ex.frames});
      tsv << rel << '\t' << vocab.Decode(ex.target_ids) << '\n';
    }
    WriteText(out / (name + ".tsv"), tsv.str());
  };
  write_frames_task(GenAsrTask(spec, vocab, spec.asr_size, DeriveSeed(seed, 1)), "asr");
  write_frames_task(GenStTask(spec, vocab, spec.st_size, DeriveSeed(seed, 3)), "st");
  const Task mt = GenMtTask(spec, vocab, spec.mt_size, DeriveSeed(seed, 2));
  std::ostringstream tsv;
  for (const Example &ex : mt.examples) {
    tsv << vocab.Decode(ex.source_ids) << '\t' << vocab.Decode(ex.target_ids) << '\n';
  }
  WriteText(out / "mt.tsv", tsv.str());
}

}  // namespace mamlst
