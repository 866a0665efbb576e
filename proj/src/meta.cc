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

#include "mamlst/meta.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace mamlst {
namespace {

// Rng streams per phase, all derived from HyperParams::seed.
constexpr uint64_t kMetaStream = 101;
constexpr uint64_t kPretrainStream = 102;
constexpr uint64_t kFinetuneStream = 103;

void Require(bool ok, const std::string &what) {
  if (!ok) throw ConfigError(what);
}

std::string Lower(std::string s) {
  for (char &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

void HyperParams::Validate() const {
  Require(std::isfinite(alpha) && alpha >= 0, "alpha must be >= 0");
  Require(std::isfinite(beta) && beta >= 0, "beta must be >= 0");
  Require(std::isfinite(gamma) && gamma >= 0, "gamma must be >= 0");
  Require(std::isfinite(pretrain_lr) && pretrain_lr >= 0, "pretrain_lr must be >= 0");
  Require(k >= 1, "k must be >= 1");
  Require(l >= 1, "l must be >= 1");
  Require(m_batch >= 1, "m_batch must be >= 1");
  Require(pretrain_batch >= 1, "pretrain_batch must be >= 1");
  Require(meta_steps >= 0, "meta_steps must be >= 0");
  Require(finetune_steps >= 0, "finetune_steps must be >= 0");
  Require(eval_every >= 1, "eval_every must be >= 1");
  Require(decode_max_len >= 1, "decode_max_len must be >= 1");
  Require(eval_batch >= 1, "eval_batch must be >= 1");
}

std::string StrategyName(Strategy s) {
  switch (s) {
    case Strategy::kMetaLearn: return "MetaLearn";
    case Strategy::kTransfer: return "Transfer";
    case Strategy::kMultiTask: return "MultiTask";
    case Strategy::kScratch: return "Scratch";
  }
  return "?";
}

Strategy ParseStrategy(const std::string &name) {
  const std::string n = Lower(name);
  if (n == "metalearn" || n == "meta") return Strategy::kMetaLearn;
  if (n == "transfer") return Strategy::kTransfer;
  if (n == "multitask") return Strategy::kMultiTask;
  if (n == "scratch") return Strategy::kScratch;
  throw ConfigError("unknown strategy '" + name +
                    "' (expected MetaLearn, Transfer, MultiTask or Scratch)");
}

void MetricLog::Add(int64_t step, std::string strategy, std::string split,
                    std::string metric, double value) {
  rows_.push_back({step, std::move(strategy), std::move(split), std::move(metric), value});
}

std::vector<MetricRow> MetricLog::Select(const std::string &strategy,
                                         const std::string &split,
                                         const std::string &metric) const {
  std::vector<MetricRow> out;
  for (const MetricRow &r : rows_) {
    if (!strategy.empty() && r.strategy != strategy) continue;
    if (!split.empty() && r.split != split) continue;
    if (!metric.empty() && r.metric != metric) continue;
    out.push_back(r);
  }
  return out;
}

void MetricLog::WriteCsv(const std::string &path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,strategy,split,metric,value\n";
  out.precision(17);
  for (const MetricRow &r : rows_) {
    out << r.step << ',' << r.strategy << ',' << r.split << ',' << r.metric << ','
        << r.value << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

MetricLog MetricLog::ReadCsv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "step,strategy,split,metric,value") {
    throw ParseError(path + ": missing metrics header");
  }
  MetricLog log;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 5) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 5 fields");
    }
    try {
      log.Add(std::stoll(fields[0]), fields[1], fields[2], fields[3], std::stod(fields[4]));
    } catch (const std::logic_error &) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return log;
}

template <typename T>
LossGradFn<T> ModelObjective(const ModelConfig &config) {
  return [config](const ParamMap<T> &params, const Batch &batch, Modality modality,
                  PassMode mode) {
    return ModelLossAndGrads<T>(config, params, batch, modality, mode);
  };
}

template <typename T>
ParamMap<T> AuxiliaryStep(const LossGradFn<T> &objective, const ParamMap<T> &theta_m,
                          const Batch &batch, Modality modality, double alpha,
                          PassMode mode, T *loss) {
  LossAndGrads<T> lg = objective(theta_m, batch, modality, mode);
  if (loss != nullptr) *loss = lg.loss;
  return SgdUpdated(theta_m, lg.grads, alpha);
}

template <typename T>
MetaGradient<T> ComputeMetaGradient(const LossGradFn<T> &objective,
                                    const ParamMap<T> &theta_m, const Task &task,
                                    const HyperParams &hyper, Rng &rng, bool train) {
  Batch aux = SampleBatch(task, hyper.k, rng);
  Batch held = SampleBatch(task, hyper.l, rng);
  PassMode mode{train, &rng};
  MetaGradient<T> out;
  ParamMap<T> adapted = AuxiliaryStep(objective, theta_m, aux, task.input_modality,
                                      hyper.alpha, mode, &out.aux_loss);
  LossAndGrads<T> lg = objective(adapted, held, task.input_modality, mode);
  out.grads = std::move(lg.grads);
  out.adapted_loss = lg.loss;
  return out;
}

template <typename T>
ParamMap<T> MetaStep(const LossGradFn<T> &objective, const ParamMap<T> &theta_m,
                     const Task &task, const HyperParams &hyper, Rng &rng, bool train) {
  MetaGradient<T> mg = ComputeMetaGradient(objective, theta_m, task, hyper, rng, train);
  return SgdUpdated(theta_m, mg.grads, hyper.beta);
}

template <typename T>
ParamMap<T> MetaTrain(std::span<const Task *const> source_tasks,
                      const ModelConfig &config, const HyperParams &hyper,
                      MetricLog *log, std::optional<ParamMap<T>> init,
                      const BatchObserver &observer) {
  hyper.Validate();
  if (source_tasks.empty()) throw ContractError("meta-training needs source tasks");
  for (const Task *t : source_tasks) {
    if (t->role == TaskRole::kSt) {
      throw ContractError("target task " + t->id + " passed as a meta-training source");
    }
    if (t->examples.empty()) throw ContractError("source task " + t->id + " is empty");
  }
  ParamMap<T> params = init ? std::move(*init) : InitParams<T>(config, hyper.seed);
  const LossGradFn<T> objective = ModelObjective<T>(config);
  Rng rng(DeriveSeed(hyper.seed, kMetaStream));
  OptimizerState<T> outer;
  outer.kind = hyper.meta_optimizer;
  const std::string name = StrategyName(Strategy::kMetaLearn);
  for (int step = 1; step <= hyper.meta_steps; ++step) {
    const Task &task = *source_tasks[SampleTask(source_tasks, rng)];
    if (observer) observer(task, step);
    MetaGradient<T> mg = ComputeMetaGradient(objective, params, task, hyper, rng);
    OptimizerStep(params, mg.grads, outer, hyper.beta);
    if (log != nullptr) {
      log->Add(step, name, "meta", "adapted_loss", mg.adapted_loss);
    }
  }
  return params;
}

template <typename T>
ParamMap<T> SupervisedTrain(std::span<const Task *const> tasks,
                            const ModelConfig &config, const HyperParams &hyper,
                            int steps, const std::string &strategy, MetricLog *log,
                            std::optional<ParamMap<T>> init,
                            const BatchObserver &observer) {
  hyper.Validate();
  if (tasks.empty()) throw ContractError("training needs at least one task");
  for (const Task *t : tasks) {
    if (t->examples.empty()) throw ContractError("task " + t->id + " is empty");
  }
  ParamMap<T> params = init ? std::move(*init) : InitParams<T>(config, hyper.seed);
  Rng rng(DeriveSeed(hyper.seed, kPretrainStream));
  OptimizerState<T> opt;
  opt.kind = hyper.pretrain_optimizer;
  for (int step = 1; step <= steps; ++step) {
    const Task &task = *tasks[SampleTask(tasks, rng)];
    if (observer) observer(task, step);
    Batch batch = SampleBatch(task, hyper.pretrain_batch, rng);
    LossAndGrads<T> lg = ModelLossAndGrads<T>(config, params, batch, task.input_modality,
                                              PassMode{true, &rng});
    OptimizerStep(params, lg.grads, opt, hyper.pretrain_lr);
    if (log != nullptr) log->Add(step, strategy, "pretrain", "loss", lg.loss);
  }
  return params;
}

template <typename T>
ParamMap<T> TransferTrain(const Task &asr_task, const ModelConfig &config,
                          const HyperParams &hyper, MetricLog *log) {
  const Task *tasks[] = {&asr_task};
  return SupervisedTrain<T>(tasks, config, hyper, hyper.meta_steps,
                            StrategyName(Strategy::kTransfer), log);
}

template <typename T>
ParamMap<T> MultitaskTrain(std::span<const Task *const> all_tasks,
                           const ModelConfig &config, const HyperParams &hyper,
                           MetricLog *log, const BatchObserver &observer) {
  return SupervisedTrain<T>(all_tasks, config, hyper, hyper.meta_steps,
                            StrategyName(Strategy::kMultiTask), log, std::nullopt,
                            observer);
}

template <typename T>
double DatasetLoss(const ModelConfig &config, const ParamMap<T> &params,
                   const Task &task, int chunk_size) {
  const int n = static_cast<int>(task.examples.size());
  if (n == 0) throw ContractError("loss over empty task " + task.id);
  double total = 0.0;
  int64_t count = 0;
  for (int start = 0; start < n; start += chunk_size) {
    std::vector<int> idx(std::min(chunk_size, n - start));
    std::iota(idx.begin(), idx.end(), start);
    Batch batch = MakeBatch(task, idx);
    const int64_t tokens = std::count_if(batch.target_mask.begin(),
                                         batch.target_mask.end(),
                                         [](uint8_t m) { return m != 0; });
    total += static_cast<double>(ModelLoss<T>(config, params, batch,
                                              task.input_modality)) *
             static_cast<double>(tokens);
    count += tokens;
  }
  return total / static_cast<double>(count);
}

template <typename T>
EvalReport EvaluateTask(const ModelConfig &config, const ParamMap<T> &params,
                        const Task &task, const Vocabulary &vocab,
                        const HyperParams &hyper) {
  std::vector<std::vector<int>> decoded =
      DecodeTask<T>(config, params, task, hyper.decode_max_len, hyper.eval_batch);
  std::vector<std::string> hyps, refs;
  for (size_t i = 0; i < decoded.size(); ++i) {
    hyps.push_back(vocab.Decode(decoded[i]));
    refs.push_back(vocab.Decode(task.examples[i].target_ids));
  }
  return Evaluate(hyps, refs);
}

template <typename T>
FinetuneResult<T> Finetune(const ParamMap<T> &theta_init, const Task &st_train,
                           const Task &st_dev, const Vocabulary &vocab,
                           const ModelConfig &config, const HyperParams &hyper,
                           const std::string &strategy, MetricLog *log) {
  hyper.Validate();
  if (st_train.examples.empty()) throw ContractError("empty fine-tuning set");
  if (st_dev.examples.empty()) throw ContractError("empty dev set");
  const Modality modality = st_train.input_modality;
  ParamMap<T> params = theta_init;
  Rng rng(DeriveSeed(hyper.seed, kFinetuneStream));
  OptimizerState<T> opt;
  opt.kind = hyper.finetune_optimizer;

  FinetuneResult<T> best;
  bool have_best = false;
  best.dev_loss = std::numeric_limits<double>::infinity();
  double window = 0.0;
  int window_n = 0;
  for (int step = 1; step <= hyper.finetune_steps; ++step) {
    Batch batch = SampleBatch(st_train, hyper.m_batch, rng);
    LossAndGrads<T> lg = ModelLossAndGrads<T>(config, params, batch, modality,
                                              PassMode{true, &rng});
    OptimizerStep(params, lg.grads, opt, hyper.gamma);
    window += static_cast<double>(lg.loss);
    ++window_n;
    if (step % hyper.eval_every != 0) continue;

    const double dev_loss = DatasetLoss<T>(config, params, st_dev, hyper.eval_batch);
    const EvalReport report = EvaluateTask<T>(config, params, st_dev, vocab, hyper);
    if (log != nullptr) {
      log->Add(step, strategy, "train", "loss", window / window_n);
      log->Add(step, strategy, "dev", "loss", dev_loss);
      log->Add(step, strategy, "dev", "bleu", report.bleu);
      log->Add(step, strategy, "dev", "wer", report.wer);
    }
    window = 0.0;
    window_n = 0;
    if (!hyper.early_stopping || dev_loss < best.dev_loss) {
      best.params = params;
      best.selected_step = step;
      best.dev_loss = dev_loss;
      best.dev_report = report;
      have_best = true;
    }
  }
  const bool last_is_selected =
      have_best && best.selected_step == hyper.finetune_steps;
  if (!have_best || (!hyper.early_stopping && !last_is_selected)) {
    // No evaluation boundary was reached (or the last steps ran past it).
    best.params = params;
    best.selected_step = hyper.finetune_steps;
    best.dev_loss = DatasetLoss<T>(config, params, st_dev, hyper.eval_batch);
    best.dev_report = EvaluateTask<T>(config, params, st_dev, vocab, hyper);
  }
  return best;
}

template <typename T>
SynthesisReport SynthesizeStData(const ModelConfig &config, const ParamMap<T> &mt_params,
                                 const Task &asr_task, const HyperParams &hyper) {
  if (asr_task.input_modality != Modality::kFrames) {
    throw ContractError("synthesis needs a frames task, got " + asr_task.id);
  }
  Task sources{asr_task.id + "/transcripts", Modality::kTokens, TaskRole::kMt, 0, {}};
  std::vector<int> origin;
  SynthesisReport out;
  out.task = Task{asr_task.id + "/synthetic-st", Modality::kFrames, TaskRole::kSt,
                  asr_task.frame_dim, {}};
  for (size_t i = 0; i < asr_task.examples.size(); ++i) {
    const Example &ex = asr_task.examples[i];
    if (ex.target_ids.empty()) {
      ++out.dropped;
      continue;
    }
    Example src;
    src.source_ids = ex.target_ids;
    sources.examples.push_back(std::move(src));
    origin.push_back(static_cast<int>(i));
  }
  if (sources.examples.empty()) return out;
  std::vector<std::vector<int>> translated =
      DecodeTask<T>(config, mt_params, sources, hyper.decode_max_len, hyper.eval_batch);
  for (size_t j = 0; j < translated.size(); ++j) {
    if (translated[j].empty()) {
      ++out.dropped;
      continue;
    }
    const Example &ex = asr_task.examples[origin[j]];
    Example st;
    st.frames = ex.frames;
    st.num_frames = ex.num_frames;
    st.target_ids = std::move(translated[j]);
    out.task.examples.push_back(std::move(st));
  }
  return out;
}

template <typename T>
std::vector<std::vector<int>> CascadeTranslateTask(const ModelConfig &config,
                                                   const ParamMap<T> &asr_params,
                                                   const ParamMap<T> &mt_params,
                                                   const Task &task,
                                                   const HyperParams &hyper) {
  if (task.input_modality != Modality::kFrames) {
    throw ContractError("cascade input must be frames, got " + task.id);
  }
  std::vector<std::vector<int>> transcripts =
      DecodeTask<T>(config, asr_params, task, hyper.decode_max_len, hyper.eval_batch);
  Task sources{task.id + "/transcripts", Modality::kTokens, TaskRole::kMt, 0, {}};
  std::vector<int> origin;
  for (size_t i = 0; i < transcripts.size(); ++i) {
    if (transcripts[i].empty()) continue;
    Example src;
    src.source_ids = std::move(transcripts[i]);
    sources.examples.push_back(std::move(src));
    origin.push_back(static_cast<int>(i));
  }
  std::vector<std::vector<int>> out(task.examples.size());
  if (sources.examples.empty()) return out;
  std::vector<std::vector<int>> translated =
      DecodeTask<T>(config, mt_params, sources, hyper.decode_max_len, hyper.eval_batch);
  for (size_t j = 0; j < translated.size(); ++j) out[origin[j]] = std::move(translated[j]);
  return out;
}

template <typename T>
std::vector<int> CascadeTranslate(const ModelConfig &config,
                                  const ParamMap<T> &asr_params,
                                  const ParamMap<T> &mt_params, const Example &frames,
                                  int frame_dim, const HyperParams &hyper) {
  Task single{"cascade", Modality::kFrames, TaskRole::kSt, frame_dim, {frames}};
  return std::move(
      CascadeTranslateTask<T>(config, asr_params, mt_params, single, hyper).front());
}

template <typename T>
StrategyResult<T> RunStrategy(Strategy strategy, const StrategyTasks &tasks,
                              const Vocabulary &vocab, const ModelConfig &config,
                              const HyperParams &hyper, MetricLog *log) {
  if (tasks.st_train == nullptr || tasks.st_dev == nullptr) {
    throw ContractError("every strategy needs ST train and dev sets");
  }
  StrategyResult<T> out;
  switch (strategy) {
    case Strategy::kMetaLearn: {
      if (tasks.asr == nullptr || tasks.mt == nullptr) {
        throw ContractError("MetaLearn needs ASR and MT source tasks");
      }
      const Task *sources[] = {tasks.asr, tasks.mt};
      out.theta_init = MetaTrain<T>(sources, config, hyper, log);
      break;
    }
    case Strategy::kTransfer:
      if (tasks.asr == nullptr) throw ContractError("Transfer needs an ASR task");
      out.theta_init = TransferTrain<T>(*tasks.asr, config, hyper, log);
      break;
    case Strategy::kMultiTask: {
      if (tasks.asr == nullptr || tasks.mt == nullptr) {
        throw ContractError("MultiTask needs ASR, MT and ST tasks");
      }
      const Task *all[] = {tasks.asr, tasks.mt, tasks.st_train};
      out.theta_init = MultitaskTrain<T>(all, config, hyper, log);
      break;
    }
    case Strategy::kScratch:
      out.theta_init = InitParams<T>(config, hyper.seed);
      break;
  }
  out.final = Finetune<T>(out.theta_init, *tasks.st_train, *tasks.st_dev, vocab, config,
                          hyper, StrategyName(strategy), log);
  return out;
}

#define MAMLST_INSTANTIATE_META(T)                                                    \
  template LossGradFn<T> ModelObjective<T>(const ModelConfig &);                      \
  template ParamMap<T> AuxiliaryStep<T>(const LossGradFn<T> &, const ParamMap<T> &,   \
                                        const Batch &, Modality, double, PassMode,    \
                                        T *);                                         \
  template MetaGradient<T> ComputeMetaGradient<T>(const LossGradFn<T> &,              \
                                                  const ParamMap<T> &, const Task &,  \
                                                  const HyperParams &, Rng &, bool);  \
  template ParamMap<T> MetaStep<T>(const LossGradFn<T> &, const ParamMap<T> &,        \
                                   const Task &, const HyperParams &, Rng &, bool);   \
  template ParamMap<T> MetaTrain<T>(std::span<const Task *const>, const ModelConfig &, \
                                    const HyperParams &, MetricLog *,                 \
                                    std::optional<ParamMap<T>>, const BatchObserver &); \
  template ParamMap<T> SupervisedTrain<T>(                                            \
      std::span<const Task *const>, const ModelConfig &, const HyperParams &, int,    \
      const std::string &, MetricLog *, std::optional<ParamMap<T>>,                   \
      const BatchObserver &);                                                         \
  template ParamMap<T> TransferTrain<T>(const Task &, const ModelConfig &,            \
                                        const HyperParams &, MetricLog *);            \
  template ParamMap<T> MultitaskTrain<T>(std::span<const Task *const>,                \
                                         const ModelConfig &, const HyperParams &,    \
                                         MetricLog *, const BatchObserver &);         \
  template double DatasetLoss<T>(const ModelConfig &, const ParamMap<T> &,            \
                                 const Task &, int);                                  \
  template EvalReport EvaluateTask<T>(const ModelConfig &, const ParamMap<T> &,       \
                                      const Task &, const Vocabulary &,               \
                                      const HyperParams &);                           \
  template FinetuneResult<T> Finetune<T>(const ParamMap<T> &, const Task &,           \
                                         const Task &, const Vocabulary &,            \
                                         const ModelConfig &, const HyperParams &,    \
                                         const std::string &, MetricLog *);           \
  template SynthesisReport SynthesizeStData<T>(const ModelConfig &,                   \
                                               const ParamMap<T> &, const Task &,     \
                                               const HyperParams &);                  \
  template std::vector<int> CascadeTranslate<T>(const ModelConfig &,                  \
                                                const ParamMap<T> &,                  \
                                                const ParamMap<T> &, const Example &, \
                                                int, const HyperParams &);            \
  template std::vector<std::vector<int>> CascadeTranslateTask<T>(                     \
      const ModelConfig &, const ParamMap<T> &, const ParamMap<T> &, const Task &,    \
      const HyperParams &);                                                           \
  template StrategyResult<T> RunStrategy<T>(Strategy, const StrategyTasks &,          \
                                            const Vocabulary &, const ModelConfig &,  \
                                            const HyperParams &, MetricLog *);

MAMLST_INSTANTIATE_META(float)
MAMLST_INSTANTIATE_META(double)

}  // namespace mamlst
