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

// First-order meta-learning over source tasks with different input
// modalities, fine-tuning on the target task, and the comparison baselines.
//
// One meta step on task t, starting from meta parameters P:
//   A  = P - alpha * grad L(D_t; P)        (auxiliary step)
//   g  = grad L(D'_t; A)                   (first-order meta-gradient)
//   P' = P - beta * g
// D_t and D'_t are drawn independently from t's training data.

#ifndef MAMLST_META_H_
#define MAMLST_META_H_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mamlst/metrics.h"
#include "mamlst/model.h"
#include "mamlst/optimizer.h"
#include "mamlst/tasks.h"
#include "mamlst/vocab.h"

namespace mamlst {

struct HyperParams {
  double alpha = 0.1;   // auxiliary (inner) rate
  double beta = 0.2;    // meta (outer) rate
  double gamma = 5e-4;  // fine-tuning rate
  int k = 16;           // auxiliary batch
  int l = 16;           // meta-evaluation batch
  int m_batch = 16;     // fine-tuning batch
  int meta_steps = 3000;
  int finetune_steps = 2000;
  uint64_t seed = 1;
  int eval_every = 200;

  // Outer update rule applied to the meta-gradient. sgd is the literal
  // P - beta * g; adam feeds g to an Adam optimizer owned by the meta
  // parameters (the auxiliary step is always plain sgd).
  OptimizerKind meta_optimizer = OptimizerKind::kSgd;
  // Ordinary training for the transfer and multi-task baselines.
  OptimizerKind pretrain_optimizer = OptimizerKind::kAdam;
  double pretrain_lr = 1e-3;
  int pretrain_batch = 16;
  OptimizerKind finetune_optimizer = OptimizerKind::kAdam;
  // Return the dev-loss-best fine-tuning checkpoint instead of the last one.
  bool early_stopping = true;
  int decode_max_len = 64;
  int eval_batch = 64;

  void Validate() const;
  friend bool operator==(const HyperParams &, const HyperParams &) = default;
};

enum class Strategy { kMetaLearn, kTransfer, kMultiTask, kScratch };
std::string StrategyName(Strategy s);
Strategy ParseStrategy(const std::string &name);

struct MetricRow {
  int64_t step = 0;
  std::string strategy;
  std::string split;
  std::string metric;
  double value = 0.0;
  friend bool operator==(const MetricRow &, const MetricRow &) = default;
};

// Append-only metric record; serializes as CSV with the header
// step,strategy,split,metric,value.
class MetricLog {
 public:
  void Add(int64_t step, std::string strategy, std::string split,
           std::string metric, double value);
  const std::vector<MetricRow> &rows() const { return rows_; }
  // Rows matching every non-empty filter, in insertion order.
  std::vector<MetricRow> Select(const std::string &strategy, const std::string &split,
                                const std::string &metric) const;
  void WriteCsv(const std::string &path) const;
  static MetricLog ReadCsv(const std::string &path);

 private:
  std::vector<MetricRow> rows_;
};

// Loss and gradients of some objective on a batch. The model objective is
// the usual one; tests plug in closed-form surrogates.
template <typename T>
using LossGradFn = std::function<LossAndGrads<T>(const ParamMap<T> &, const Batch &,
                                                 Modality, PassMode)>;

template <typename T>
LossGradFn<T> ModelObjective(const ModelConfig &config);

// Observes every batch a trainer draws (which task, at which step).
using BatchObserver = std::function<void(const Task &task, int64_t step)>;

// A = P - alpha * grad L(batch; P). P is not modified. Optionally reports the
// pre-update loss.
template <typename T>
ParamMap<T> AuxiliaryStep(const LossGradFn<T> &objective, const ParamMap<T> &theta_m,
                          const Batch &batch, Modality modality, double alpha,
                          PassMode mode = {}, T *loss = nullptr);

template <typename T>
struct MetaGradient {
  GradMap<T> grads;   // gradient of L(D'; A), taken at A
  T aux_loss = 0;     // L(D; P)
  T adapted_loss = 0; // L(D'; A)
};

// Samples D (size k) then D' (size l) from task with rng and returns the
// first-order meta-gradient. Dropout masks, when enabled, come from rng too.
template <typename T>
MetaGradient<T> ComputeMetaGradient(const LossGradFn<T> &objective,
                                    const ParamMap<T> &theta_m, const Task &task,
                                    const HyperParams &hyper, Rng &rng,
                                    bool train = true);

// P - beta * g with g from ComputeMetaGradient.
template <typename T>
ParamMap<T> MetaStep(const LossGradFn<T> &objective, const ParamMap<T> &theta_m,
                     const Task &task, const HyperParams &hyper, Rng &rng,
                     bool train = true);

// meta_steps rounds of {uniform task draw, meta update} starting from
// init (or InitParams(config, hyper.seed)). Source tasks must be ASR or MT
// roles. Logs the adapted loss L(D'; A) of every step.
template <typename T>
ParamMap<T> MetaTrain(std::span<const Task *const> source_tasks,
                      const ModelConfig &config, const HyperParams &hyper,
                      MetricLog *log = nullptr,
                      std::optional<ParamMap<T>> init = std::nullopt,
                      const BatchObserver &observer = {});

// Ordinary training: each step draws one task uniformly and applies one
// optimizer update (pretrain_optimizer, pretrain_lr, pretrain_batch) for
// `steps` steps.
template <typename T>
ParamMap<T> SupervisedTrain(std::span<const Task *const> tasks,
                            const ModelConfig &config, const HyperParams &hyper,
                            int steps, const std::string &strategy,
                            MetricLog *log = nullptr,
                            std::optional<ParamMap<T>> init = std::nullopt,
                            const BatchObserver &observer = {});

// Pre-training on the ASR task alone for meta_steps updates.
template <typename T>
ParamMap<T> TransferTrain(const Task &asr_task, const ModelConfig &config,
                          const HyperParams &hyper, MetricLog *log = nullptr);

// Pre-training on all tasks with one shared parameter set for meta_steps
// updates.
template <typename T>
ParamMap<T> MultitaskTrain(std::span<const Task *const> all_tasks,
                           const ModelConfig &config, const HyperParams &hyper,
                           MetricLog *log = nullptr,
                           const BatchObserver &observer = {});

// Mean token-level loss over a whole task, evaluation mode.
template <typename T>
double DatasetLoss(const ModelConfig &config, const ParamMap<T> &params,
                   const Task &task, int chunk_size = 64);

// Greedy-decodes every example and scores against its targets.
template <typename T>
EvalReport EvaluateTask(const ModelConfig &config, const ParamMap<T> &params,
                        const Task &task, const Vocabulary &vocab,
                        const HyperParams &hyper);

template <typename T>
struct FinetuneResult {
  ParamMap<T> params;      // best-by-dev-loss checkpoint or last
  int64_t selected_step = 0;
  double dev_loss = 0.0;   // of the returned params
  EvalReport dev_report;   // of the returned params
};

// finetune_steps gradient updates at rate gamma, batches of m_batch, fresh
// optimizer. Every eval_every steps logs train loss (window mean), dev loss,
// dev BLEU and WER.
template <typename T>
FinetuneResult<T> Finetune(const ParamMap<T> &theta_init, const Task &st_train,
                           const Task &st_dev, const Vocabulary &vocab,
                           const ModelConfig &config, const HyperParams &hyper,
                           const std::string &strategy, MetricLog *log = nullptr);

struct SynthesisReport {
  Task task;
  int dropped = 0;
};

// Pairs each ASR example's frames with the MT model's greedy translation of
// its transcript. Empty translations are dropped and counted.
template <typename T>
SynthesisReport SynthesizeStData(const ModelConfig &config, const ParamMap<T> &mt_params,
                                 const Task &asr_task, const HyperParams &hyper);

// Frames -> transcript with the ASR model, then transcript -> translation
// with the MT model. An empty transcript yields an empty translation.
template <typename T>
std::vector<int> CascadeTranslate(const ModelConfig &config,
                                  const ParamMap<T> &asr_params,
                                  const ParamMap<T> &mt_params,
                                  const Example &frames, int frame_dim,
                                  const HyperParams &hyper);

// Every source of a frames task through the cascade.
template <typename T>
std::vector<std::vector<int>> CascadeTranslateTask(const ModelConfig &config,
                                                   const ParamMap<T> &asr_params,
                                                   const ParamMap<T> &mt_params,
                                                   const Task &task,
                                                   const HyperParams &hyper);

struct StrategyTasks {
  const Task *asr = nullptr;
  const Task *mt = nullptr;
  const Task *st_train = nullptr;
  const Task *st_dev = nullptr;
};

template <typename T>
struct StrategyResult {
  ParamMap<T> theta_init;   // starting point of fine-tuning
  FinetuneResult<T> final;
};

// MetaLearn: MetaTrain(ASR, MT) then Finetune.
// Transfer:  TransferTrain(ASR) then Finetune.
// MultiTask: MultitaskTrain(ASR, MT, ST) then Finetune.
// Scratch:   Finetune from InitParams(config, hyper.seed).
template <typename T>
StrategyResult<T> RunStrategy(Strategy strategy, const StrategyTasks &tasks,
                              const Vocabulary &vocab, const ModelConfig &config,
                              const HyperParams &hyper, MetricLog *log = nullptr);

}  // namespace mamlst

#endif  // MAMLST_META_H_
