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

#ifndef MAMLST_METRICS_H_
#define MAMLST_METRICS_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mamlst/model.h"

namespace mamlst {

struct EvalReport {
  double bleu = 0.0;  // 0-100
  double wer = 0.0;
  int n_sentences = 0;
  double brevity_penalty = 0.0;
  std::array<double, 4> precisions{};  // clipped 1..4-gram precisions
  int64_t hyp_words = 0;
  int64_t ref_words = 0;
};

std::vector<std::string> SplitWords(const std::string &text);

// Corpus-level BLEU-4 without smoothing: geometric mean of clipped n-gram
// precisions times exp(min(0, 1 - ref_len / hyp_len)). Case-sensitive,
// whitespace tokenization. Fills bleu, brevity_penalty, precisions and the
// word counts.
EvalReport Bleu4(std::span<const std::string> hypotheses,
                 std::span<const std::string> references);

// Total word-level edit distance over total reference words.
double Wer(std::span<const std::string> hypotheses,
           std::span<const std::string> references);

// BLEU and WER together.
EvalReport Evaluate(std::span<const std::string> hypotheses,
                    std::span<const std::string> references);

// Greedy autoregressive decoding of every row of a source batch. Starts from
// BOS, appends the arg-max token, stops at EOS or after max_len tokens. BOS,
// EOS and PAD never appear in the returned sequences.
template <typename T>
std::vector<std::vector<int>> GreedyDecode(const ModelConfig &config,
                                           const ParamMap<T> &params,
                                           const Batch &sources, Modality modality,
                                           int max_len);

// Decodes every example of a task in chunks of chunk_size rows.
template <typename T>
std::vector<std::vector<int>> DecodeTask(const ModelConfig &config,
                                         const ParamMap<T> &params,
                                         const Task &task, int max_len,
                                         int chunk_size = 64);

}  // namespace mamlst

#endif  // MAMLST_METRICS_H_
