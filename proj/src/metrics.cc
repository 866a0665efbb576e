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

#include "mamlst/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace mamlst {
namespace {

void CheckCorpora(size_t hyps, size_t refs) {
  if (hyps != refs) {
    throw ContractError(std::to_string(hyps) + " hypotheses but " +
                        std::to_string(refs) + " references");
  }
  if (hyps == 0) throw ContractError("no sentence pairs to score");
}

using NgramCounts = std::map<std::vector<std::string>, int64_t>;

NgramCounts CountNgrams(const std::vector<std::string> &words, size_t n) {
  NgramCounts counts;
  for (size_t i = 0; i + n <= words.size(); ++i) {
    ++counts[std::vector<std::string>(words.begin() + i, words.begin() + i + n)];
  }
  return counts;
}

int64_t EditDistance(const std::vector<std::string> &a,
                     const std::vector<std::string> &b) {
  std::vector<int64_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    int64_t diag = row[0];
    row[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      const int64_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1])});
      diag = up;
    }
  }
  return row[b.size()];
}

}  // namespace

std::vector<std::string> SplitWords(const std::string &text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

EvalReport Bleu4(std::span<const std::string> hypotheses,
                 std::span<const std::string> references) {
  CheckCorpora(hypotheses.size(), references.size());
  EvalReport report;
  report.n_sentences = static_cast<int>(hypotheses.size());
  std::array<int64_t, 4> matched{}, total{};
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = SplitWords(hypotheses[s]);
    const auto ref = SplitWords(references[s]);
    report.hyp_words += static_cast<int64_t>(hyp.size());
    report.ref_words += static_cast<int64_t>(ref.size());
    for (size_t n = 1; n <= 4; ++n) {
      const NgramCounts h = CountNgrams(hyp, n);
      const NgramCounts r = CountNgrams(ref, n);
      for (const auto &[gram, count] : h) {
        total[n - 1] += count;
        auto it = r.find(gram);
        if (it != r.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }
  double log_sum = 0.0;
  bool any_zero = false;
  for (int n = 0; n < 4; ++n) {
    report.precisions[n] =
        total[n] == 0 ? 0.0 : static_cast<double>(matched[n]) / total[n];
    if (report.precisions[n] == 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(report.precisions[n]);
    }
  }
  if (report.hyp_words > 0) {
    report.brevity_penalty = std::exp(std::min(
        0.0, 1.0 - static_cast<double>(report.ref_words) / report.hyp_words));
  }
  report.bleu = any_zero ? 0.0 : 100.0 * report.brevity_penalty * std::exp(log_sum / 4.0);
  return report;
}

double Wer(std::span<const std::string> hypotheses,
           std::span<const std::string> references) {
  CheckCorpora(hypotheses.size(), references.size());
  int64_t edits = 0, ref_words = 0;
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = SplitWords(hypotheses[s]);
    const auto ref = SplitWords(references[s]);
    edits += EditDistance(hyp, ref);
    ref_words += static_cast<int64_t>(ref.size());
  }
  if (ref_words == 0) throw ContractError("reference corpus has no words");
  return static_cast<double>(edits) / static_cast<double>(ref_words);
}

EvalReport Evaluate(std::span<const std::string> hypotheses,
                    std::span<const std::string> references) {
  EvalReport report = Bleu4(hypotheses, references);
  report.wer = Wer(hypotheses, references);
  return report;
}

template <typename T>
std::vector<std::vector<int>> GreedyDecode(const ModelConfig &config,
                                           const ParamMap<T> &params,
                                           const Batch &sources, Modality modality,
                                           int max_len) {
  if (max_len < 1) throw ContractError("max_len must be at least 1");
  // The decoder sees at most max_len positions, EOS slot included.
  max_len = std::min(max_len, config.max_len);
  Graph<T> enc_graph(/*track_gradients=*/false);
  enc_graph.Bind(&params);
  const EncoderOutput<T> encoded = EncodeSource(enc_graph, config, sources, modality);

  const int batch = sources.size;
  std::vector<std::vector<int>> prefix(batch, std::vector<int>{Vocabulary::kBos});
  std::vector<std::vector<int>> output(batch);
  std::vector<bool> done(batch, false);
  for (int step = 1; step <= max_len; ++step) {
    if (std::all_of(done.begin(), done.end(), [](bool d) { return d; })) break;
    Graph<T> g(/*track_gradients=*/false);
    g.Bind(&params);
    EncoderOutput<T> memory{g.Constant(encoded.states.value()), encoded.len,
                            encoded.lengths};
    std::vector<int> inputs;
    inputs.reserve(static_cast<size_t>(batch) * step);
    for (const auto &p : prefix) inputs.insert(inputs.end(), p.begin(), p.end());
    const Tensor<T> &logits = DecodeLogits(g, config, memory, inputs, step).value();
    const int64_t vocab = logits.dim(1);
    for (int b = 0; b < batch; ++b) {
      const T *row = logits.data() + (static_cast<int64_t>(b) * step + step - 1) * vocab;
      const int next = static_cast<int>(std::max_element(row, row + vocab) - row);
      prefix[b].push_back(next);
      if (done[b]) continue;
      if (next == Vocabulary::kEos) {
        done[b] = true;
      } else if (next != Vocabulary::kBos && next != Vocabulary::kPad) {
        output[b].push_back(next);
      }
    }
  }
  return output;
}

template <typename T>
std::vector<std::vector<int>> DecodeTask(const ModelConfig &config,
                                         const ParamMap<T> &params,
                                         const Task &task, int max_len,
                                         int chunk_size) {
  std::vector<std::vector<int>> out;
  const int n = static_cast<int>(task.examples.size());
  for (int start = 0; start < n; start += chunk_size) {
    std::vector<int> idx(std::min(chunk_size, n - start));
    std::iota(idx.begin(), idx.end(), start);
    Batch batch = MakeBatch(task, idx, /*include_targets=*/false);
    for (auto &seq : GreedyDecode(config, params, batch, task.input_modality, max_len)) {
      out.push_back(std::move(seq));
    }
  }
  return out;
}

template std::vector<std::vector<int>> GreedyDecode<float>(
    const ModelConfig &, const ParamMap<float> &, const Batch &, Modality, int);
template std::vector<std::vector<int>> GreedyDecode<double>(
    const ModelConfig &, const ParamMap<double> &, const Batch &, Modality, int);
template std::vector<std::vector<int>> DecodeTask<float>(
    const ModelConfig &, const ParamMap<float> &, const Task &, int, int);
template std::vector<std::vector<int>> DecodeTask<double>(
    const ModelConfig &, const ParamMap<double> &, const Task &, int, int);

}  // namespace mamlst
