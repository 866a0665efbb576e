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

#include "mamlst/check_suite.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "mamlst/ops.h"
#include "mamlst/vocab.h"

namespace mamlst {
namespace {

using Vec = std::vector<Var<double>>;

Tensor<double> Random(const Shape &shape, Rng &rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor<double> t(shape);
  for (double &v : t.storage()) v = dist(rng);
  return t;
}

// Contracts x with fixed random weights so each element matters differently.
Var<double> Contract(Var<double> x, uint64_t seed) {
  Rng rng(seed);
  return Sum(Mul(x, x.graph->Constant(Random(x.shape(), rng))));
}

}  // namespace

GradCheckResult ModelGradCheck(const ModelConfig &config, const ParamMap<double> &params,
                               const Batch &batch, Modality modality, double eps) {
  if (!(eps > 0.0)) throw ContractError("model gradcheck: eps must be positive");
  const LossAndGrads<double> analytic =
      ModelLossAndGrads<double>(config, params, batch, modality);
  ParamMap<double> probe = params;
  GradCheckResult result;
  int input = 0;
  for (auto &[name, tensor] : probe) {
    auto g = analytic.grads.find(name);
    for (int64_t j = 0; j < tensor.size(); ++j) {
      const double saved = tensor[j];
      tensor[j] = saved + eps;
      const double up = ModelLoss<double>(config, probe, batch, modality);
      tensor[j] = saved - eps;
      const double down = ModelLoss<double>(config, probe, batch, modality);
      tensor[j] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = g == analytic.grads.end() ? 0.0 : g->second[j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_rel_error || result.input < 0) {
        result = {rel, input, j, a, numeric};
      }
    }
    ++input;
  }
  return result;
}

ModelConfig TinyCheckConfig(int vocab_size) {
  ModelConfig config;
  config.d_model = 8;
  config.n_enc = 1;
  config.n_dec = 1;
  config.n_heads = 2;
  config.d_ff = 16;
  config.dropout = 0.0;
  config.conv_layers = 2;
  config.conv_channels = 3;
  config.frame_dim = 6;
  config.vocab_size = vocab_size;
  config.max_len = 32;
  return config;
}

std::vector<NamedCheck> GradCheckSuite(uint64_t seed) {
  Rng rng(DeriveSeed(seed, 7));
  std::vector<NamedCheck> out;
  auto run = [&](const std::string &name, const LossBuilder &build,
                 std::vector<Tensor<double>> inputs) {
    out.push_back({name, FiniteDiffCheck(build, std::move(inputs))});
  };
  const uint64_t w = seed;

  run("matmul", [w](Graph<double> &, const Vec &in) { return Contract(MatMul(in[0], in[1]), w); },
      {Random({3, 4}, rng), Random({4, 5}, rng)});
  run("transpose", [w](Graph<double> &, const Vec &in) { return Contract(Transpose(in[0]), w); },
      {Random({3, 4}, rng)});
  run("add", [w](Graph<double> &, const Vec &in) { return Contract(Add(in[0], in[1]), w); },
      {Random({3, 4}, rng), Random({3, 4}, rng)});
  run("mul", [w](Graph<double> &, const Vec &in) { return Contract(Mul(in[0], in[1]), w); },
      {Random({3, 4}, rng), Random({3, 4}, rng)});
  run("scale", [w](Graph<double> &, const Vec &in) { return Contract(Scale(in[0], 0.3), w); },
      {Random({3, 4}, rng)});
  run("add_bias",
      [w](Graph<double> &, const Vec &in) { return Contract(AddBias(in[0], in[1]), w); },
      {Random({2, 3, 4}, rng), Random({4}, rng)});
  run("relu", [w](Graph<double> &, const Vec &in) { return Contract(Relu(in[0]), w); },
      {Random({4, 5}, rng)});
  run("softmax", [w](Graph<double> &, const Vec &in) { return Contract(Softmax(in[0], 1), w); },
      {Random({2, 4, 3}, rng)});
  run("sum", [](Graph<double> &, const Vec &in) { return Sum(Mul(in[0], in[0])); },
      {Random({3, 4}, rng)});
  run("reshape",
      [w](Graph<double> &, const Vec &in) { return Contract(Reshape(in[0], {4, 3}), w); },
      {Random({3, 4}, rng)});
  {
    const std::vector<int> targets = {0, 3, 2, 4};
    const std::vector<uint8_t> mask = {1, 1, 0, 1};
    run("cross_entropy",
        [targets, mask](Graph<double> &, const Vec &in) {
          return CrossEntropyLoss(in[0], targets, mask);
        },
        {Random({4, 5}, rng)});
  }
  run("layer_norm",
      [w](Graph<double> &, const Vec &in) { return Contract(LayerNorm(in[0], in[1], in[2]), w); },
      {Random({3, 5}, rng), Random({5}, rng), Random({5}, rng)});
  {
    const std::vector<int> ids = {2, 0, 2, 3};
    run("embedding",
        [w, ids](Graph<double> &, const Vec &in) { return Contract(Embedding(in[0], ids), w); },
        {Random({4, 3}, rng)});
  }
  run("dropout",
      [w](Graph<double> &, const Vec &in) {
        Rng mask_rng(w);  // same mask on every evaluation
        return Contract(Dropout(in[0], 0.3, mask_rng), w);
      },
      {Random({4, 5}, rng)});
  {
    ConvOptions opts;
    opts.lengths = {5, 3};
    run("conv2d_s2",
        [w, opts](Graph<double> &, const Vec &in) {
          return Contract(Conv2dS2(in[0], in[1], in[2], opts), w);
        },
        {Random({2, 5, 4, 2}, rng), Random({3, 3, 2, 3}, rng), Random({3}, rng)});
  }
  {
    AttentionLayout layout{2, 3, 4, 2, {4, 2}, false};
    run("attention",
        [w, layout](Graph<double> &, const Vec &in) {
          return Contract(Attention(in[0], in[1], in[2], layout), w);
        },
        {Random({6, 4}, rng), Random({8, 4}, rng), Random({8, 4}, rng)});
    AttentionLayout causal{2, 3, 3, 2, {3, 2}, true};
    run("attention_causal",
        [w, causal](Graph<double> &, const Vec &in) {
          return Contract(Attention(in[0], in[1], in[2], causal), w);
        },
        {Random({6, 4}, rng), Random({6, 4}, rng), Random({6, 4}, rng)});
  }

  // Whole model, both input modalities.
  SyntheticSpec spec;
  spec.alphabet_size = 4;
  spec.min_len = 2;
  spec.max_len = 4;
  spec.frames_per_token = 2;
  spec.frame_dim = 6;
  const Vocabulary vocab = SyntheticVocab(spec);
  const ModelConfig config = TinyCheckConfig(vocab.size());
  // Gradients of a freshly initialized model are tiny in places; a scaled-up
  // random point keeps every element well above the relative-error floor.
  ParamMap<double> params = InitParams<double>(config, seed);
  for (auto &[name, t] : params) {
    for (double &v : t.storage()) v += 0.3 * std::normal_distribution<double>()(rng);
  }
  const std::vector<int> idx = {0, 1};
  const Task mt = GenMtTask(spec, vocab, 2, seed);
  const Task asr = GenAsrTask(spec, vocab, 2, seed);
  out.push_back({"model_loss_tokens", ModelGradCheck(config, params, MakeBatch(mt, idx),
                                                     Modality::kTokens)});
  out.push_back({"model_loss_frames", ModelGradCheck(config, params, MakeBatch(asr, idx),
                                                     Modality::kFrames)});
  return out;
}

}  // namespace mamlst
