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

#include <cmath>
#include <random>

#include "doctest.h"
#include "mamlst/check_suite.h"
#include "mamlst/model.h"
#include "mamlst/optimizer.h"
#include "mamlst/vocab.h"

namespace mamlst {
namespace {

struct Fixture {
  SyntheticSpec spec;
  Vocabulary vocab;
  ModelConfig config;
  Task mt, asr;

  explicit Fixture(int d_model = 16, int layers = 2) {
    spec.alphabet_size = 5;
    spec.min_len = 3;
    spec.max_len = 9;
    spec.frames_per_token = 2;
    spec.frame_dim = 8;
    vocab = SyntheticVocab(spec);
    config.d_model = d_model;
    config.n_enc = config.n_dec = layers;
    config.n_heads = 2;
    config.d_ff = 2 * d_model;
    config.conv_channels = 4;
    config.frame_dim = spec.frame_dim;
    config.vocab_size = vocab.size();
    config.dropout = 0.1;
    mt = GenMtTask(spec, vocab, 8, 3);
    asr = GenAsrTask(spec, vocab, 8, 3);
  }
};

// Independent closed form for the parameter count.
int64_t CountByFormula(const ModelConfig &c) {
  const int64_t d = c.d_model, v = c.vocab_size, ff = c.d_ff, ch = c.conv_channels;
  int64_t f = c.frame_dim;
  int64_t conv = 0, in = 1;
  for (int i = 0; i < c.conv_layers; ++i) {
    conv += 9 * in * ch + ch;
    in = ch;
    f = (f + 1) / 2;
  }
  const int64_t proj = f * in * d + d;
  const int64_t attn = 4 * d * d + 3 * d;  // no key bias
  const int64_t norm = 2 * d;
  const int64_t ffn = d * ff + ff + ff * d + d;
  const int64_t enc = attn + ffn + 2 * norm;
  const int64_t dec = 2 * attn + ffn + 3 * norm;
  const int64_t out = (c.tie_output ? 0 : d * v) + v;
  return 2 * v * d + conv + proj + c.n_enc * enc + c.n_dec * dec + out;
}

TEST_CASE("parameter count matches the closed form") {
  ModelConfig c;
  c.vocab_size = 20;
  CHECK(ParamCount(c) == CountByFormula(c));
  c.frame_dim = 80;
  c.conv_layers = 3;
  c.n_enc = 4;
  c.n_dec = 1;
  CHECK(ParamCount(c) == CountByFormula(c));
  c.tie_output = true;
  CHECK(ParamCount(c) == CountByFormula(c));
  c.conv_layers = 0;
  CHECK(ParamCount(c) == CountByFormula(c));
  CHECK(InitParams<float>(c, 1).size() == ParamShapes(c).size());
}

TEST_CASE("initialization is deterministic per seed") {
  Fixture fx;
  auto a = InitParams<float>(fx.config, 5);
  CHECK(a == InitParams<float>(fx.config, 5));
  CHECK_FALSE(a == InitParams<float>(fx.config, 6));
  for (const auto &[name, t] : a) {
    CAPTURE(name);
    CHECK(t.AllFinite());
    if (name.ends_with("/gain")) {
      for (float v : t.values()) CHECK(v == 1.0f);
    }
    if (name.ends_with("/bias") || name.ends_with("/b") || name.ends_with("/bq")) {
      for (float v : t.values()) CHECK(v == 0.0f);
    }
  }
}

TEST_CASE("compressed lengths") {
  ModelConfig c;
  c.vocab_size = 10;
  CHECK(CompressedLength(c, 100) == 25);
  CHECK(CompressedLength(c, 1) == 1);
  CHECK(CompressedLength(c, 7) == 2);
  CHECK_THROWS_AS(CompressedLength(c, 0), ContractError);
  c.frame_dim = 80;
  CHECK(CompressedFrameDim(c) == 20);
}

TEST_CASE("token batches never touch the compression stack") {
  Fixture fx;
  auto params = InitParams<float>(fx.config, 1);
  const std::vector<int> idx = {0, 1, 2};
  Rng rng(1);
  auto lg = ModelLossAndGrads<float>(fx.config, params, MakeBatch(fx.mt, idx),
                                     Modality::kTokens, {true, &rng});
  for (const auto &[name, g] : lg.grads) {
    if (IsCompressionParam(name)) {
      for (float v : g.values()) CHECK(v == 0.0f);
    }
  }
  CHECK(lg.grads.count("src_embed") == 1);
  for (OptimizerKind kind : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
    ParamMap<float> p = params;
    OptimizerState<float> state;
    state.kind = kind;
    OptimizerStep(p, lg.grads, state, 0.1);
    for (const auto &[name, t] : p) {
      if (IsCompressionParam(name)) CHECK(t == params.at(name));
    }
    CHECK_FALSE(p.at("tgt_embed") == params.at("tgt_embed"));
  }
  // Frames batches do reach it, and leave the source embedding alone.
  auto frames = ModelLossAndGrads<float>(fx.config, params, MakeBatch(fx.asr, idx),
                                         Modality::kFrames);
  CHECK(frames.grads.count("compress/conv0/kernel") == 1);
  CHECK(frames.grads.count("src_embed") == 0);
}

TEST_CASE("encoder output width and modality checks") {
  Fixture fx;
  auto params = InitParams<double>(fx.config, 2);
  const std::vector<int> idx = {0, 1};
  for (const Task *task : {&fx.mt, &fx.asr}) {
    Graph<double> g(false);
    g.Bind(&params);
    Batch batch = MakeBatch(*task, idx);
    auto enc = EncodeSource(g, fx.config, batch, task->input_modality);
    CHECK(enc.states.shape() == Shape{2LL * enc.len, fx.config.d_model});
    Var<double> logits = ForwardLogits(g, fx.config, batch, task->input_modality);
    CHECK(logits.shape() == Shape{2LL * batch.target_len, fx.config.vocab_size});
  }
  Graph<double> g(false);
  g.Bind(&params);
  CHECK_THROWS_AS(EncodeSource(g, fx.config, MakeBatch(fx.mt, idx), Modality::kFrames),
                  ContractError);
  CHECK_THROWS_AS(EncodeSource(g, fx.config, MakeBatch(fx.asr, idx), Modality::kTokens),
                  ContractError);
  fx.config.max_len = 3;
  CHECK_THROWS_AS(ForwardLogits(g, fx.config, MakeBatch(fx.mt, idx), Modality::kTokens),
                  ContractError);
}

// Encoder states of row 0 restricted to its valid positions.
std::vector<double> ValidStates(const ModelConfig &config, const ParamMap<double> &params,
                                const Batch &batch, Modality modality) {
  Graph<double> g(false);
  g.Bind(&params);
  auto enc = EncodeSource(g, config, batch, modality);
  const auto &v = enc.states.value();
  const int64_t d = config.d_model;
  return std::vector<double>(v.data(), v.data() + enc.lengths[0] * d);
}

TEST_CASE("padding content does not leak into valid positions") {
  Fixture fx;
  auto params = InitParams<double>(fx.config, 4);
  std::mt19937_64 rng(9);
  for (const Task *task : {&fx.mt, &fx.asr}) {
    // Find a shorter row 0 so that it is padded in the pair batch.
    int shortest = 0, longest = 0;
    for (int i = 0; i < 8; ++i) {
      const auto &e = task->examples[i];
      auto size = [&](const Example &x) {
        return task->input_modality == Modality::kTokens ? x.source_ids.size()
                                                         : static_cast<size_t>(x.num_frames);
      };
      if (size(e) < size(task->examples[shortest])) shortest = i;
      if (size(e) > size(task->examples[longest])) longest = i;
    }
    REQUIRE(shortest != longest);
    const std::vector<int> alone = {shortest}, pair = {shortest, longest};
    const auto reference =
        ValidStates(fx.config, params, MakeBatch(*task, alone), task->input_modality);
    Batch padded = MakeBatch(*task, pair);
    const auto in_pair = ValidStates(fx.config, params, padded, task->input_modality);
    // Scribble over row 0's padding.
    const int len0 = padded.source_lengths[0];
    if (task->input_modality == Modality::kTokens) {
      for (int t = len0; t < padded.source_len; ++t) {
        padded.source_ids[t] = 4 + static_cast<int>(rng() % 5);
      }
    } else {
      std::normal_distribution<float> noise(0.0f, 3.0f);
      for (int64_t i = static_cast<int64_t>(len0) * padded.frame_dim;
           i < static_cast<int64_t>(padded.source_len) * padded.frame_dim; ++i) {
        padded.frames[i] = noise(rng);
      }
    }
    const auto scribbled = ValidStates(fx.config, params, padded, task->input_modality);
    REQUIRE(reference.size() == in_pair.size());
    REQUIRE(reference.size() == scribbled.size());
    double worst = 0.0;
    for (size_t i = 0; i < reference.size(); ++i) {
      worst = std::max({worst, std::abs(reference[i] - in_pair[i]),
                        std::abs(reference[i] - scribbled[i])});
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("decoder is causal") {
  Fixture fx;
  auto params = InitParams<double>(fx.config, 5);
  const std::vector<int> idx = {0, 1};
  Batch batch = MakeBatch(fx.mt, idx);
  const int len = batch.target_len;
  auto logits = [&](const Batch &b) {
    Graph<double> g(false);
    g.Bind(&params);
    return ForwardLogits(g, fx.config, b, Modality::kTokens).value();
  };
  const Tensor<double> base = logits(batch);
  const int v = fx.config.vocab_size;
  for (int j = 1; j < len; ++j) {
    Batch changed = batch;
    changed.targets[j] = changed.targets[j] == 5 ? 6 : 5;
    const Tensor<double> after = logits(changed);
    double before_j = 0.0;
    for (int i = 0; i < j; ++i) {
      for (int c = 0; c < v; ++c) {
        before_j = std::max(before_j, std::abs(base.at(i, c) - after.at(i, c)));
      }
    }
    CAPTURE(j);
    CHECK(before_j < 1e-6);
  }
}

TEST_CASE("loss at initialization and mean semantics") {
  Fixture fx;
  fx.config.vocab_size = 20;
  fx.config.d_model = 64;
  fx.config.d_ff = 128;
  auto params = InitParams<double>(fx.config, 11);
  const std::vector<int> idx = {0, 1, 2, 3};
  const Batch batch = MakeBatch(fx.mt, idx);
  const double loss = ModelLoss<double>(fx.config, params, batch, Modality::kTokens);
  CHECK(std::abs(loss - std::log(20.0)) < 0.3);
  CHECK(ModelLoss<double>(fx.config, params, batch, Modality::kTokens) == loss);

  const std::vector<int> twice = {0, 1, 2, 3, 0, 1, 2, 3};
  CHECK(ModelLoss<double>(fx.config, params, MakeBatch(fx.mt, twice), Modality::kTokens) ==
        doctest::Approx(loss).epsilon(1e-12));

  Rng a(3), b(3), c(4);
  const double ta = ModelLoss<double>(fx.config, params, batch, Modality::kTokens, {true, &a});
  CHECK(ta == ModelLoss<double>(fx.config, params, batch, Modality::kTokens, {true, &b}));
  CHECK(ta != ModelLoss<double>(fx.config, params, batch, Modality::kTokens, {true, &c}));
  CHECK(ta != loss);
}

TEST_CASE("end-to-end gradients match finite differences") {
  Fixture fx(/*d_model=*/8, /*layers=*/2);
  fx.config.dropout = 0.0;
  auto params = InitParams<double>(fx.config, 1);
  // Move away from the symmetric initial point so every gradient is sizeable.
  Rng rng(17);
  for (auto &[name, t] : params) {
    for (double &v : t.storage()) v += 0.3 * std::normal_distribution<double>()(rng);
  }
  const std::vector<int> idx = {0, 1};
  for (const Task *task : {&fx.mt, &fx.asr}) {
    auto result = ModelGradCheck(fx.config, params, MakeBatch(*task, idx),
                                 task->input_modality);
    CAPTURE(task->id);
    CAPTURE(result.input);
    CAPTURE(result.analytic);
    CAPTURE(result.numeric);
    CHECK(result.max_rel_error < 1e-4);
  }
}

}  // namespace
}  // namespace mamlst
