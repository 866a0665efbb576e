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

#include "mamlst/model.h"

#include <cmath>
#include <random>

namespace mamlst {
namespace {

void AttentionShapes(const std::string &prefix, int d,
                     std::vector<std::pair<std::string, Shape>> *out) {
  // No key bias: it shifts every score of a query by the same amount, which
  // the softmax cancels, so it could never receive a gradient.
  for (const char *m : {"q", "k", "v", "o"}) {
    out->emplace_back(prefix + "/w" + m, Shape{d, d});
    if (*m != 'k') out->emplace_back(prefix + "/b" + m, Shape{d});
  }
}

void NormShapes(const std::string &prefix, int d,
                std::vector<std::pair<std::string, Shape>> *out) {
  out->emplace_back(prefix + "/gain", Shape{d});
  out->emplace_back(prefix + "/bias", Shape{d});
}

void FeedForwardShapes(const std::string &prefix, int d, int d_ff,
                       std::vector<std::pair<std::string, Shape>> *out) {
  out->emplace_back(prefix + "/w1", Shape{d, d_ff});
  out->emplace_back(prefix + "/b1", Shape{d_ff});
  out->emplace_back(prefix + "/w2", Shape{d_ff, d});
  out->emplace_back(prefix + "/b2", Shape{d});
}

bool EndsWith(const std::string &s, const std::string &suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <typename T>
Var<T> Linear(Graph<T> &g, Var<T> x, const std::string &w, const std::string &b) {
  return AddBias(MatMul(x, g.Param(w)), g.Param(b));
}

template <typename T>
Var<T> MaybeDropout(Var<T> x, const ModelConfig &config, PassMode mode) {
  if (!mode.train || config.dropout == 0.0) return x;
  if (mode.rng == nullptr) throw ContractError("training pass needs an rng for dropout");
  return Dropout(x, config.dropout, *mode.rng);
}

template <typename T>
Var<T> MultiHead(Graph<T> &g, const std::string &prefix, Var<T> queries,
                 Var<T> memory, const AttentionLayout &layout) {
  Var<T> q = Linear(g, queries, prefix + "/wq", prefix + "/bq");
  Var<T> k = MatMul(memory, g.Param(prefix + "/wk"));
  Var<T> v = Linear(g, memory, prefix + "/wv", prefix + "/bv");
  return Linear(g, Attention(q, k, v, layout), prefix + "/wo", prefix + "/bo");
}

// Post-norm residual: LayerNorm(x + dropout(sublayer)).
template <typename T>
Var<T> Residual(Graph<T> &g, const ModelConfig &config, PassMode mode, Var<T> x,
                Var<T> sublayer, const std::string &norm) {
  return LayerNorm(Add(x, MaybeDropout(sublayer, config, mode)),
                   g.Param(norm + "/gain"), g.Param(norm + "/bias"));
}

template <typename T>
Var<T> FeedForward(Graph<T> &g, const std::string &prefix, Var<T> x) {
  Var<T> h = Relu(Linear(g, x, prefix + "/w1", prefix + "/b1"));
  return Linear(g, h, prefix + "/w2", prefix + "/b2");
}

// Positional table repeated for each batch row: [batch*len x d].
template <typename T>
Var<T> AddPositions(Graph<T> &g, Var<T> x, int batch, int len, int d) {
  const Tensor<T> table = PositionalEncoding<T>(len, d);
  Tensor<T> tiled({static_cast<int64_t>(batch) * len, d});
  for (int b = 0; b < batch; ++b) {
    std::copy(table.storage().begin(), table.storage().end(),
              tiled.storage().begin() + static_cast<size_t>(b) * len * d);
  }
  return Add(x, g.Constant(std::move(tiled)));
}

}  // namespace

void ModelConfig::Validate() const {
  auto require = [](bool ok, const std::string &what) {
    if (!ok) throw ContractError("model config: " + what);
  };
  require(d_model >= 1, "d_model must be >= 1");
  require(n_heads >= 1 && d_model % n_heads == 0, "d_model must be divisible by n_heads");
  require(n_enc >= 0, "n_enc must be >= 0");
  require(n_dec >= 0, "n_dec must be >= 0");
  require(d_ff >= 1, "d_ff must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(conv_layers >= 0, "conv_layers must be >= 0");
  require(conv_channels >= 1, "conv_channels must be >= 1");
  require(frame_dim >= 1, "frame_dim must be >= 1");
  require(vocab_size > Vocabulary::kNumSpecials, "vocab_size must exceed the 4 specials");
  require(max_len >= 1, "max_len must be >= 1");
}

int CompressedFrameDim(const ModelConfig &config) {
  int f = config.frame_dim;
  for (int i = 0; i < config.conv_layers; ++i) f = static_cast<int>(HalveCeil(f));
  return f;
}

int CompressedLength(const ModelConfig &config, int num_frames) {
  if (num_frames < 1) throw ContractError("frame sequence must be non-empty");
  int t = num_frames;
  for (int i = 0; i < config.conv_layers; ++i) t = static_cast<int>(HalveCeil(t));
  return t;
}

bool IsCompressionParam(const std::string &name) {
  return name.rfind("compress/", 0) == 0;
}

std::vector<std::pair<std::string, Shape>> ParamShapes(const ModelConfig &config) {
  config.Validate();
  const int d = config.d_model, v = config.vocab_size;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("src_embed", Shape{v, d});
  out.emplace_back("tgt_embed", Shape{v, d});
  int channels = 1;
  for (int i = 0; i < config.conv_layers; ++i) {
    const std::string p = "compress/conv" + std::to_string(i);
    out.emplace_back(p + "/kernel", Shape{3, 3, channels, config.conv_channels});
    out.emplace_back(p + "/bias", Shape{config.conv_channels});
    channels = config.conv_channels;
  }
  out.emplace_back("compress/proj/w", Shape{CompressedFrameDim(config) * channels, d});
  out.emplace_back("compress/proj/b", Shape{d});
  for (int l = 0; l < config.n_enc; ++l) {
    const std::string p = "enc/" + std::to_string(l);
    AttentionShapes(p + "/self_attn", d, &out);
    NormShapes(p + "/ln1", d, &out);
    FeedForwardShapes(p + "/ffn", d, config.d_ff, &out);
    NormShapes(p + "/ln2", d, &out);
  }
  for (int l = 0; l < config.n_dec; ++l) {
    const std::string p = "dec/" + std::to_string(l);
    AttentionShapes(p + "/self_attn", d, &out);
    NormShapes(p + "/ln1", d, &out);
    AttentionShapes(p + "/cross_attn", d, &out);
    NormShapes(p + "/ln2", d, &out);
    FeedForwardShapes(p + "/ffn", d, config.d_ff, &out);
    NormShapes(p + "/ln3", d, &out);
  }
  if (!config.tie_output) out.emplace_back("out/w", Shape{d, v});
  out.emplace_back("out/b", Shape{v});
  std::sort(out.begin(), out.end());
  return out;
}

int64_t ParamCount(const ModelConfig &config) {
  int64_t n = 0;
  for (const auto &[name, shape] : ParamShapes(config)) n += ShapeSize(shape);
  return n;
}

template <typename T>
ParamMap<T> InitParams(const ModelConfig &config, uint64_t seed) {
  Rng rng(DeriveSeed(seed, 0));
  ParamMap<T> params;
  for (const auto &[name, shape] : ParamShapes(config)) {
    Tensor<T> t(shape);
    if (EndsWith(name, "/gain")) {
      t.Fill(T(1));
    } else if (name == "src_embed" || name == "tgt_embed") {
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(config.d_model));
      for (T &v : t.storage()) v = static_cast<T>(dist(rng));
    } else if (name == "out/w") {
      std::normal_distribution<double> dist(0.0, 0.02);
      for (T &v : t.storage()) v = static_cast<T>(dist(rng));
    } else if (EndsWith(name, "/kernel")) {
      const double fan_in = 9.0 * static_cast<double>(shape[2]);
      std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in),
                                                  std::sqrt(6.0 / fan_in));
      for (T &v : t.storage()) v = static_cast<T>(dist(rng));
    } else if (shape.size() == 2) {
      const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (T &v : t.storage()) v = static_cast<T>(dist(rng));
    }
    params.emplace(name, std::move(t));
  }
  return params;
}

template <typename T>
Tensor<T> PositionalEncoding(int len, int d) {
  Tensor<T> table({len, d});
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d; i += 2) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(i) / d);
      table.at(pos, i) = static_cast<T>(std::sin(angle));
      if (i + 1 < d) table.at(pos, i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return table;
}

template <typename T>
Var<T> Compress(Graph<T> &g, const ModelConfig &config, const Batch &batch,
                std::vector<int> *out_lengths, int *out_len) {
  if (batch.modality != Modality::kFrames || batch.frames.empty()) {
    throw ContractError("compression needs a frames batch");
  }
  if (batch.frame_dim != config.frame_dim) {
    throw DimensionError("frames have width " + std::to_string(batch.frame_dim) +
                         ", model expects " + std::to_string(config.frame_dim));
  }
  const int64_t b = batch.size;
  std::vector<T> values(batch.frames.begin(), batch.frames.end());
  Var<T> x = g.Constant(
      Tensor<T>({b, batch.source_len, batch.frame_dim, 1}, std::move(values)));
  std::vector<int> lengths = batch.source_lengths;
  int len = batch.source_len;
  for (int i = 0; i < config.conv_layers; ++i) {
    const std::string p = "compress/conv" + std::to_string(i);
    ConvOptions opts;
    opts.activation = config.conv_activation;
    opts.lengths = lengths;
    x = Conv2dS2(x, g.Param(p + "/kernel"), g.Param(p + "/bias"), opts);
    for (int &l : lengths) l = static_cast<int>(HalveCeil(l));
    len = static_cast<int>(HalveCeil(len));
  }
  const Shape &s = x.shape();
  x = Reshape(x, {b * len, s[2] * s[3]});
  *out_lengths = std::move(lengths);
  *out_len = len;
  return Linear(g, x, "compress/proj/w", "compress/proj/b");
}

template <typename T>
EncoderOutput<T> EncodeSource(Graph<T> &g, const ModelConfig &config,
                              const Batch &batch, Modality modality,
                              PassMode mode) {
  if (batch.modality != modality) {
    throw ContractError("batch holds " + ModalityName(batch.modality) +
                        " inputs but the task declares " + ModalityName(modality));
  }
  const int d = config.d_model;
  EncoderOutput<T> enc;
  Var<T> x;
  if (modality == Modality::kFrames) {
    x = Compress(g, config, batch, &enc.lengths, &enc.len);
  } else {
    if (batch.source_ids.empty()) throw ContractError("token batch has no source ids");
    x = Scale(Embedding(g.Param("src_embed"), batch.source_ids),
              static_cast<T>(std::sqrt(static_cast<double>(d))));
    enc.lengths = batch.source_lengths;
    enc.len = batch.source_len;
  }
  x = MaybeDropout(AddPositions(g, x, batch.size, enc.len, d), config, mode);

  AttentionLayout layout;
  layout.batch = batch.size;
  layout.query_len = layout.key_len = enc.len;
  layout.heads = config.n_heads;
  layout.key_lengths = enc.lengths;
  for (int l = 0; l < config.n_enc; ++l) {
    const std::string p = "enc/" + std::to_string(l);
    x = Residual(g, config, mode, x, MultiHead(g, p + "/self_attn", x, x, layout),
                 p + "/ln1");
    x = Residual(g, config, mode, x, FeedForward(g, p + "/ffn", x), p + "/ln2");
  }
  enc.states = x;
  return enc;
}

template <typename T>
Var<T> DecodeLogits(Graph<T> &g, const ModelConfig &config,
                    const EncoderOutput<T> &memory,
                    std::span<const int> decoder_inputs, int len, PassMode mode) {
  const int batch = static_cast<int>(memory.lengths.size());
  if (static_cast<int64_t>(decoder_inputs.size()) !=
      static_cast<int64_t>(batch) * len) {
    throw DimensionError("decoder inputs do not match batch x length");
  }
  if (len > config.max_len) {
    throw ContractError("target length " + std::to_string(len) + " exceeds max_len " +
                        std::to_string(config.max_len));
  }
  const int d = config.d_model;
  Var<T> x = Scale(Embedding(g.Param("tgt_embed"), decoder_inputs),
                   static_cast<T>(std::sqrt(static_cast<double>(d))));
  x = MaybeDropout(AddPositions(g, x, batch, len, d), config, mode);

  AttentionLayout self;
  self.batch = batch;
  self.query_len = self.key_len = len;
  self.heads = config.n_heads;
  self.causal = true;
  AttentionLayout cross;
  cross.batch = batch;
  cross.query_len = len;
  cross.key_len = memory.len;
  cross.heads = config.n_heads;
  cross.key_lengths = memory.lengths;
  for (int l = 0; l < config.n_dec; ++l) {
    const std::string p = "dec/" + std::to_string(l);
    x = Residual(g, config, mode, x, MultiHead(g, p + "/self_attn", x, x, self),
                 p + "/ln1");
    x = Residual(g, config, mode, x,
                 MultiHead(g, p + "/cross_attn", x, memory.states, cross), p + "/ln2");
    x = Residual(g, config, mode, x, FeedForward(g, p + "/ffn", x), p + "/ln3");
  }
  if (config.tie_output) {
    return AddBias(MatMul(x, Transpose(g.Param("tgt_embed"))), g.Param("out/b"));
  }
  return Linear(g, x, "out/w", "out/b");
}

template <typename T>
Var<T> ForwardLogits(Graph<T> &g, const ModelConfig &config, const Batch &batch,
                     Modality modality, PassMode mode) {
  if (!batch.has_targets()) throw ContractError("teacher forcing needs targets");
  if (batch.target_len > config.max_len) {
    throw ContractError("target length " + std::to_string(batch.target_len) +
                        " exceeds max_len " + std::to_string(config.max_len));
  }
  EncoderOutput<T> memory = EncodeSource(g, config, batch, modality, mode);
  // Shift right: BOS, then every target but the last position.
  std::vector<int> inputs(batch.targets.size());
  for (int r = 0; r < batch.size; ++r) {
    const int *src = batch.targets.data() + static_cast<size_t>(r) * batch.target_len;
    int *dst = inputs.data() + static_cast<size_t>(r) * batch.target_len;
    dst[0] = Vocabulary::kBos;
    std::copy(src, src + batch.target_len - 1, dst + 1);
  }
  return DecodeLogits(g, config, memory, inputs, batch.target_len, mode);
}

template <typename T>
Var<T> ModelLossVar(Graph<T> &g, const ModelConfig &config, const Batch &batch,
                    Modality modality, PassMode mode) {
  Var<T> logits = ForwardLogits(g, config, batch, modality, mode);
  return CrossEntropyLoss(logits, batch.targets, batch.target_mask);
}

template <typename T>
T ModelLoss(const ModelConfig &config, const ParamMap<T> &params,
            const Batch &batch, Modality modality, PassMode mode) {
  Graph<T> g(/*track_gradients=*/false);
  g.Bind(&params);
  const T loss = ModelLossVar(g, config, batch, modality, mode).value().item();
  if (!std::isfinite(loss)) throw NumericError("non-finite loss in forward pass");
  return loss;
}

template <typename T>
LossAndGrads<T> ModelLossAndGrads(const ModelConfig &config,
                                  const ParamMap<T> &params, const Batch &batch,
                                  Modality modality, PassMode mode) {
  Graph<T> g;
  g.Bind(&params);
  Var<T> loss = ModelLossVar(g, config, batch, modality, mode);
  LossAndGrads<T> out;
  out.loss = loss.value().item();
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss in forward pass");
  out.grads = g.Backward(loss);
  return out;
}

#define MAMLST_INSTANTIATE_MODEL(T)                                             \
  template ParamMap<T> InitParams<T>(const ModelConfig &, uint64_t);           \
  template Tensor<T> PositionalEncoding<T>(int, int);                          \
  template Var<T> Compress<T>(Graph<T> &, const ModelConfig &, const Batch &,  \
                              std::vector<int> *, int *);                      \
  template EncoderOutput<T> EncodeSource<T>(Graph<T> &, const ModelConfig &,   \
                                            const Batch &, Modality, PassMode); \
  template Var<T> DecodeLogits<T>(Graph<T> &, const ModelConfig &,             \
                                  const EncoderOutput<T> &,                    \
                                  std::span<const int>, int, PassMode);        \
  template Var<T> ForwardLogits<T>(Graph<T> &, const ModelConfig &,            \
                                   const Batch &, Modality, PassMode);         \
  template Var<T> ModelLossVar<T>(Graph<T> &, const ModelConfig &,             \
                                  const Batch &, Modality, PassMode);          \
  template T ModelLoss<T>(const ModelConfig &, const ParamMap<T> &,            \
                          const Batch &, Modality, PassMode);                  \
  template LossAndGrads<T> ModelLossAndGrads<T>(                               \
      const ModelConfig &, const ParamMap<T> &, const Batch &, Modality, PassMode);

MAMLST_INSTANTIATE_MODEL(float)
MAMLST_INSTANTIATE_MODEL(double)

#undef MAMLST_INSTANTIATE_MODEL

}  // namespace mamlst
