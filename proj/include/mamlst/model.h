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

// Small transformer encoder-decoder shared by every task. Frame inputs pass
// through a stack of stride-2 convolutions before the encoder; token inputs
// skip that stack entirely, so its parameters are never touched by them.

#ifndef MAMLST_MODEL_H_
#define MAMLST_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mamlst/graph.h"
#include "mamlst/ops.h"
#include "mamlst/tasks.h"

namespace mamlst {

struct ModelConfig {
  int d_model = 64;
  int n_enc = 2;
  int n_dec = 2;
  int n_heads = 4;
  int d_ff = 128;
  double dropout = 0.2;
  int conv_layers = 2;
  int conv_channels = 16;
  Activation conv_activation = Activation::kRelu;
  int frame_dim = 16;
  int vocab_size = 0;
  int max_len = 256;  // longest target sequence, EOS included
  bool tie_output = false;

  void Validate() const;
  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

// Frequency width after the convolution stack.
int CompressedFrameDim(const ModelConfig &config);
// Time steps after the convolution stack.
int CompressedLength(const ModelConfig &config, int num_frames);

// Parameter name -> shape, sorted by name.
std::vector<std::pair<std::string, Shape>> ParamShapes(const ModelConfig &config);
int64_t ParamCount(const ModelConfig &config);

// Deterministic in (config, seed). Weights are Xavier-uniform, conv kernels
// He-uniform, embeddings N(0, 1/d), output projection N(0, 0.02^2); biases 0,
// layer-norm gains 1.
template <typename T>
ParamMap<T> InitParams(const ModelConfig &config, uint64_t seed);

template <typename T>
struct EncoderOutput {
  Var<T> states;             // [B*len x d_model]
  int len = 0;
  std::vector<int> lengths;  // valid positions per row
};

// Flags for one forward pass. rng is only read when train is set and
// dropout > 0.
struct PassMode {
  bool train = false;
  Rng *rng = nullptr;
};

// Conv stack + projection to d_model for a frames batch: [B*T' x d_model].
template <typename T>
Var<T> Compress(Graph<T> &g, const ModelConfig &config, const Batch &batch,
                std::vector<int> *out_lengths, int *out_len);

// Embedding or compression, positional encoding, then the encoder layers.
template <typename T>
EncoderOutput<T> EncodeSource(Graph<T> &g, const ModelConfig &config,
                              const Batch &batch, Modality modality,
                              PassMode mode = {});

// Logits [B*len x V] for decoder inputs [B x len] (row-major ids).
template <typename T>
Var<T> DecodeLogits(Graph<T> &g, const ModelConfig &config,
                    const EncoderOutput<T> &memory,
                    std::span<const int> decoder_inputs, int len,
                    PassMode mode = {});

// Teacher-forced logits [B*target_len x V].
template <typename T>
Var<T> ForwardLogits(Graph<T> &g, const ModelConfig &config, const Batch &batch,
                     Modality modality, PassMode mode = {});

// Mean cross-entropy over the non-PAD target positions.
template <typename T>
Var<T> ModelLossVar(Graph<T> &g, const ModelConfig &config, const Batch &batch,
                    Modality modality, PassMode mode = {});

template <typename T>
T ModelLoss(const ModelConfig &config, const ParamMap<T> &params,
            const Batch &batch, Modality modality, PassMode mode = {});

template <typename T>
struct LossAndGrads {
  T loss = 0;
  GradMap<T> grads;
};

// Forward and backward in one go. Gradients only cover the parameters the
// pass actually used.
template <typename T>
LossAndGrads<T> ModelLossAndGrads(const ModelConfig &config,
                                  const ParamMap<T> &params, const Batch &batch,
                                  Modality modality, PassMode mode = {});

// Row-major [len x d] sinusoidal table.
template <typename T>
Tensor<T> PositionalEncoding(int len, int d);

bool IsCompressionParam(const std::string &name);

}  // namespace mamlst

#endif  // MAMLST_MODEL_H_
