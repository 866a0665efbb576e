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

// Differentiable primitives. Every function records one node on the graph
// that owns its inputs and returns the result handle.

#ifndef MAMLST_OPS_H_
#define MAMLST_OPS_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <type_traits>
#include <vector>

#include "mamlst/graph.h"

namespace mamlst {

// [r x k] * [k x c] -> [r x c].
template <typename T>
Var<T> MatMul(Var<T> a, Var<T> b);

// [r x c] -> [c x r].
template <typename T>
Var<T> Transpose(Var<T> a);

// Elementwise, identical shapes.
template <typename T>
Var<T> Add(Var<T> a, Var<T> b);
template <typename T>
Var<T> Mul(Var<T> a, Var<T> b);

template <typename T>
Var<T> Scale(Var<T> a, T factor);

// x[..., c] + bias[c], broadcast over leading axes.
template <typename T>
Var<T> AddBias(Var<T> x, Var<T> bias);

template <typename T>
Var<T> Relu(Var<T> x);

// Max-subtracted softmax along `axis` (negative counts from the back).
template <typename T>
Var<T> Softmax(Var<T> x, int axis = -1);

// Sum of all elements, as a scalar.
template <typename T>
Var<T> Sum(Var<T> x);

template <typename T>
Var<T> Reshape(Var<T> x, Shape shape);

// Mean negative log-probability of `targets` under row-wise softmax of
// logits [n x V], over the positions where mask is nonzero.
template <typename T>
Var<T> CrossEntropyLoss(Var<T> logits, std::span<const int> targets,
                        std::span<const uint8_t> mask);

// Normalizes over the last axis, then applies gain and bias.
template <typename T>
Var<T> LayerNorm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-6));

// Rows of table [V x d] selected by ids -> [n x d].
template <typename T>
Var<T> Embedding(Var<T> table, std::span<const int> ids);

// Inverted dropout; identity when rate == 0.
template <typename T>
Var<T> Dropout(Var<T> x, double rate, std::mt19937_64 &rng);

enum class Activation { kNone, kRelu };

struct ConvOptions {
  Activation activation = Activation::kRelu;
  // Valid time extent per batch row. Output time steps at or past
  // ceil(length / 2) are forced to zero so padded inputs behave exactly like
  // zero padding. Empty means every row is fully valid.
  std::vector<int> lengths;
};

// 3x3 convolution with stride 2 over time and frequency, "same" zero padding
// (window centred on input 2*i), then the activation.
// input [T x F x Cin] or [B x T x F x Cin]; kernels [3 x 3 x Cin x Cout];
// bias [Cout] optional. Output has ceil(T/2) x ceil(F/2) x Cout per row.
template <typename T>
Var<T> Conv2dS2(Var<T> input, Var<T> kernels,
                std::optional<std::type_identity_t<Var<T>>> bias = {},
                const ConvOptions &options = {});

inline int64_t HalveCeil(int64_t n) { return (n + 1) / 2; }

struct AttentionLayout {
  int batch = 1;
  int query_len = 1;
  int key_len = 1;
  int heads = 1;
  // Keys at or past key_lengths[b] are masked out. Empty = all valid.
  std::vector<int> key_lengths;
  // Query i may only attend keys j <= i.
  bool causal = false;
};

// Scaled dot-product attention with heads split along the feature axis.
// q [B*Tq x d], k and v [B*Tk x d], rows grouped by batch entry.
// Returns [B*Tq x d].
template <typename T>
Var<T> Attention(Var<T> q, Var<T> k, Var<T> v, const AttentionLayout &layout);

}  // namespace mamlst

#endif  // MAMLST_OPS_H_
