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

#include "mamlst/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace mamlst {
namespace {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<Matrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const Matrix<T>>;
template <typename T>
using Strided = Eigen::Map<Matrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStrided = Eigen::Map<const Matrix<T>, 0, Eigen::OuterStride<>>;

template <typename T>
ConstMatrixMap<T> AsMatrix(const Tensor<T> &t, int64_t rows, int64_t cols) {
  return ConstMatrixMap<T>(t.data(), rows, cols);
}
template <typename T>
MatrixMap<T> AsMatrix(Tensor<T> &t, int64_t rows, int64_t cols) {
  return MatrixMap<T>(t.data(), rows, cols);
}

// out[j] += sum_i m[i, j], rows visited in order. Eigen's column reductions
// peel differently depending on buffer alignment, which made results vary
// from run to run in the last bit.
template <typename T>
void AccumulateColumnSums(const T *m, int64_t rows, int64_t cols, T *out) {
  for (int64_t i = 0; i < rows; ++i) {
    const T *row = m + i * cols;
    for (int64_t j = 0; j < cols; ++j) out[j] += row[j];
  }
}

void RequireSameShape(const Shape &a, const Shape &b, const char *op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shapes " + ShapeString(a) +
                         " and " + ShapeString(b) + " differ");
  }
}

void RequireSameGraph(const void *a, const void *b) {
  if (a != b) throw ContractError("operands belong to different graphs");
}

int NormalizeAxis(int axis, int rank) {
  int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw RangeError("axis " + std::to_string(axis) + " out of bounds for rank " +
                     std::to_string(rank));
  }
  return a;
}

}  // namespace

template <typename T>
Var<T> MatMul(Var<T> a, Var<T> b) {
  RequireSameGraph(a.graph, b.graph);
  const Tensor<T> &av = a.value();
  const Tensor<T> &bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + ShapeString(av.shape()) +
                         " by " + ShapeString(bv.shape()));
  }
  const int64_t r = av.dim(0), k = av.dim(1), c = bv.dim(1);
  Tensor<T> out({r, c});
  AsMatrix(out, r, c).noalias() = AsMatrix(av, r, k) * AsMatrix(bv, k, c);
  return a.graph->Record(
      std::move(out), {a, b}, [a, b, r, k, c](Graph<T> &g, const Tensor<T> &dz) {
        auto dzm = AsMatrix(dz, r, c);
        if (g.requires_grad(a)) {
          AsMatrix(g.grad(a), r, k).noalias() +=
              dzm * AsMatrix(g.value(b), k, c).transpose();
        }
        if (g.requires_grad(b)) {
          AsMatrix(g.grad(b), k, c).noalias() +=
              AsMatrix(g.value(a), r, k).transpose() * dzm;
        }
      });
}

template <typename T>
Var<T> Transpose(Var<T> a) {
  const Tensor<T> &av = a.value();
  if (av.rank() != 2) {
    throw DimensionError("transpose: expected a matrix, got " +
                         ShapeString(av.shape()));
  }
  const int64_t r = av.dim(0), c = av.dim(1);
  Tensor<T> out({c, r});
  AsMatrix(out, c, r) = AsMatrix(av, r, c).transpose();
  return a.graph->Record(std::move(out), {a},
                         [a, r, c](Graph<T> &g, const Tensor<T> &dz) {
                           AsMatrix(g.grad(a), r, c) += AsMatrix(dz, c, r).transpose();
                         });
}

template <typename T>
Var<T> Add(Var<T> a, Var<T> b) {
  RequireSameGraph(a.graph, b.graph);
  RequireSameShape(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  const Tensor<T> &bv = b.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.graph->Record(std::move(out), {a, b},
                         [a, b](Graph<T> &g, const Tensor<T> &dz) {
                           for (Var<T> x : {a, b}) {
                             if (!g.requires_grad(x)) continue;
                             Tensor<T> &dx = g.grad(x);
                             for (int64_t i = 0; i < dz.size(); ++i) dx[i] += dz[i];
                           }
                         });
}

template <typename T>
Var<T> Mul(Var<T> a, Var<T> b) {
  RequireSameGraph(a.graph, b.graph);
  RequireSameShape(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  const Tensor<T> &bv = b.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.graph->Record(
      std::move(out), {a, b}, [a, b](Graph<T> &g, const Tensor<T> &dz) {
        if (g.requires_grad(a)) {
          Tensor<T> &da = g.grad(a);
          const Tensor<T> &bv = g.value(b);
          for (int64_t i = 0; i < dz.size(); ++i) da[i] += dz[i] * bv[i];
        }
        if (g.requires_grad(b)) {
          Tensor<T> &db = g.grad(b);
          const Tensor<T> &av = g.value(a);
          for (int64_t i = 0; i < dz.size(); ++i) db[i] += dz[i] * av[i];
        }
      });
}

template <typename T>
Var<T> Scale(Var<T> a, T factor) {
  Tensor<T> out = a.value();
  for (T &v : out.storage()) v *= factor;
  return a.graph->Record(std::move(out), {a},
                         [a, factor](Graph<T> &g, const Tensor<T> &dz) {
                           Tensor<T> &da = g.grad(a);
                           for (int64_t i = 0; i < dz.size(); ++i) {
                             da[i] += dz[i] * factor;
                           }
                         });
}

template <typename T>
Var<T> AddBias(Var<T> x, Var<T> bias) {
  RequireSameGraph(x.graph, bias.graph);
  const Tensor<T> &xv = x.value();
  const Tensor<T> &bv = bias.value();
  if (bv.rank() != 1 || xv.rank() < 1 || xv.shape().back() != bv.dim(0)) {
    throw DimensionError("add_bias: " + ShapeString(bv.shape()) +
                         " does not broadcast over " + ShapeString(xv.shape()));
  }
  const int64_t c = bv.dim(0), rows = xv.size() / c;
  Tensor<T> out = xv;
  AsMatrix(out, rows, c).rowwise() += AsMatrix(bv, 1, c).row(0);
  return x.graph->Record(
      std::move(out), {x, bias},
      [x, bias, rows, c](Graph<T> &g, const Tensor<T> &dz) {
        if (g.requires_grad(x)) {
          AsMatrix(g.grad(x), rows, c) += AsMatrix(dz, rows, c);
        }
        if (g.requires_grad(bias)) {
          AccumulateColumnSums(dz.data(), rows, c, g.grad(bias).data());
        }
      });
}

template <typename T>
Var<T> Relu(Var<T> x) {
  Tensor<T> out = x.value();
  auto gate = std::make_shared<std::vector<uint8_t>>(out.size());
  for (int64_t i = 0; i < out.size(); ++i) {
    (*gate)[i] = out[i] > T(0);
    if (!(*gate)[i]) out[i] = T(0);
  }
  return x.graph->Record(std::move(out), {x},
                         [x, gate](Graph<T> &g, const Tensor<T> &dz) {
                           Tensor<T> &dx = g.grad(x);
                           for (int64_t i = 0; i < dz.size(); ++i) {
                             if ((*gate)[i]) dx[i] += dz[i];
                           }
                         });
}

template <typename T>
Var<T> Softmax(Var<T> x, int axis) {
  const Tensor<T> &xv = x.value();
  const int ax = NormalizeAxis(axis, std::max(1, xv.rank()));
  int64_t outer = 1, n = xv.rank() == 0 ? 1 : xv.dim(ax), inner = 1;
  for (int i = 0; i < ax; ++i) outer *= xv.dim(i);
  for (int i = ax + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  Tensor<T> out(xv.shape());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * n * inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (int64_t j = 0; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      T total = 0;
      for (int64_t j = 0; j < n; ++j) {
        T e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (int64_t j = 0; j < n; ++j) out[base + j * inner] /= total;
    }
  }
  auto probs = std::make_shared<Tensor<T>>(out);
  return x.graph->Record(
      std::move(out), {x},
      [x, probs, outer, n, inner](Graph<T> &g, const Tensor<T> &dz) {
        Tensor<T> &dx = g.grad(x);
        const Tensor<T> &p = *probs;
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * n * inner + in;
            T dot = 0;
            for (int64_t j = 0; j < n; ++j) {
              dot += dz[base + j * inner] * p[base + j * inner];
            }
            for (int64_t j = 0; j < n; ++j) {
              const int64_t idx = base + j * inner;
              dx[idx] += p[idx] * (dz[idx] - dot);
            }
          }
        }
      });
}

template <typename T>
Var<T> Sum(Var<T> x) {
  T total = 0;
  for (T v : x.value().values()) total += v;
  return x.graph->Record(Tensor<T>::Scalar(total), {x},
                         [x](Graph<T> &g, const Tensor<T> &dz) {
                           Tensor<T> &dx = g.grad(x);
                           for (T &v : dx.storage()) v += dz[0];
                         });
}

template <typename T>
Var<T> Reshape(Var<T> x, Shape shape) {
  Tensor<T> out = x.value().Reshaped(std::move(shape));
  return x.graph->Record(std::move(out), {x},
                         [x](Graph<T> &g, const Tensor<T> &dz) {
                           Tensor<T> &dx = g.grad(x);
                           for (int64_t i = 0; i < dz.size(); ++i) dx[i] += dz[i];
                         });
}

template <typename T>
Var<T> CrossEntropyLoss(Var<T> logits, std::span<const int> targets,
                        std::span<const uint8_t> mask) {
  const Tensor<T> &lv = logits.value();
  if (lv.rank() != 2) {
    throw DimensionError("cross_entropy: logits must be [n x V], got " +
                         ShapeString(lv.shape()));
  }
  const int64_t n = lv.dim(0), vocab = lv.dim(1);
  if (static_cast<int64_t>(targets.size()) != n ||
      static_cast<int64_t>(mask.size()) != n) {
    throw DimensionError("cross_entropy: " + std::to_string(n) +
                         " logit rows but " + std::to_string(targets.size()) +
                         " targets and " + std::to_string(mask.size()) +
                         " mask entries");
  }
  int64_t count = 0;
  for (int64_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || targets[i] >= vocab) {
      throw RangeError("cross_entropy: target " + std::to_string(targets[i]) +
                       " outside [0, " + std::to_string(vocab) + ")");
    }
    ++count;
  }
  if (count == 0) throw ContractError("cross_entropy: every position is masked");

  // probs holds the softmax of masked rows for the backward pass.
  auto probs = std::make_shared<Tensor<T>>(lv.shape());
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const T *row = lv.data() + i * vocab;
    T *prow = probs->data() + i * vocab;
    T mx = *std::max_element(row, row + vocab);
    T sum = 0;
    for (int64_t j = 0; j < vocab; ++j) {
      prow[j] = std::exp(row[j] - mx);
      sum += prow[j];
    }
    for (int64_t j = 0; j < vocab; ++j) prow[j] /= sum;
    total += static_cast<double>(mx + std::log(sum) - row[targets[i]]);
  }
  const T inv = T(1) / static_cast<T>(count);
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<uint8_t> msk(mask.begin(), mask.end());
  return logits.graph->Record(
      Tensor<T>::Scalar(static_cast<T>(total) * inv), {logits},
      [logits, probs, tgt = std::move(tgt), msk = std::move(msk), vocab, inv](
          Graph<T> &g, const Tensor<T> &dz) {
        Tensor<T> &dl = g.grad(logits);
        const T s = dz[0] * inv;
        for (size_t i = 0; i < tgt.size(); ++i) {
          if (!msk[i]) continue;
          const T *prow = probs->data() + i * vocab;
          T *drow = dl.data() + i * vocab;
          for (int64_t j = 0; j < vocab; ++j) drow[j] += s * prow[j];
          drow[tgt[i]] -= s;
        }
      });
}

template <typename T>
Var<T> LayerNorm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  const Tensor<T> &xv = x.value();
  const Tensor<T> &gv = gain.value();
  const Tensor<T> &bv = bias.value();
  if (xv.rank() < 1 || gv.rank() != 1 || bv.rank() != 1 ||
      gv.dim(0) != xv.shape().back() || bv.dim(0) != xv.shape().back()) {
    throw DimensionError("layer_norm: gain " + ShapeString(gv.shape()) +
                         " / bias " + ShapeString(bv.shape()) +
                         " do not match " + ShapeString(xv.shape()));
  }
  const int64_t d = gv.dim(0), rows = xv.size() / d;
  auto xhat = std::make_shared<Tensor<T>>(xv.shape());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  Tensor<T> out(xv.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const T *row = xv.data() + r * d;
    T mean = 0;
    for (int64_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<T>(d);
    T var = 0;
    for (int64_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    T *xh = xhat->data() + r * d;
    T *o = out.data() + r * d;
    for (int64_t j = 0; j < d; ++j) {
      xh[j] = (row[j] - mean) * rs;
      o[j] = xh[j] * gv[j] + bv[j];
    }
  }
  return x.graph->Record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat, rstd, d, rows](Graph<T> &g, const Tensor<T> &dz) {
        const Tensor<T> &gv = g.value(gain);
        if (g.requires_grad(gain) || g.requires_grad(bias)) {
          Tensor<T> &dg = g.grad(gain);
          Tensor<T> &db = g.grad(bias);
          for (int64_t r = 0; r < rows; ++r) {
            for (int64_t j = 0; j < d; ++j) {
              dg[j] += dz[r * d + j] * (*xhat)[r * d + j];
              db[j] += dz[r * d + j];
            }
          }
        }
        if (!g.requires_grad(x)) return;
        Tensor<T> &dx = g.grad(x);
        std::vector<T> dxhat(d);
        for (int64_t r = 0; r < rows; ++r) {
          const T *xh = xhat->data() + r * d;
          T mean_d = 0, mean_dx = 0;
          for (int64_t j = 0; j < d; ++j) {
            dxhat[j] = dz[r * d + j] * gv[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xh[j];
          }
          mean_d /= static_cast<T>(d);
          mean_dx /= static_cast<T>(d);
          for (int64_t j = 0; j < d; ++j) {
            dx[r * d + j] += (*rstd)[r] * (dxhat[j] - mean_d - xh[j] * mean_dx);
          }
        }
      });
}

template <typename T>
Var<T> Embedding(Var<T> table, std::span<const int> ids) {
  const Tensor<T> &tv = table.value();
  if (tv.rank() != 2) {
    throw DimensionError("embedding: table must be [V x d], got " +
                         ShapeString(tv.shape()));
  }
  const int64_t vocab = tv.dim(0), d = tv.dim(1);
  const int64_t n = static_cast<int64_t>(ids.size());
  if (n == 0) throw ContractError("embedding: no ids");
  Tensor<T> out({n, d});
  for (int64_t i = 0; i < n; ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) {
      throw RangeError("embedding: id " + std::to_string(ids[i]) +
                       " outside [0, " + std::to_string(vocab) + ")");
    }
    std::copy_n(tv.data() + ids[i] * d, d, out.data() + i * d);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return table.graph->Record(
      std::move(out), {table},
      [table, idv = std::move(idv), d](Graph<T> &g, const Tensor<T> &dz) {
        Tensor<T> &dt = g.grad(table);
        for (size_t i = 0; i < idv.size(); ++i) {
          T *dst = dt.data() + idv[i] * d;
          const T *src = dz.data() + i * d;
          for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
      });
}

template <typename T>
Var<T> Dropout(Var<T> x, double rate, std::mt19937_64 &rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ContractError("dropout rate must lie in [0, 1)");
  }
  if (rate == 0.0) return x;
  const Tensor<T> &xv = x.value();
  auto keep = std::make_shared<Tensor<T>>(xv.shape());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) {
    (*keep)[i] = u(rng) >= rate ? scale : T(0);
    out[i] = xv[i] * (*keep)[i];
  }
  return x.graph->Record(std::move(out), {x},
                         [x, keep](Graph<T> &g, const Tensor<T> &dz) {
                           Tensor<T> &dx = g.grad(x);
                           for (int64_t i = 0; i < dz.size(); ++i) {
                             dx[i] += dz[i] * (*keep)[i];
                           }
                         });
}

template <typename T>
Var<T> Conv2dS2(Var<T> input, Var<T> kernels,
                std::optional<std::type_identity_t<Var<T>>> bias,
                const ConvOptions &options) {
  const Tensor<T> &xv = input.value();
  const Tensor<T> &kv = kernels.value();
  if (xv.rank() != 3 && xv.rank() != 4) {
    throw DimensionError("conv2d_s2: input must be [T x F x C] or [B x T x F x C], got " +
                         ShapeString(xv.shape()));
  }
  const bool batched = xv.rank() == 4;
  const int64_t batch = batched ? xv.dim(0) : 1;
  const int off = batched ? 1 : 0;
  const int64_t tin = xv.dim(off), fin = xv.dim(off + 1), cin = xv.dim(off + 2);
  if (kv.rank() != 4 || kv.dim(0) != 3 || kv.dim(1) != 3 || kv.dim(2) != cin) {
    throw DimensionError("conv2d_s2: kernels " + ShapeString(kv.shape()) +
                         " do not match input channels of " +
                         ShapeString(xv.shape()));
  }
  const int64_t cout = kv.dim(3);
  if (bias) {
    RequireSameGraph(input.graph, bias->graph);
    if (bias->value().rank() != 1 || bias->value().dim(0) != cout) {
      throw DimensionError("conv2d_s2: bias " + ShapeString(bias->shape()) +
                           " does not match " + std::to_string(cout) +
                           " output channels");
    }
  }
  if (!options.lengths.empty() &&
      static_cast<int64_t>(options.lengths.size()) != batch) {
    throw DimensionError("conv2d_s2: lengths do not match batch size");
  }
  const int64_t tout = HalveCeil(tin), fout = HalveCeil(fin);
  const int64_t patch = 9 * cin;
  const int64_t rows = batch * tout * fout;

  // im2col: one row per output position, columns ordered (kt, kf, ci) to
  // match the kernel layout.
  auto cols = std::make_shared<Tensor<T>>(Shape{rows, patch});
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t to = 0; to < tout; ++to) {
      for (int64_t fo = 0; fo < fout; ++fo) {
        T *dst = cols->data() + ((b * tout + to) * fout + fo) * patch;
        for (int kt = 0; kt < 3; ++kt) {
          const int64_t t = 2 * to + kt - 1;
          for (int kf = 0; kf < 3; ++kf) {
            const int64_t f = 2 * fo + kf - 1;
            T *cell = dst + (kt * 3 + kf) * cin;
            if (t < 0 || t >= tin || f < 0 || f >= fin) continue;
            std::copy_n(xv.data() + ((b * tin + t) * fin + f) * cin, cin, cell);
          }
        }
      }
    }
  }
  Shape out_shape = batched ? Shape{batch, tout, fout, cout}
                            : Shape{tout, fout, cout};
  Tensor<T> out(out_shape);
  auto om = AsMatrix(out, rows, cout);
  om.noalias() = AsMatrix(*cols, rows, patch) * AsMatrix(kv, patch, cout);
  if (bias) om.rowwise() += AsMatrix(bias->value(), 1, cout).row(0);

  // gate[i] is dOut/dPre: 1 where the activation passes and the time step is
  // valid, 0 otherwise.
  auto gate = std::make_shared<std::vector<T>>(out.size(), T(1));
  for (int64_t b = 0; b < batch; ++b) {
    const int64_t valid =
        options.lengths.empty() ? tout : HalveCeil(options.lengths[b]);
    for (int64_t to = 0; to < tout; ++to) {
      T *o = out.data() + (b * tout + to) * fout * cout;
      T *gt = gate->data() + (b * tout + to) * fout * cout;
      for (int64_t i = 0; i < fout * cout; ++i) {
        if (to >= valid ||
            (options.activation == Activation::kRelu && o[i] <= T(0))) {
          o[i] = T(0);
          gt[i] = T(0);
        }
      }
    }
  }

  std::vector<Var<T>> inputs = {input, kernels};
  if (bias) inputs.push_back(*bias);
  std::optional<Var<T>> bias_var = bias;
  return input.graph->Record(
      std::move(out), inputs,
      [input, kernels, bias_var, cols, gate, batch, tin, fin, cin, tout, fout,
       cout, patch, rows](Graph<T> &g, const Tensor<T> &dz) {
        Matrix<T> dpre(rows, cout);
        for (int64_t i = 0; i < rows * cout; ++i) {
          dpre.data()[i] = dz[i] * (*gate)[i];
        }
        if (g.requires_grad(kernels)) {
          AsMatrix(g.grad(kernels), patch, cout).noalias() +=
              AsMatrix(*cols, rows, patch).transpose() * dpre;
        }
        if (bias_var && g.requires_grad(*bias_var)) {
          AccumulateColumnSums(dpre.data(), rows, cout, g.grad(*bias_var).data());
        }
        if (!g.requires_grad(input)) return;
        Matrix<T> dcols = dpre * AsMatrix(g.value(kernels), patch, cout).transpose();
        Tensor<T> &dx = g.grad(input);
        for (int64_t b = 0; b < batch; ++b) {
          for (int64_t to = 0; to < tout; ++to) {
            for (int64_t fo = 0; fo < fout; ++fo) {
              const T *src = dcols.data() + ((b * tout + to) * fout + fo) * patch;
              for (int kt = 0; kt < 3; ++kt) {
                const int64_t t = 2 * to + kt - 1;
                if (t < 0 || t >= tin) continue;
                for (int kf = 0; kf < 3; ++kf) {
                  const int64_t f = 2 * fo + kf - 1;
                  if (f < 0 || f >= fin) continue;
                  T *dst = dx.data() + ((b * tin + t) * fin + f) * cin;
                  const T *cell = src + (kt * 3 + kf) * cin;
                  for (int64_t c = 0; c < cin; ++c) dst[c] += cell[c];
                }
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> Attention(Var<T> q, Var<T> k, Var<T> v, const AttentionLayout &layout) {
  RequireSameGraph(q.graph, k.graph);
  RequireSameGraph(q.graph, v.graph);
  const Tensor<T> &qv = q.value();
  const Tensor<T> &kv = k.value();
  const Tensor<T> &vv = v.value();
  const int64_t batch = layout.batch, tq = layout.query_len, tk = layout.key_len;
  const int heads = layout.heads;
  if (qv.rank() != 2 || kv.rank() != 2 || vv.rank() != 2) {
    throw DimensionError("attention: q, k, v must be 2-D");
  }
  const int64_t d = qv.dim(1);
  if (qv.dim(0) != batch * tq || kv.dim(0) != batch * tk ||
      vv.dim(0) != batch * tk || kv.dim(1) != d || vv.dim(1) != d) {
    throw DimensionError("attention: q " + ShapeString(qv.shape()) + ", k " +
                         ShapeString(kv.shape()) + ", v " +
                         ShapeString(vv.shape()) + " do not fit layout");
  }
  if (heads < 1 || d % heads != 0) {
    throw DimensionError("attention: width " + std::to_string(d) +
                         " not divisible by " + std::to_string(heads) + " heads");
  }
  if (!layout.key_lengths.empty() &&
      static_cast<int64_t>(layout.key_lengths.size()) != batch) {
    throw DimensionError("attention: key_lengths do not match batch size");
  }
  const int64_t dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  // probs[b][h] is the [tq x tk] attention matrix.
  auto probs = std::make_shared<std::vector<T>>(batch * heads * tq * tk);
  Tensor<T> out({batch * tq, d});
  Matrix<T> scores(tq, tk);
  for (int64_t b = 0; b < batch; ++b) {
    const int64_t klen = layout.key_lengths.empty() ? tk : layout.key_lengths[b];
    if (klen < 1 || klen > tk) throw RangeError("attention: bad key length");
    for (int h = 0; h < heads; ++h) {
      ConstStrided<T> qh(qv.data() + b * tq * d + h * dh, tq, dh,
                         Eigen::OuterStride<>(d));
      ConstStrided<T> kh(kv.data() + b * tk * d + h * dh, tk, dh,
                         Eigen::OuterStride<>(d));
      ConstStrided<T> vh(vv.data() + b * tk * d + h * dh, tk, dh,
                         Eigen::OuterStride<>(d));
      scores.noalias() = (qh * kh.transpose()) * scale;
      MatrixMap<T> p(probs->data() + (b * heads + h) * tq * tk, tq, tk);
      for (int64_t i = 0; i < tq; ++i) {
        const int64_t last = layout.causal ? std::min<int64_t>(i + 1, klen) : klen;
        T mx = -std::numeric_limits<T>::infinity();
        for (int64_t j = 0; j < last; ++j) mx = std::max(mx, scores(i, j));
        T total = 0;
        for (int64_t j = 0; j < tk; ++j) {
          T e = j < last ? std::exp(scores(i, j) - mx) : T(0);
          p(i, j) = e;
          total += e;
        }
        p.row(i) /= total;
      }
      Strided<T> oh(out.data() + b * tq * d + h * dh, tq, dh,
                    Eigen::OuterStride<>(d));
      oh.noalias() = p * vh;
    }
  }
  return q.graph->Record(
      std::move(out), {q, k, v},
      [q, k, v, probs, batch, tq, tk, heads, d, dh, scale](Graph<T> &g,
                                                           const Tensor<T> &dz) {
        const Tensor<T> &qv = g.value(q);
        const Tensor<T> &kv = g.value(k);
        const Tensor<T> &vv = g.value(v);
        const bool gq = g.requires_grad(q), gk = g.requires_grad(k),
                   gv = g.requires_grad(v);
        T *dq = gq ? g.grad(q).data() : nullptr;
        T *dk = gk ? g.grad(k).data() : nullptr;
        T *dv = gv ? g.grad(v).data() : nullptr;
        Matrix<T> dp(tq, tk);
        for (int64_t b = 0; b < batch; ++b) {
          for (int h = 0; h < heads; ++h) {
            const Eigen::OuterStride<> st(d);
            ConstStrided<T> qh(qv.data() + b * tq * d + h * dh, tq, dh, st);
            ConstStrided<T> kh(kv.data() + b * tk * d + h * dh, tk, dh, st);
            ConstStrided<T> vh(vv.data() + b * tk * d + h * dh, tk, dh, st);
            ConstStrided<T> doh(dz.data() + b * tq * d + h * dh, tq, dh, st);
            ConstMatrixMap<T> p(probs->data() + (b * heads + h) * tq * tk, tq, tk);
            if (gv) {
              Strided<T>(dv + b * tk * d + h * dh, tk, dh, st).noalias() +=
                  p.transpose() * doh;
            }
            if (!gq && !gk) continue;
            dp.noalias() = doh * vh.transpose();
            // dS = P * (dP - rowsum(dP * P)), already including the scale.
            for (int64_t i = 0; i < tq; ++i) {
              T dot = 0;
              for (int64_t j = 0; j < tk; ++j) dot += dp(i, j) * p(i, j);
              for (int64_t j = 0; j < tk; ++j) {
                dp(i, j) = p(i, j) * (dp(i, j) - dot) * scale;
              }
            }
            if (gq) {
              Strided<T>(dq + b * tq * d + h * dh, tq, dh, st).noalias() +=
                  dp * kh;
            }
            if (gk) {
              Strided<T>(dk + b * tk * d + h * dh, tk, dh, st).noalias() +=
                  dp.transpose() * qh;
            }
          }
        }
      });
}

#define MAMLST_INSTANTIATE_OPS(T)                                              \
  template Var<T> MatMul<T>(Var<T>, Var<T>);                                   \
  template Var<T> Transpose<T>(Var<T>);                                        \
  template Var<T> Add<T>(Var<T>, Var<T>);                                      \
  template Var<T> Mul<T>(Var<T>, Var<T>);                                      \
  template Var<T> Scale<T>(Var<T>, T);                                         \
  template Var<T> AddBias<T>(Var<T>, Var<T>);                                  \
  template Var<T> Relu<T>(Var<T>);                                             \
  template Var<T> Softmax<T>(Var<T>, int);                                     \
  template Var<T> Sum<T>(Var<T>);                                              \
  template Var<T> Reshape<T>(Var<T>, Shape);                                   \
  template Var<T> CrossEntropyLoss<T>(Var<T>, std::span<const int>,            \
                                      std::span<const uint8_t>);               \
  template Var<T> LayerNorm<T>(Var<T>, Var<T>, Var<T>, T);                     \
  template Var<T> Embedding<T>(Var<T>, std::span<const int>);                  \
  template Var<T> Dropout<T>(Var<T>, double, std::mt19937_64 &);               \
  template Var<T> Conv2dS2<T>(Var<T>, Var<T>, std::optional<Var<T>>,         \
                              const ConvOptions &);                            \
  template Var<T> Attention<T>(Var<T>, Var<T>, Var<T>, const AttentionLayout &);

MAMLST_INSTANTIATE_OPS(float)
MAMLST_INSTANTIATE_OPS(double)

#undef MAMLST_INSTANTIATE_OPS

}  // namespace mamlst
