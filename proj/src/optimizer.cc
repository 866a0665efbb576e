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

#include "mamlst/optimizer.h"

#include <cmath>

namespace mamlst {

std::string OptimizerName(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind ParseOptimizer(const std::string &name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ContractError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

namespace {

template <typename T>
void CheckGradKeys(const ParamMap<T> &params, const GradMap<T> &grads) {
  for (const auto &[name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) {
      throw ContractError("gradient for unknown parameter " + name);
    }
    if (it->second.shape() != g.shape()) {
      throw DimensionError("gradient for " + name + " has shape " +
                           ShapeString(g.shape()) + ", parameter has " +
                           ShapeString(it->second.shape()));
    }
  }
}

}  // namespace

template <typename T>
void OptimizerStep(ParamMap<T> &params, const GradMap<T> &grads,
                   OptimizerState<T> &state, double lr) {
  CheckGradKeys(params, grads);
  ++state.step;
  if (state.kind == OptimizerKind::kSgd) {
    const T rate = static_cast<T>(lr);
    for (const auto &[name, g] : grads) {
      Tensor<T> &p = params.at(name);
      for (int64_t i = 0; i < p.size(); ++i) p[i] -= rate * g[i];
    }
    return;
  }
  if (state.first_moment.empty()) {
    for (const auto &[name, p] : params) {
      state.first_moment.emplace(name, Tensor<T>(p.shape()));
      state.second_moment.emplace(name, Tensor<T>(p.shape()));
    }
  }
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T step_size = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(state.epsilon);
  for (const auto &[name, g] : grads) {
    Tensor<T> &p = params.at(name);
    Tensor<T> &m = state.first_moment.at(name);
    Tensor<T> &v = state.second_moment.at(name);
    for (int64_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      p[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

template <typename T>
ParamMap<T> SgdUpdated(const ParamMap<T> &params, const GradMap<T> &grads,
                       double lr) {
  CheckGradKeys(params, grads);
  ParamMap<T> out = params;
  const T rate = static_cast<T>(lr);
  for (const auto &[name, g] : grads) {
    Tensor<T> &p = out.at(name);
    for (int64_t i = 0; i < p.size(); ++i) p[i] -= rate * g[i];
  }
  return out;
}

template void OptimizerStep<float>(ParamMap<float> &, const GradMap<float> &,
                                   OptimizerState<float> &, double);
template void OptimizerStep<double>(ParamMap<double> &, const GradMap<double> &,
                                    OptimizerState<double> &, double);
template ParamMap<float> SgdUpdated<float>(const ParamMap<float> &,
                                           const GradMap<float> &, double);
template ParamMap<double> SgdUpdated<double>(const ParamMap<double> &,
                                             const GradMap<double> &, double);

}  // namespace mamlst
