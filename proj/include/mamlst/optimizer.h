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

#ifndef MAMLST_OPTIMIZER_H_
#define MAMLST_OPTIMIZER_H_

#include <cstdint>
#include <string>

#include "mamlst/tensor.h"

namespace mamlst {

enum class OptimizerKind { kSgd, kAdam };

std::string OptimizerName(OptimizerKind kind);
OptimizerKind ParseOptimizer(const std::string &name);

template <typename T>
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kSgd;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  int64_t step = 0;
  // Adam moments, keyed like the parameter map. Created on the first step.
  ParamMap<T> first_moment;
  ParamMap<T> second_moment;
};

// Applies one update in place. Parameters without an entry in grads are left
// untouched, moments included.
//   sgd:  p -= lr * g
//   adam: bias-corrected first/second moments.
template <typename T>
void OptimizerStep(ParamMap<T> &params, const GradMap<T> &grads,
                   OptimizerState<T> &state, double lr);

// p - lr * g as a fresh map; params itself is not modified.
template <typename T>
ParamMap<T> SgdUpdated(const ParamMap<T> &params, const GradMap<T> &grads,
                       double lr);

}  // namespace mamlst

#endif  // MAMLST_OPTIMIZER_H_
