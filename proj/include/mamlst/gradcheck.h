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

#ifndef MAMLST_GRADCHECK_H_
#define MAMLST_GRADCHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "mamlst/graph.h"

namespace mamlst {

// Builds a scalar loss on g from leaf handles, one per checked input.
using LossBuilder =
    std::function<Var<double>(Graph<double> &g, const std::vector<Var<double>> &)>;

// Optional hook that edits the analytic gradients before comparison.
using GradientTamper = std::function<void(std::vector<Tensor<double>> &)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  // Location of the worst element.
  int input = -1;
  int64_t index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares backward's gradient of the built loss against central differences
// (f(x+eps) - f(x-eps)) / 2eps, element by element, over every input.
// Relative error uses max(|a|, |b|, 1e-8) as denominator.
GradCheckResult FiniteDiffCheck(const LossBuilder &build,
                                std::vector<Tensor<double>> inputs,
                                double eps = 1e-4,
                                const GradientTamper &tamper = {});

}  // namespace mamlst

#endif  // MAMLST_GRADCHECK_H_
