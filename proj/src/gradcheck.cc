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

#include "mamlst/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace mamlst {
namespace {

double Evaluate(const LossBuilder &build, const std::vector<Tensor<double>> &inputs) {
  Graph<double> g(/*track_gradients=*/false);
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto &t : inputs) leaves.push_back(g.Constant(t));
  return build(g, leaves).value().item();
}

}  // namespace

GradCheckResult FiniteDiffCheck(const LossBuilder &build,
                                std::vector<Tensor<double>> inputs, double eps,
                                const GradientTamper &tamper) {
  if (!(eps > 0.0)) throw ContractError("finite_diff_check: eps must be positive");
  std::vector<Tensor<double>> analytic;
  {
    Graph<double> g;
    std::vector<Var<double>> leaves;
    for (size_t i = 0; i < inputs.size(); ++i) {
      leaves.push_back(g.Leaf(inputs[i], "input" + std::to_string(i)));
    }
    Var<double> loss = build(g, leaves);
    g.Backward(loss);
    for (Var<double> leaf : leaves) {
      analytic.push_back(g.has_grad(leaf) ? g.grad(leaf)
                                          : Tensor<double>(leaf.shape()));
    }
  }
  if (tamper) tamper(analytic);

  GradCheckResult result;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (int64_t j = 0; j < inputs[i].size(); ++j) {
      const double saved = inputs[i][j];
      inputs[i][j] = saved + eps;
      const double up = Evaluate(build, inputs);
      inputs[i][j] = saved - eps;
      const double down = Evaluate(build, inputs);
      inputs[i][j] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_rel_error || result.input < 0) {
        result = {rel, static_cast<int>(i), j, a, numeric};
      }
    }
  }
  return result;
}

}  // namespace mamlst
