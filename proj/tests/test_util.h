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

#ifndef MAMLST_TESTS_TEST_UTIL_H_
#define MAMLST_TESTS_TEST_UTIL_H_

#include <random>

#include "mamlst/ops.h"
#include "mamlst/tensor.h"

namespace mamlst::testing {

inline Tensor<double> RandomTensor(const Shape &shape, std::mt19937_64 &rng,
                                   double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor<double> t(shape);
  for (double &v : t.storage()) v = dist(rng);
  return t;
}

// Contracts an op output with fixed random weights so every output element
// contributes a distinct amount to the scalar being checked.
inline Var<double> WeightedSum(Var<double> x, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor<double> w = RandomTensor(x.shape(), rng);
  return Sum(Mul(x, x.graph->Constant(std::move(w))));
}

}  // namespace mamlst::testing

#endif  // MAMLST_TESTS_TEST_UTIL_H_
