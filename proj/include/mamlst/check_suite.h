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

// Fixed battery of finite-difference checks: every differentiable primitive
// on small random inputs, then the full model loss on a tiny configuration.

#ifndef MAMLST_CHECK_SUITE_H_
#define MAMLST_CHECK_SUITE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mamlst/gradcheck.h"
#include "mamlst/model.h"

namespace mamlst {

struct NamedCheck {
  std::string name;
  GradCheckResult result;
};

// Central differences of model_loss with respect to every parameter element,
// against ModelLossAndGrads. Evaluation mode (no dropout). Relative error as
// in FiniteDiffCheck.
GradCheckResult ModelGradCheck(const ModelConfig &config, const ParamMap<double> &params,
                               const Batch &batch, Modality modality, double eps = 1e-4);

// d_model=8, one encoder and one decoder layer, two heads.
ModelConfig TinyCheckConfig(int vocab_size);

std::vector<NamedCheck> GradCheckSuite(uint64_t seed = 1);

}  // namespace mamlst

#endif  // MAMLST_CHECK_SUITE_H_
