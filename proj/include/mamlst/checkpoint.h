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

// On-disk model parameters. A checkpoint is a directory holding
// manifest.json (config, seed, step, tensor table, byte count, checksum) and
// tensors.bin: one little-endian float32 block per tensor, in key order.

#ifndef MAMLST_CHECKPOINT_H_
#define MAMLST_CHECKPOINT_H_

#include <cstdint>
#include <string>

#include "mamlst/model.h"
#include "mamlst/tensor.h"

namespace mamlst {

struct CheckpointInfo {
  ModelConfig config;
  uint64_t seed = 0;
  int64_t step = 0;
  std::string phase;  // free-form label, e.g. "MetaLearn/init"
};

struct Checkpoint {
  CheckpointInfo info;
  ParamMap<float> params;
};

// Creates dir if needed and overwrites any previous checkpoint in it.
void SaveCheckpoint(const std::string &dir, const ParamMap<float> &params,
                    const CheckpointInfo &info);

// IntegrityError on a missing, truncated or corrupt checkpoint, or when the
// tensor table disagrees with the stored config.
Checkpoint LoadCheckpoint(const std::string &dir);

// Also requires the stored config to equal expected: DimensionError naming
// the first tensor whose shape differs, ConfigError naming the first other
// differing field.
ParamMap<float> LoadCheckpoint(const std::string &dir, const ModelConfig &expected);

}  // namespace mamlst

#endif  // MAMLST_CHECKPOINT_H_
