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

// JSON form of the model, training and synthetic-data configurations. Readers
// are strict: unknown keys and wrongly typed values raise ConfigError naming
// the offending field by its dotted path. Missing keys keep their defaults.

#ifndef MAMLST_CONFIG_IO_H_
#define MAMLST_CONFIG_IO_H_

#include <set>
#include <string>

#include "json.hpp"
#include "mamlst/meta.h"
#include "mamlst/model.h"
#include "mamlst/tasks.h"

namespace mamlst {

using Json = nlohmann::json;

Json ToJson(const ModelConfig &config);
Json ToJson(const HyperParams &hyper);
Json ToJson(const SyntheticSpec &spec);

// Each reader overlays the given object onto defaults. The hyper and synthetic
// readers validate the result; model configs are validated by the caller once
// the data has fixed vocab_size and frame_dim. path prefixes error messages.
ModelConfig ModelConfigFromJson(const Json &j, const std::string &path = "model");
HyperParams HyperParamsFromJson(const Json &j, const std::string &path = "hyper");
SyntheticSpec SyntheticSpecFromJson(const Json &j, const std::string &path = "synthetic");

// Object reader with field-level errors.
class JsonFields {
 public:
  JsonFields(const Json &object, std::string path);

  bool Has(const std::string &key) const { return object_.contains(key); }
  const Json &Raw(const std::string &key);
  std::string Path(const std::string &key) const;

  void Get(const std::string &key, int *out);
  void Get(const std::string &key, uint64_t *out);
  void Get(const std::string &key, double *out);
  void Get(const std::string &key, bool *out);
  void Get(const std::string &key, std::string *out);

  // Throws on any key that was never read.
  void Finish() const;

 private:
  const Json &object_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace mamlst

#endif  // MAMLST_CONFIG_IO_H_
