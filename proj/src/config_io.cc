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

#include "mamlst/config_io.h"

#include <cmath>
#include <limits>

#include "mamlst/errors.h"

namespace mamlst {

JsonFields::JsonFields(const Json &object, std::string path)
    : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) throw ConfigError(path_ + ": expected an object");
}

std::string JsonFields::Path(const std::string &key) const {
  return path_.empty() ? key : path_ + "." + key;
}

const Json &JsonFields::Raw(const std::string &key) {
  seen_.insert(key);
  return object_.at(key);
}

void JsonFields::Get(const std::string &key, int *out) {
  if (!Has(key)) return;
  const Json &v = Raw(key);
  if (!v.is_number_integer()) throw ConfigError(Path(key) + ": expected an integer");
  const bool fits = v.is_number_unsigned()
                        ? v.get<uint64_t>() <= std::numeric_limits<int>::max()
                        : v.get<int64_t>() >= std::numeric_limits<int>::min() &&
                              v.get<int64_t>() <= std::numeric_limits<int>::max();
  if (!fits) throw ConfigError(Path(key) + ": integer out of range");
  const auto x = v.get<int64_t>();
  *out = static_cast<int>(x);
}

void JsonFields::Get(const std::string &key, uint64_t *out) {
  if (!Has(key)) return;
  const Json &v = Raw(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<int64_t>() < 0)) {
    throw ConfigError(Path(key) + ": expected a non-negative integer");
  }
  *out = v.get<uint64_t>();
}

void JsonFields::Get(const std::string &key, double *out) {
  if (!Has(key)) return;
  const Json &v = Raw(key);
  if (!v.is_number()) throw ConfigError(Path(key) + ": expected a number");
  *out = v.get<double>();
}

void JsonFields::Get(const std::string &key, bool *out) {
  if (!Has(key)) return;
  const Json &v = Raw(key);
  if (!v.is_boolean()) throw ConfigError(Path(key) + ": expected true or false");
  *out = v.get<bool>();
}

void JsonFields::Get(const std::string &key, std::string *out) {
  if (!Has(key)) return;
  const Json &v = Raw(key);
  if (!v.is_string()) throw ConfigError(Path(key) + ": expected a string");
  *out = v.get<std::string>();
}

void JsonFields::Finish() const {
  for (const auto &[key, value] : object_.items()) {
    if (!seen_.count(key)) throw ConfigError(Path(key) + ": unknown field");
  }
}

namespace {

template <typename Fn>
void Revalidate(const std::string &path, Fn &&validate) {
  try {
    validate();
  } catch (const std::exception &e) {
    throw ConfigError(path + ": " + e.what());
  }
}

OptimizerKind GetOptimizer(JsonFields &f, const std::string &key, OptimizerKind def) {
  std::string name = OptimizerName(def);
  f.Get(key, &name);
  try {
    return ParseOptimizer(name);
  } catch (const std::exception &) {
    throw ConfigError(f.Path(key) + ": unknown optimizer '" + name +
                      "' (expected sgd or adam)");
  }
}

}  // namespace

Json ToJson(const ModelConfig &c) {
  return Json{{"d_model", c.d_model},
              {"n_enc", c.n_enc},
              {"n_dec", c.n_dec},
              {"n_heads", c.n_heads},
              {"d_ff", c.d_ff},
              {"dropout", c.dropout},
              {"conv_layers", c.conv_layers},
              {"conv_channels", c.conv_channels},
              {"conv_activation", c.conv_activation == Activation::kRelu ? "relu" : "none"},
              {"frame_dim", c.frame_dim},
              {"vocab_size", c.vocab_size},
              {"max_len", c.max_len},
              {"tie_output", c.tie_output}};
}

// Not validated here: vocab_size and frame_dim may still be filled in from
// the data.
ModelConfig ModelConfigFromJson(const Json &j, const std::string &path) {
  ModelConfig c;
  JsonFields f(j, path);
  f.Get("d_model", &c.d_model);
  f.Get("n_enc", &c.n_enc);
  f.Get("n_dec", &c.n_dec);
  f.Get("n_heads", &c.n_heads);
  f.Get("d_ff", &c.d_ff);
  f.Get("dropout", &c.dropout);
  f.Get("conv_layers", &c.conv_layers);
  f.Get("conv_channels", &c.conv_channels);
  std::string act = "relu";
  f.Get("conv_activation", &act);
  if (act == "relu") {
    c.conv_activation = Activation::kRelu;
  } else if (act == "none") {
    c.conv_activation = Activation::kNone;
  } else {
    throw ConfigError(f.Path("conv_activation") + ": expected relu or none, got '" + act + "'");
  }
  f.Get("frame_dim", &c.frame_dim);
  f.Get("vocab_size", &c.vocab_size);
  f.Get("max_len", &c.max_len);
  f.Get("tie_output", &c.tie_output);
  f.Finish();
  return c;
}

Json ToJson(const HyperParams &h) {
  return Json{{"alpha", h.alpha},
              {"beta", h.beta},
              {"gamma", h.gamma},
              {"k", h.k},
              {"l", h.l},
              {"m_batch", h.m_batch},
              {"meta_steps", h.meta_steps},
              {"finetune_steps", h.finetune_steps},
              {"seed", h.seed},
              {"eval_every", h.eval_every},
              {"meta_optimizer", OptimizerName(h.meta_optimizer)},
              {"pretrain_optimizer", OptimizerName(h.pretrain_optimizer)},
              {"pretrain_lr", h.pretrain_lr},
              {"pretrain_batch", h.pretrain_batch},
              {"finetune_optimizer", OptimizerName(h.finetune_optimizer)},
              {"early_stopping", h.early_stopping},
              {"decode_max_len", h.decode_max_len},
              {"eval_batch", h.eval_batch}};
}

HyperParams HyperParamsFromJson(const Json &j, const std::string &path) {
  HyperParams h;
  JsonFields f(j, path);
  f.Get("alpha", &h.alpha);
  f.Get("beta", &h.beta);
  f.Get("gamma", &h.gamma);
  f.Get("k", &h.k);
  f.Get("l", &h.l);
  f.Get("m_batch", &h.m_batch);
  f.Get("meta_steps", &h.meta_steps);
  f.Get("finetune_steps", &h.finetune_steps);
  f.Get("seed", &h.seed);
  f.Get("eval_every", &h.eval_every);
  h.meta_optimizer = GetOptimizer(f, "meta_optimizer", h.meta_optimizer);
  h.pretrain_optimizer = GetOptimizer(f, "pretrain_optimizer", h.pretrain_optimizer);
  f.Get("pretrain_lr", &h.pretrain_lr);
  f.Get("pretrain_batch", &h.pretrain_batch);
  h.finetune_optimizer = GetOptimizer(f, "finetune_optimizer", h.finetune_optimizer);
  f.Get("early_stopping", &h.early_stopping);
  f.Get("decode_max_len", &h.decode_max_len);
  f.Get("eval_batch", &h.eval_batch);
  f.Finish();
  Revalidate(path, [&] { h.Validate(); });
  return h;
}

Json ToJson(const SyntheticSpec &s) {
  return Json{{"alphabet_size", s.alphabet_size},
              {"min_len", s.min_len},
              {"max_len", s.max_len},
              {"max_word_len", s.max_word_len},
              {"space_prob", s.space_prob},
              {"frames_per_token", s.frames_per_token},
              {"noise", s.noise},
              {"frame_dim", s.frame_dim},
              {"cipher_seed", s.cipher_seed},
              {"cipher", s.cipher},
              {"acoustic_seed", s.acoustic_seed},
              {"asr_size", s.asr_size},
              {"mt_size", s.mt_size},
              {"st_size", s.st_size}};
}

SyntheticSpec SyntheticSpecFromJson(const Json &j, const std::string &path) {
  SyntheticSpec s;
  JsonFields f(j, path);
  f.Get("alphabet_size", &s.alphabet_size);
  f.Get("min_len", &s.min_len);
  f.Get("max_len", &s.max_len);
  f.Get("max_word_len", &s.max_word_len);
  f.Get("space_prob", &s.space_prob);
  f.Get("frames_per_token", &s.frames_per_token);
  f.Get("noise", &s.noise);
  f.Get("frame_dim", &s.frame_dim);
  f.Get("cipher_seed", &s.cipher_seed);
  f.Get("cipher", &s.cipher);
  f.Get("acoustic_seed", &s.acoustic_seed);
  f.Get("asr_size", &s.asr_size);
  f.Get("mt_size", &s.mt_size);
  f.Get("st_size", &s.st_size);
  f.Finish();
  Revalidate(path, [&] { s.Validate(); });
  return s;
}

}  // namespace mamlst
