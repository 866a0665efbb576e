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

#include "mamlst/checkpoint.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mamlst/config_io.h"
#include "mamlst/errors.h"

namespace mamlst {
namespace {

namespace fs = std::filesystem;

constexpr char kManifest[] = "manifest.json";
constexpr char kData[] = "tensors.bin";
constexpr char kFormat[] = "mamlst-checkpoint";
constexpr int kVersion = 1;

std::string Fnv1a64(const std::string &bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

void AppendLe(std::string &out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float ReadLe(const unsigned char *p) {
  uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(p[i]) << (8 * i);
  float v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string ReadFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void WriteFile(const fs::path &path, const std::string &bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

void SaveCheckpoint(const std::string &dir, const ParamMap<float> &params,
                    const CheckpointInfo &info) {
  std::string data;
  Json table = Json::array();
  int64_t offset = 0;
  for (const auto &[name, tensor] : params) {  // std::map: sorted keys
    for (float v : tensor.values()) AppendLe(data, v);
    table.push_back(Json{{"name", name},
                         {"shape", tensor.shape()},
                         {"offset", offset},
                         {"count", tensor.size()}});
    offset += tensor.size() * 4;
  }
  const Json manifest{{"format", kFormat},
                      {"version", kVersion},
                      {"config", ToJson(info.config)},
                      {"seed", info.seed},
                      {"step", info.step},
                      {"phase", info.phase},
                      {"data_file", kData},
                      {"data_bytes", data.size()},
                      {"checksum", Fnv1a64(data)},
                      {"tensors", table}};
  fs::create_directories(dir);
  WriteFile(fs::path(dir) / kData, data);
  WriteFile(fs::path(dir) / kManifest, manifest.dump(2) + "\n");
}

Checkpoint LoadCheckpoint(const std::string &dir) {
  const fs::path manifest_path = fs::path(dir) / kManifest;
  Json manifest;
  try {
    manifest = Json::parse(ReadFile(manifest_path));
  } catch (const Json::exception &e) {
    throw IntegrityError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  Checkpoint ckpt;
  int64_t data_bytes = 0;
  std::string checksum;
  try {
    if (manifest.at("format") != kFormat || manifest.at("version") != kVersion) {
      throw IntegrityError(manifest_path.string() + ": unsupported format");
    }
    ckpt.info.config = ModelConfigFromJson(manifest.at("config"), "config");
    ckpt.info.seed = manifest.at("seed").get<uint64_t>();
    ckpt.info.step = manifest.at("step").get<int64_t>();
    ckpt.info.phase = manifest.at("phase").get<std::string>();
    data_bytes = manifest.at("data_bytes").get<int64_t>();
    checksum = manifest.at("checksum").get<std::string>();
  } catch (const Json::exception &e) {
    throw IntegrityError(manifest_path.string() + ": " + e.what());
  } catch (const ConfigError &e) {
    throw IntegrityError(manifest_path.string() + ": " + e.what());
  }

  const std::string data = ReadFile(fs::path(dir) / kData);
  if (static_cast<int64_t>(data.size()) != data_bytes) {
    throw IntegrityError(dir + ": tensor data is " + std::to_string(data.size()) +
                         " bytes, manifest says " + std::to_string(data_bytes));
  }
  if (Fnv1a64(data) != checksum) throw IntegrityError(dir + ": tensor data checksum mismatch");

  const auto expected_shapes = ParamShapes(ckpt.info.config);
  const Json &table = manifest.at("tensors");
  if (!table.is_array() || table.size() != expected_shapes.size()) {
    throw IntegrityError(dir + ": tensor table does not match the stored config");
  }
  int64_t offset = 0;
  const auto *bytes = reinterpret_cast<const unsigned char *>(data.data());
  for (size_t i = 0; i < table.size(); ++i) {
    const auto &[name, shape] = expected_shapes[i];
    std::string stored_name;
    Shape stored_shape;
    int64_t stored_offset = 0, count = 0;
    try {
      stored_name = table[i].at("name").get<std::string>();
      stored_shape = table[i].at("shape").get<Shape>();
      stored_offset = table[i].at("offset").get<int64_t>();
      count = table[i].at("count").get<int64_t>();
    } catch (const Json::exception &e) {
      throw IntegrityError(dir + ": tensor entry " + std::to_string(i) + ": " + e.what());
    }
    if (stored_name != name || stored_shape != shape) {
      throw IntegrityError(dir + ": tensor '" + stored_name + "' " +
                           ShapeString(stored_shape) +
                           " disagrees with the stored config (expected '" + name +
                           "' " + ShapeString(shape) + ")");
    }
    if (stored_offset != offset || count != ShapeSize(shape) ||
        offset + count * 4 > data_bytes) {
      throw IntegrityError(dir + ": bad extent for tensor '" + name + "'");
    }
    std::vector<float> values(count);
    for (int64_t j = 0; j < count; ++j) values[j] = ReadLe(bytes + offset + 4 * j);
    ckpt.params.emplace(name, Tensor<float>(shape, std::move(values)));
    offset += count * 4;
  }
  if (offset != data_bytes) throw IntegrityError(dir + ": trailing tensor data");
  return ckpt;
}

ParamMap<float> LoadCheckpoint(const std::string &dir, const ModelConfig &expected) {
  Checkpoint ckpt = LoadCheckpoint(dir);
  const auto shapes = ParamShapes(expected);
  for (const auto &[name, shape] : shapes) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end()) {
      throw DimensionError(dir + ": checkpoint has no tensor '" + name + "'");
    }
    if (it->second.shape() != shape) {
      throw DimensionError(dir + ": tensor '" + name + "' has shape " +
                           ShapeString(it->second.shape()) + " but the config expects " +
                           ShapeString(shape));
    }
  }
  for (const auto &[name, tensor] : ckpt.params) {
    const bool known = std::any_of(shapes.begin(), shapes.end(),
                                   [&](const auto &entry) { return entry.first == name; });
    if (!known) throw DimensionError(dir + ": tensor '" + name + "' is not part of the config");
  }
  if (!(ckpt.info.config == expected)) {
    const Json stored = ToJson(ckpt.info.config), want = ToJson(expected);
    for (const auto &[key, value] : want.items()) {
      if (stored.at(key) != value) {
        throw ConfigError(dir + ": checkpoint config field '" + key + "' is " +
                          stored.at(key).dump() + ", expected " + value.dump());
      }
    }
    throw ConfigError(dir + ": checkpoint config differs");
  }
  return std::move(ckpt.params);
}

}  // namespace mamlst
