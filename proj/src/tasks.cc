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

#include "mamlst/tasks.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mamlst/errors.h"

namespace mamlst {

std::string ModalityName(Modality m) {
  return m == Modality::kFrames ? "frames" : "tokens";
}

std::string RoleName(TaskRole r) {
  switch (r) {
    case TaskRole::kAsr: return "asr";
    case TaskRole::kMt: return "mt";
    case TaskRole::kSt: return "st";
  }
  return "?";
}

TaskRole ParseRole(const std::string &name) {
  if (name == "asr") return TaskRole::kAsr;
  if (name == "mt") return TaskRole::kMt;
  if (name == "st") return TaskRole::kSt;
  throw ContractError("unknown task role '" + name + "'");
}

Modality ParseModality(const std::string &name) {
  if (name == "frames") return Modality::kFrames;
  if (name == "tokens") return Modality::kTokens;
  throw ContractError("unknown modality '" + name + "'");
}

Batch MakeBatch(const Task &task, std::span<const int> indices,
                bool include_targets) {
  if (indices.empty()) throw ContractError("batch needs at least one example");
  Batch b;
  b.modality = task.input_modality;
  b.size = static_cast<int>(indices.size());
  b.frame_dim = task.input_modality == Modality::kFrames ? task.frame_dim : 0;
  for (int i : indices) {
    if (i < 0 || i >= static_cast<int>(task.examples.size())) {
      throw RangeError("example index " + std::to_string(i) + " outside task " +
                       task.id);
    }
    const Example &ex = task.examples[i];
    const int len = b.modality == Modality::kFrames
                        ? ex.num_frames
                        : static_cast<int>(ex.source_ids.size());
    if (len < 1) throw ContractError("empty source in task " + task.id);
    b.source_lengths.push_back(len);
    b.source_len = std::max(b.source_len, len);
    if (include_targets) {
      const int tlen = static_cast<int>(ex.target_ids.size()) + 1;
      b.target_lengths.push_back(tlen);
      b.target_len = std::max(b.target_len, tlen);
    }
  }
  if (b.modality == Modality::kFrames) {
    b.frames.assign(static_cast<size_t>(b.size) * b.source_len * b.frame_dim, 0.f);
  } else {
    b.source_ids.assign(static_cast<size_t>(b.size) * b.source_len,
                        Vocabulary::kPad);
  }
  if (include_targets) {
    b.targets.assign(static_cast<size_t>(b.size) * b.target_len, Vocabulary::kPad);
    b.target_mask.assign(b.targets.size(), 0);
  }
  for (int r = 0; r < b.size; ++r) {
    const Example &ex = task.examples[indices[r]];
    if (b.modality == Modality::kFrames) {
      std::copy(ex.frames.begin(), ex.frames.end(),
                b.frames.begin() + static_cast<size_t>(r) * b.source_len * b.frame_dim);
    } else {
      std::copy(ex.source_ids.begin(), ex.source_ids.end(),
                b.source_ids.begin() + static_cast<size_t>(r) * b.source_len);
    }
    if (!include_targets) continue;
    int *row = b.targets.data() + static_cast<size_t>(r) * b.target_len;
    std::copy(ex.target_ids.begin(), ex.target_ids.end(), row);
    row[ex.target_ids.size()] = Vocabulary::kEos;
    std::fill_n(b.target_mask.begin() + static_cast<size_t>(r) * b.target_len,
                b.target_lengths[r], 1);
  }
  return b;
}

Batch SampleBatch(const Task &task, int size, Rng &rng) {
  if (size < 1) throw ContractError("batch size must be at least 1");
  if (task.examples.empty()) {
    throw ContractError("cannot sample from empty task " + task.id);
  }
  std::uniform_int_distribution<int> pick(
      0, static_cast<int>(task.examples.size()) - 1);
  std::vector<int> indices(size);
  for (int &i : indices) i = pick(rng);
  return MakeBatch(task, indices);
}

int SampleTask(std::span<const Task *const> tasks, Rng &rng) {
  if (tasks.empty()) throw ContractError("cannot sample from an empty task set");
  // Exactly one engine draw, even for a single task, so trainers that share a
  // stream stay in lockstep regardless of how many tasks they sample from.
  // The modulo bias is below n / 2^64.
  return static_cast<int>(rng() % tasks.size());
}

TaskSplit SplitDev(const Task &task, double dev_fraction) {
  if (dev_fraction < 0.0 || dev_fraction >= 1.0) {
    throw ContractError("dev fraction must lie in [0, 1)");
  }
  const int n = static_cast<int>(task.examples.size());
  int n_dev = static_cast<int>(std::lround(dev_fraction * n));
  if (dev_fraction > 0.0 && n >= 2) n_dev = std::clamp(n_dev, 1, n - 1);
  TaskSplit split{task, task};
  split.train.id = task.id + "/train";
  split.dev.id = task.id + "/dev";
  split.train.examples.assign(task.examples.begin(), task.examples.end() - n_dev);
  split.dev.examples.assign(task.examples.end() - n_dev, task.examples.end());
  return split;
}

void SyntheticSpec::Validate() const {
  auto require = [](bool ok, const std::string &what) {
    if (!ok) throw ContractError("synthetic spec: " + what);
  };
  require(alphabet_size >= 2 && alphabet_size <= 26, "alphabet_size must be in [2, 26]");
  require(min_len >= 1, "min_len must be >= 1");
  require(max_len >= min_len, "max_len must be >= min_len");
  require(max_word_len >= 1, "max_word_len must be >= 1");
  require(space_prob >= 0.0 && space_prob <= 1.0, "space_prob must be in [0, 1]");
  require(frames_per_token >= 1, "frames_per_token must be >= 1");
  require(noise >= 0.0, "noise must be >= 0");
  require(frame_dim >= 1, "frame_dim must be >= 1");
  require(asr_size >= 1 && mt_size >= 1 && st_size >= 1, "dataset sizes must be >= 1");
  if (!cipher.empty()) {
    std::string sorted = cipher;
    std::sort(sorted.begin(), sorted.end());
    const std::vector<char> letters = Alphabet(*this);
    require(sorted == std::string(letters.begin(), letters.end()),
            "cipher must be a permutation of the first alphabet_size letters");
  }
}

std::vector<char> Alphabet(const SyntheticSpec &spec) {
  std::vector<char> letters(spec.alphabet_size);
  std::iota(letters.begin(), letters.end(), 'a');
  return letters;
}

std::vector<char> CipherTable(const SyntheticSpec &spec) {
  if (!spec.cipher.empty()) {
    spec.Validate();
    return std::vector<char>(spec.cipher.begin(), spec.cipher.end());
  }
  std::vector<char> table = Alphabet(spec);
  Rng rng(DeriveSeed(spec.cipher_seed, 0));
  // Explicit Fisher-Yates: std::shuffle's draw pattern is library-specific.
  for (int i = static_cast<int>(table.size()) - 1; i > 0; --i) {
    std::swap(table[i], table[rng() % (i + 1)]);
  }
  return table;
}

std::string ApplyCipher(const SyntheticSpec &spec, const std::string &text) {
  const std::vector<char> table = CipherTable(spec);
  std::string out = text;
  for (char &c : out) {
    const int i = c - 'a';
    if (i >= 0 && i < spec.alphabet_size) c = table[i];
  }
  return out;
}

std::vector<std::string> GenerateSentences(const SyntheticSpec &spec, int n,
                                           uint64_t seed) {
  spec.Validate();
  Rng rng(DeriveSeed(seed, 1));
  std::uniform_int_distribution<int> length(spec.min_len, spec.max_len);
  std::uniform_int_distribution<int> letter(0, spec.alphabet_size - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::string> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int len = length(rng);
    std::string s;
    int word = 0;
    for (int j = 0; j < len; ++j) {
      const bool edge = j == 0 || j == len - 1 || s.back() == ' ';
      const bool space = !edge && (word >= spec.max_word_len || coin(rng) < spec.space_prob);
      if (space) {
        s += ' ';
        word = 0;
      } else {
        s += static_cast<char>('a' + letter(rng));
        ++word;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<float> AcousticCode(const SyntheticSpec &spec, char c) {
  // Slot 0 is the space; letters follow.
  const int slot = c == ' ' ? 0 : 1 + (c - 'a');
  if (slot < 0 || slot > spec.alphabet_size) {
    throw RangeError(std::string("no acoustic code for character '") + c + "'");
  }
  Rng rng(DeriveSeed(spec.acoustic_seed, static_cast<uint64_t>(slot)));
  std::normal_distribution<float> dist(0.f, 1.f);
  std::vector<float> code(spec.frame_dim);
  for (float &v : code) v = dist(rng);
  return code;
}

std::vector<float> RenderFrames(const SyntheticSpec &spec, const std::string &text,
                                Rng &rng) {
  std::vector<std::vector<float>> codes(spec.alphabet_size + 1);
  std::normal_distribution<float> noise(0.f, static_cast<float>(spec.noise));
  std::vector<float> frames;
  frames.reserve(text.size() * spec.frames_per_token * spec.frame_dim);
  for (char c : text) {
    const int slot = c == ' ' ? 0 : 1 + (c - 'a');
    if (slot < 0 || slot > spec.alphabet_size) {
      throw RangeError(std::string("no acoustic code for character '") + c + "'");
    }
    if (codes[slot].empty()) codes[slot] = AcousticCode(spec, c);
    for (int r = 0; r < spec.frames_per_token; ++r) {
      for (float v : codes[slot]) {
        frames.push_back(spec.noise > 0.0 ? v + noise(rng) : v);
      }
    }
  }
  return frames;
}

namespace {

Task FrameTask(const SyntheticSpec &spec, const Vocabulary &vocab, int n,
               uint64_t seed, bool translate) {
  if (n < 1) throw ContractError("dataset size must be at least 1");
  Task task;
  task.id = translate ? "st" : "asr";
  task.role = translate ? TaskRole::kSt : TaskRole::kAsr;
  task.input_modality = Modality::kFrames;
  task.frame_dim = spec.frame_dim;
  Rng noise_rng(DeriveSeed(seed, 2));
  for (const std::string &s : GenerateSentences(spec, n, seed)) {
    Example ex;
    ex.frames = RenderFrames(spec, s, noise_rng);
    ex.num_frames = static_cast<int>(s.size()) * spec.frames_per_token;
    ex.target_ids = vocab.Encode(translate ? ApplyCipher(spec, s) : s);
    task.examples.push_back(std::move(ex));
  }
  return task;
}

}  // namespace

Task GenMtTask(const SyntheticSpec &spec, const Vocabulary &vocab, int n,
               uint64_t seed) {
  if (n < 1) throw ContractError("dataset size must be at least 1");
  Task task;
  task.id = "mt";
  task.role = TaskRole::kMt;
  task.input_modality = Modality::kTokens;
  for (const std::string &s : GenerateSentences(spec, n, seed)) {
    Example ex;
    ex.source_ids = vocab.Encode(s);
    ex.target_ids = vocab.Encode(ApplyCipher(spec, s));
    task.examples.push_back(std::move(ex));
  }
  return task;
}

Task GenAsrTask(const SyntheticSpec &spec, const Vocabulary &vocab, int n,
                uint64_t seed) {
  return FrameTask(spec, vocab, n, seed, /*translate=*/false);
}

Task GenStTask(const SyntheticSpec &spec, const Vocabulary &vocab, int n,
               uint64_t seed) {
  return FrameTask(spec, vocab, n, seed, /*translate=*/true);
}

Vocabulary SyntheticVocab(const SyntheticSpec &spec) {
  std::string letters(spec.alphabet_size, ' ');
  for (int i = 0; i < spec.alphabet_size; ++i) letters[i] = static_cast<char>('a' + i);
  return BuildUniversalVocab({{letters, " "}, {ApplyCipher(spec, letters)}});
}

namespace {

uint32_t ReadU32(std::istream &in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char *>(b), 4)) throw ParseError("short read");
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void WriteU32(std::ostream &out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char *>(b), 4);
}

}  // namespace

FrameMatrix ReadFrames(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("missing frames file " + path);
  FrameMatrix m;
  try {
    m.num_frames = static_cast<int32_t>(ReadU32(in));
    m.frame_dim = static_cast<int32_t>(ReadU32(in));
    if (m.num_frames < 1 || m.frame_dim < 1) {
      throw ParseError("non-positive extents");
    }
    m.values.resize(static_cast<size_t>(m.num_frames) * m.frame_dim);
    for (float &v : m.values) {
      const uint32_t bits = ReadU32(in);
      std::memcpy(&v, &bits, 4);
    }
  } catch (const ParseError &e) {
    throw ParseError("frames file " + path + ": " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError("frames file " + path + ": trailing bytes");
  }
  return m;
}

void WriteFrames(const std::string &path, const FrameMatrix &frames) {
  if (static_cast<size_t>(frames.num_frames) * frames.frame_dim != frames.values.size()) {
    throw DimensionError("frame matrix size does not match its extents");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write frames file " + path);
  WriteU32(out, static_cast<uint32_t>(frames.num_frames));
  WriteU32(out, static_cast<uint32_t>(frames.frame_dim));
  for (float v : frames.values) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    WriteU32(out, bits);
  }
}

Task LoadTsvTask(const std::string &path, Modality modality, TaskRole role,
                 const Vocabulary &vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  Task task;
  task.id = std::filesystem::path(path).stem().string();
  task.role = role;
  task.input_modality = modality;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path + ": line " + std::to_string(number) + ": no TAB separator");
    }
    const std::string source = line.substr(0, tab);
    const std::string target = line.substr(tab + 1);
    Example ex;
    ex.target_ids = vocab.Encode(target);
    if (modality == Modality::kTokens) {
      if (source.empty()) {
        throw ParseError(path + ": line " + std::to_string(number) + ": empty source");
      }
      ex.source_ids = vocab.Encode(source);
    } else {
      std::filesystem::path fp(source);
      if (fp.is_relative()) fp = base / fp;
      if (!std::filesystem::exists(fp)) {
        throw ParseError(path + ": line " + std::to_string(number) +
                         ": missing frames file " + fp.string());
      }
      FrameMatrix m = ReadFrames(fp.string());
      if (task.frame_dim == 0) task.frame_dim = m.frame_dim;
      if (m.frame_dim != task.frame_dim) {
        throw ParseError(path + ": line " + std::to_string(number) +
                         ": frame width " + std::to_string(m.frame_dim) +
                         " differs from " + std::to_string(task.frame_dim));
      }
      ex.num_frames = m.num_frames;
      ex.frames = std::move(m.values);
    }
    task.examples.push_back(std::move(ex));
  }
  return task;
}

}  // namespace mamlst
