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

#ifndef MAMLST_TASKS_H_
#define MAMLST_TASKS_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mamlst/vocab.h"

namespace mamlst {

using Rng = std::mt19937_64;

// Independent stream seed derived from a base seed (splitmix64 finalizer).
inline uint64_t DeriveSeed(uint64_t base, uint64_t stream) {
  uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class Modality { kFrames, kTokens };
enum class TaskRole { kAsr, kMt, kSt };

std::string ModalityName(Modality m);
std::string RoleName(TaskRole r);
TaskRole ParseRole(const std::string &name);
Modality ParseModality(const std::string &name);

// One (input, target) pair. Exactly one of frames / source_ids is used,
// depending on the owning task's modality. Targets carry no BOS/EOS.
struct Example {
  std::vector<float> frames;  // [num_frames x frame_dim], row-major
  int num_frames = 0;
  std::vector<int> source_ids;
  std::vector<int> target_ids;

  friend bool operator==(const Example &, const Example &) = default;
};

struct Task {
  std::string id;
  Modality input_modality = Modality::kTokens;
  TaskRole role = TaskRole::kMt;
  int frame_dim = 0;  // 0 for token inputs
  std::vector<Example> examples;

  friend bool operator==(const Task &, const Task &) = default;
};

// Padded mini-batch. Targets end in EOS; decoder inputs are derived from them
// (BOS + targets without the last position). target_mask marks exactly the
// non-PAD target positions.
struct Batch {
  Modality modality = Modality::kTokens;
  int size = 0;
  int source_len = 0;  // padded frames (T) or tokens (S)
  int frame_dim = 0;
  std::vector<float> frames;   // [size x source_len x frame_dim]
  std::vector<int> source_ids; // [size x source_len]
  std::vector<int> source_lengths;
  int target_len = 0;
  std::vector<int> targets;    // [size x target_len]
  std::vector<int> target_lengths;
  std::vector<uint8_t> target_mask;

  bool has_targets() const { return target_len > 0; }
};

// Batch of the given example indices. With include_targets=false only the
// source side is filled (for decoding).
Batch MakeBatch(const Task &task, std::span<const int> indices,
                bool include_targets = true);

// Uniform sampling with replacement.
Batch SampleBatch(const Task &task, int size, Rng &rng);

// Index of a uniformly drawn task.
int SampleTask(std::span<const Task *const> tasks, Rng &rng);

// First examples go to train, the last round(fraction * n) to dev (at least
// one each when n >= 2).
struct TaskSplit {
  Task train;
  Task dev;
};
TaskSplit SplitDev(const Task &task, double dev_fraction);

// Desk-scale stand-in for the ASR / MT / ST corpora. Sentences are words over
// the first alphabet_size lowercase letters separated by single spaces.
// MT maps a sentence through a fixed letter permutation; ASR renders each
// character as frames_per_token copies of a fixed per-character vector plus
// Gaussian noise; ST pairs the ASR rendering with the MT mapping.
struct SyntheticSpec {
  int alphabet_size = 12;
  int min_len = 8;          // characters, spaces included
  int max_len = 16;
  int max_word_len = 3;
  double space_prob = 0.35;
  int frames_per_token = 3;
  double noise = 0.1;
  int frame_dim = 16;
  uint64_t cipher_seed = 7;
  // Explicit image of the alphabet under the cipher ("bca" maps a->b, b->c,
  // c->a). Empty means a permutation drawn from cipher_seed.
  std::string cipher;
  uint64_t acoustic_seed = 11;
  int asr_size = 10000;
  int mt_size = 10000;
  int st_size = 500;

  void Validate() const;
};

std::vector<char> Alphabet(const SyntheticSpec &spec);
// Letter permutation; cipher[i] is the image of the i-th letter.
std::vector<char> CipherTable(const SyntheticSpec &spec);
std::string ApplyCipher(const SyntheticSpec &spec, const std::string &text);
// The n sentences every generator uses for a given seed.
std::vector<std::string> GenerateSentences(const SyntheticSpec &spec, int n,
                                           uint64_t seed);
// Fixed frame vector of one character (alphabet letter or space).
std::vector<float> AcousticCode(const SyntheticSpec &spec, char c);
// Frames of a sentence; noise drawn from rng when spec.noise > 0.
std::vector<float> RenderFrames(const SyntheticSpec &spec, const std::string &text,
                                Rng &rng);

// The generators are pure functions of (spec, vocab, n, seed). The same seed
// gives the same sentences to all three, so ST targets are the MT mapping of
// the ASR transcripts and, at zero noise, ST inputs equal ASR inputs.
Task GenMtTask(const SyntheticSpec &spec, const Vocabulary &vocab, int n,
               uint64_t seed);
Task GenAsrTask(const SyntheticSpec &spec, const Vocabulary &vocab, int n,
                uint64_t seed);
Task GenStTask(const SyntheticSpec &spec, const Vocabulary &vocab, int n,
               uint64_t seed);

// Universal vocabulary covering every string the three generators can emit.
Vocabulary SyntheticVocab(const SyntheticSpec &spec);

// "source<TAB>target" per line. For frame tasks the source is a frames file
// path, relative paths resolved against the TSV's directory.
Task LoadTsvTask(const std::string &path, Modality modality, TaskRole role,
                 const Vocabulary &vocab);

// Frames file: int32 T, int32 F (little-endian), then T*F float32 values.
struct FrameMatrix {
  int num_frames = 0;
  int frame_dim = 0;
  std::vector<float> values;
};
FrameMatrix ReadFrames(const std::string &path);
void WriteFrames(const std::string &path, const FrameMatrix &frames);

}  // namespace mamlst

#endif  // MAMLST_TASKS_H_
