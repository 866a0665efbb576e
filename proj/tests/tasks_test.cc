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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "mamlst/errors.h"
#include "mamlst/tasks.h"
#include "mamlst/vocab.h"

namespace mamlst {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string &name) {
  fs::path dir = fs::temp_directory_path() / ("mamlst_tasks_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST_CASE("sample_task") {
  Task asr, mt;
  asr.id = "asr";
  mt.id = "mt";
  const Task *one[] = {&asr};
  const Task *two[] = {&asr, &mt};
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(SampleTask(one, rng) == 0);

  int counts[2] = {0, 0};
  for (int i = 0; i < 10000; ++i) ++counts[SampleTask(two, rng)];
  CHECK(counts[0] >= 4700);
  CHECK(counts[0] <= 5300);
  CHECK(counts[1] >= 4700);
  CHECK(counts[1] <= 5300);

  Rng a(9), b(9);
  for (int i = 0; i < 50; ++i) CHECK(SampleTask(two, a) == SampleTask(two, b));
  CHECK_THROWS_AS(SampleTask(std::span<const Task *const>{}, rng), ContractError);
}

void CheckBatchInvariants(const Task &task, const Batch &batch,
                          std::span<const int> indices) {
  REQUIRE(batch.size == static_cast<int>(indices.size()));
  int64_t mask_count = 0;
  for (uint8_t m : batch.target_mask) mask_count += m;
  CHECK(mask_count == std::accumulate(batch.target_lengths.begin(),
                                      batch.target_lengths.end(), int64_t{0}));
  for (int b = 0; b < batch.size; ++b) {
    const Example &ex = task.examples[indices[b]];
    const int tl = batch.target_lengths[b];
    CHECK(tl == static_cast<int>(ex.target_ids.size()) + 1);
    CHECK(tl <= batch.target_len);
    CHECK(batch.source_lengths[b] <= batch.source_len);
    for (int t = 0; t < batch.target_len; ++t) {
      const int id = batch.targets[b * batch.target_len + t];
      const bool valid = batch.target_mask[b * batch.target_len + t] != 0;
      CHECK(valid == (t < tl));
      CHECK(valid == (id != Vocabulary::kPad));
      if (t + 1 < tl) CHECK(id == ex.target_ids[t]);
      if (t + 1 == tl) CHECK(id == Vocabulary::kEos);
    }
    if (task.input_modality == Modality::kTokens) {
      CHECK(batch.source_lengths[b] == static_cast<int>(ex.source_ids.size()));
      for (int t = 0; t < batch.source_len; ++t) {
        const int id = batch.source_ids[b * batch.source_len + t];
        CHECK(id == (t < batch.source_lengths[b] ? ex.source_ids[t] : Vocabulary::kPad));
      }
    } else {
      CHECK(batch.source_lengths[b] == ex.num_frames);
      CHECK(batch.frame_dim == task.frame_dim);
      const int64_t row = static_cast<int64_t>(batch.source_len) * batch.frame_dim;
      for (int64_t i = 0; i < row; ++i) {
        const float v = batch.frames[b * row + i];
        CHECK(v == (i < static_cast<int64_t>(ex.frames.size()) ? ex.frames[i] : 0.0f));
      }
    }
  }
}

TEST_CASE("batches satisfy their invariants") {
  SyntheticSpec spec;
  spec.frame_dim = 4;
  const Vocabulary vocab = SyntheticVocab(spec);
  const Task mt = GenMtTask(spec, vocab, 40, 1);
  const Task asr = GenAsrTask(spec, vocab, 40, 1);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Task &task = trial % 2 ? mt : asr;
    const int size = 1 + static_cast<int>(rng() % 9);
    std::vector<int> idx(size);
    for (int &i : idx) i = static_cast<int>(rng() % task.examples.size());
    CheckBatchInvariants(task, MakeBatch(task, idx), idx);
  }

  const std::vector<int> single = {5};
  const Batch one = MakeBatch(mt, single);
  CHECK(one.target_len == one.target_lengths[0]);
  CHECK(std::all_of(one.target_mask.begin(), one.target_mask.end(),
                    [](uint8_t m) { return m == 1; }));

  Task tiny = mt;
  tiny.examples.resize(1);
  const Batch four = SampleBatch(tiny, 4, rng);
  for (int b = 1; b < 4; ++b) {
    CHECK(std::equal(four.targets.begin(), four.targets.begin() + four.target_len,
                     four.targets.begin() + b * four.target_len));
    CHECK(std::equal(four.source_ids.begin(), four.source_ids.begin() + four.source_len,
                     four.source_ids.begin() + b * four.source_len));
  }

  Task empty = mt;
  empty.examples.clear();
  CHECK_THROWS_AS(SampleBatch(empty, 2, rng), ContractError);
  CHECK_THROWS_AS(SampleBatch(mt, 0, rng), ContractError);

  const Batch sources = MakeBatch(mt, single, /*include_targets=*/false);
  CHECK_FALSE(sources.has_targets());
}

TEST_CASE("cipher examples") {
  SyntheticSpec spec;
  spec.alphabet_size = 3;
  spec.cipher = "bca";
  CHECK(ApplyCipher(spec, "abc") == "bca");
  CHECK(ApplyCipher(spec, "ab ca") == "bc ab");
  spec.cipher = "abc";
  const Vocabulary vocab = SyntheticVocab(spec);
  for (const Example &ex : GenMtTask(spec, vocab, 20, 4).examples) {
    CHECK(ex.target_ids == ex.source_ids);
  }
  spec.cipher = "abb";
  CHECK_THROWS_AS(spec.Validate(), ContractError);

  // The drawn permutation is a bijection on the alphabet.
  SyntheticSpec drawn;
  std::vector<char> table = CipherTable(drawn);
  std::sort(table.begin(), table.end());
  CHECK(table == Alphabet(drawn));
}

TEST_CASE("generators are deterministic and compose") {
  SyntheticSpec spec;
  const Vocabulary vocab = SyntheticVocab(spec);
  const Task mt = GenMtTask(spec, vocab, 300, 8);
  const Task asr = GenAsrTask(spec, vocab, 300, 8);
  const Task st = GenStTask(spec, vocab, 300, 8);
  CHECK(mt == GenMtTask(spec, vocab, 300, 8));
  CHECK(asr == GenAsrTask(spec, vocab, 300, 8));
  CHECK_FALSE(mt == GenMtTask(spec, vocab, 300, 9));
  CHECK(st.examples.size() == 300);
  CHECK(st.role == TaskRole::kSt);
  CHECK(st.input_modality == Modality::kFrames);
  for (size_t i = 0; i < st.examples.size(); ++i) {
    const std::string transcript = vocab.Decode(asr.examples[i].target_ids);
    CHECK(vocab.Decode(st.examples[i].target_ids) == ApplyCipher(spec, transcript));
    CHECK(mt.examples[i].source_ids == asr.examples[i].target_ids);
    CHECK(mt.examples[i].target_ids == st.examples[i].target_ids);
    CHECK(asr.examples[i].num_frames ==
          static_cast<int>(transcript.size()) * spec.frames_per_token);
    for (int id : st.examples[i].target_ids) {
      CHECK(id >= Vocabulary::kNumSpecials);
      CHECK(id < vocab.size());
    }
  }
  CHECK(GenStTask(spec, vocab, spec.st_size, 1).examples.size() == 500);
}

TEST_CASE("frames at zero noise") {
  SyntheticSpec spec;
  spec.noise = 0.0;
  spec.frames_per_token = 1;
  spec.min_len = spec.max_len = 5;
  const Vocabulary vocab = SyntheticVocab(spec);
  const Task asr = GenAsrTask(spec, vocab, 10, 2);
  CHECK(asr == GenAsrTask(spec, vocab, 10, 2));
  const Task st = GenStTask(spec, vocab, 10, 2);
  for (size_t i = 0; i < asr.examples.size(); ++i) {
    const Example &ex = asr.examples[i];
    CHECK(ex.frames == st.examples[i].frames);
    const std::string text = vocab.Decode(ex.target_ids);
    REQUIRE(text.size() == 5);
    std::vector<float> expected;
    for (char c : text) {
      const auto code = AcousticCode(spec, c);
      expected.insert(expected.end(), code.begin(), code.end());
    }
    CHECK(ex.frames == expected);
  }
  spec.frames_per_token = 4;
  for (const Example &ex : GenAsrTask(spec, vocab, 3, 2).examples) {
    CHECK(ex.num_frames == 20);
    CHECK(ex.frames.size() == 20u * spec.frame_dim);
  }
}

TEST_CASE("dev split takes the tail") {
  SyntheticSpec spec;
  const Vocabulary vocab = SyntheticVocab(spec);
  const Task st = GenStTask(spec, vocab, 500, 1);
  const TaskSplit split = SplitDev(st, 0.1);
  CHECK(split.train.examples.size() == 450);
  CHECK(split.dev.examples.size() == 50);
  CHECK(split.dev.examples.front() == st.examples[450]);
  CHECK(split.train.role == TaskRole::kSt);
  CHECK_THROWS_AS(SplitDev(st, 1.0), ContractError);
}

TEST_CASE("tsv ingestion") {
  const fs::path dir = TempDir("tsv");
  const Vocabulary vocab = BuildUniversalVocab({{"abc", "xyz"}});
  {
    std::ofstream(dir / "mt.tsv") << "ab\tyz\ncab q\tx\n";
  }
  const Task mt = LoadTsvTask((dir / "mt.tsv").string(), Modality::kTokens, TaskRole::kMt, vocab);
  REQUIRE(mt.examples.size() == 2);
  CHECK(vocab.Decode(mt.examples[0].source_ids) == "ab");
  CHECK(mt.examples[1].source_ids.back() == Vocabulary::kUnk);
  CHECK(mt == LoadTsvTask((dir / "mt.tsv").string(), Modality::kTokens, TaskRole::kMt, vocab));

  {
    std::ofstream(dir / "bad.tsv") << "ab\tyz\nno tab here\n";
  }
  try {
    LoadTsvTask((dir / "bad.tsv").string(), Modality::kTokens, TaskRole::kMt, vocab);
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  FrameMatrix m{3, 2, {1, 2, 3, 4, 5, 6}};
  fs::create_directories(dir / "feats");
  WriteFrames((dir / "feats" / "u1.bin").string(), m);
  {
    std::ofstream(dir / "asr.tsv") << "feats/u1.bin\tabc\n";
    std::ofstream(dir / "missing.tsv") << "feats/u1.bin\tabc\nfeats/u2.bin\tb\n";
  }
  const Task asr = LoadTsvTask((dir / "asr.tsv").string(), Modality::kFrames, TaskRole::kAsr, vocab);
  REQUIRE(asr.examples.size() == 1);
  CHECK(asr.frame_dim == 2);
  CHECK(asr.examples[0].num_frames == 3);
  CHECK(asr.examples[0].frames == m.values);
  CHECK_THROWS_AS(LoadTsvTask((dir / "missing.tsv").string(), Modality::kFrames,
                              TaskRole::kAsr, vocab),
                  ParseError);
  CHECK_THROWS_AS(LoadTsvTask((dir / "none.tsv").string(), Modality::kTokens,
                              TaskRole::kMt, vocab),
                  ParseError);
  fs::remove_all(dir);
}

TEST_CASE("frames file roundtrip and corruption") {
  const fs::path dir = TempDir("frames");
  FrameMatrix m{2, 3, {0.5f, -1.f, 2.f, 3.25f, 1e-7f, -0.f}};
  const std::string path = (dir / "f.bin").string();
  WriteFrames(path, m);
  const FrameMatrix back = ReadFrames(path);
  CHECK(back.num_frames == 2);
  CHECK(back.frame_dim == 3);
  CHECK(back.values == m.values);
  CHECK(fs::file_size(path) == 8 + 6 * 4);
  fs::resize_file(path, 8 + 5 * 4);
  CHECK_THROWS_AS(ReadFrames(path), ParseError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace mamlst
