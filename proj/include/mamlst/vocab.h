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

#ifndef MAMLST_VOCAB_H_
#define MAMLST_VOCAB_H_

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mamlst {

// Splits UTF-8 text into code points, each returned as its own string.
// Invalid bytes are passed through one at a time.
std::vector<std::string> SplitChars(std::string_view text);

// Shared symbol inventory. Ids 0-3 are reserved for PAD, BOS, EOS and UNK;
// corpus tokens follow in lexicographic order. Immutable once built.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecials = 4;

  // Specials only.
  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}
  // Corpus tokens are sorted and deduplicated; empty tokens are rejected.
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(id_to_token_.size()); }
  // Id of a corpus token, or kUnk.
  int Id(std::string_view token) const;
  bool Contains(std::string_view token) const;
  const std::string &Token(int id) const;
  std::span<const std::string> corpus_tokens() const {
    return std::span<const std::string>(id_to_token_).subspan(kNumSpecials);
  }

  // Greedy longest-match segmentation; characters that no token covers become
  // UNK. For a character vocabulary this is one id per character, spaces
  // included. wrap adds BOS/EOS.
  std::vector<int> Encode(std::string_view text, bool wrap = false) const;

  // Concatenates tokens, dropping PAD/BOS/EOS and rendering UNK as U+FFFD.
  // Throws RangeError on ids outside [0, size()).
  std::string Decode(std::span<const int> ids) const;

  // One escaped token per line; line k holds id k + kNumSpecials.
  void Save(const std::string &path) const;
  static Vocabulary Load(const std::string &path);

  friend bool operator==(const Vocabulary &a, const Vocabulary &b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  int max_token_chars_ = 1;
};

// Every distinct character across all corpora (space included).
Vocabulary BuildUniversalVocab(
    const std::vector<std::vector<std::string>> &corpora);

// Characters plus up to num_merges greedy pair merges inside words. Each
// round merges the most frequent adjacent pair (ties: smallest pair first);
// stops early when no pair occurs twice.
Vocabulary BuildSubwordVocab(const std::vector<std::vector<std::string>> &corpora,
                             int num_merges);

}  // namespace mamlst

#endif  // MAMLST_VOCAB_H_
