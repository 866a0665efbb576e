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

#include "mamlst/vocab.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include "mamlst/errors.h"

namespace mamlst {
namespace {

int Utf8Length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::string Escape(const std::string &token) {
  std::string out;
  for (char c : token) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Unescape(const std::string &line, int line_number) {
  std::string out;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '\\') {
      out += line[i];
      continue;
    }
    if (++i == line.size()) {
      throw ParseError("vocabulary line " + std::to_string(line_number) +
                       ": dangling escape");
    }
    switch (line[i]) {
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case 't': out += '\t'; break;
      default:
        throw ParseError("vocabulary line " + std::to_string(line_number) +
                         ": unknown escape");
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> SplitChars(std::string_view text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    size_t n = Utf8Length(static_cast<unsigned char>(text[i]));
    if (i + n > text.size()) n = 1;
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  id_to_token_ = {"<pad>", "<s>", "</s>", "<unk>"};
  for (auto &t : tokens) {
    if (t.empty()) throw ContractError("vocabulary tokens must be non-empty");
    max_token_chars_ =
        std::max(max_token_chars_, static_cast<int>(SplitChars(t).size()));
    token_to_id_.emplace(t, static_cast<int>(id_to_token_.size()));
    id_to_token_.push_back(std::move(t));
  }
}

int Vocabulary::Id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::Contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) > 0;
}

const std::string &Vocabulary::Token(int id) const {
  if (id < 0 || id >= size()) {
    throw RangeError("token id " + std::to_string(id) + " outside [0, " +
                     std::to_string(size()) + ")");
  }
  return id_to_token_[id];
}

std::vector<int> Vocabulary::Encode(std::string_view text, bool wrap) const {
  const std::vector<std::string> chars = SplitChars(text);
  std::vector<int> ids;
  ids.reserve(chars.size() + 2);
  if (wrap) ids.push_back(kBos);
  size_t i = 0;
  while (i < chars.size()) {
    const size_t longest = std::min<size_t>(max_token_chars_, chars.size() - i);
    int found = kUnk;
    size_t used = 1;
    for (size_t len = longest; len >= 1; --len) {
      std::string candidate;
      for (size_t j = 0; j < len; ++j) candidate += chars[i + j];
      auto it = token_to_id_.find(candidate);
      if (it != token_to_id_.end()) {
        found = it->second;
        used = len;
        break;
      }
    }
    ids.push_back(found);
    i += used;
  }
  if (wrap) ids.push_back(kEos);
  return ids;
}

std::string Vocabulary::Decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    const std::string &token = Token(id);
    if (id == kPad || id == kBos || id == kEos) continue;
    out += id == kUnk ? "\xEF\xBF\xBD" : token;
  }
  return out;
}

void Vocabulary::Save(const std::string &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary to " + path);
  for (const std::string &t : corpus_tokens()) out << Escape(t) << '\n';
}

Vocabulary Vocabulary::Load(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read vocabulary file " + path);
  std::vector<std::string> tokens;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    tokens.push_back(Unescape(line, number));
  }
  Vocabulary vocab(tokens);
  // Sorted order is the on-disk order; anything else means the file was
  // edited by hand and ids would silently shift.
  if (!std::equal(tokens.begin(), tokens.end(), vocab.corpus_tokens().begin(),
                  vocab.corpus_tokens().end())) {
    throw ParseError("vocabulary file " + path + " is not sorted and unique");
  }
  return vocab;
}

Vocabulary BuildUniversalVocab(
    const std::vector<std::vector<std::string>> &corpora) {
  std::set<std::string> chars;
  for (const auto &corpus : corpora) {
    for (const auto &line : corpus) {
      for (auto &c : SplitChars(line)) chars.insert(std::move(c));
    }
  }
  return Vocabulary(std::vector<std::string>(chars.begin(), chars.end()));
}

Vocabulary BuildSubwordVocab(const std::vector<std::vector<std::string>> &corpora,
                             int num_merges) {
  // Word -> frequency, words held as token sequences.
  std::map<std::vector<std::string>, long> words;
  std::set<std::string> tokens;
  for (const auto &corpus : corpora) {
    for (const auto &line : corpus) {
      std::vector<std::string> word;
      for (auto &c : SplitChars(line)) {
        tokens.insert(c);
        if (c == " ") {
          if (!word.empty()) ++words[word];
          word.clear();
        } else {
          word.push_back(std::move(c));
        }
      }
      if (!word.empty()) ++words[word];
    }
  }
  for (int round = 0; round < num_merges; ++round) {
    std::map<std::pair<std::string, std::string>, long> pairs;
    for (const auto &[word, freq] : words) {
      for (size_t i = 0; i + 1 < word.size(); ++i) pairs[{word[i], word[i + 1]}] += freq;
    }
    std::pair<std::string, std::string> best;
    long best_count = 1;
    for (const auto &[pair, count] : pairs) {
      if (count > best_count) {
        best = pair;
        best_count = count;
      }
    }
    if (best_count < 2) break;
    const std::string merged = best.first + best.second;
    tokens.insert(merged);
    std::map<std::vector<std::string>, long> next;
    for (const auto &[word, freq] : words) {
      std::vector<std::string> out;
      for (size_t i = 0; i < word.size(); ++i) {
        if (i + 1 < word.size() && word[i] == best.first &&
            word[i + 1] == best.second) {
          out.push_back(merged);
          ++i;
        } else {
          out.push_back(word[i]);
        }
      }
      next[out] += freq;
    }
    words = std::move(next);
  }
  return Vocabulary(std::vector<std::string>(tokens.begin(), tokens.end()));
}

}  // namespace mamlst
