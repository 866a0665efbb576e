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
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "mamlst/errors.h"
#include "mamlst/metrics.h"
#include "mamlst/vocab.h"

namespace mamlst {
namespace {

using Corpus = std::vector<std::string>;

// --- Brute-force references, written independently of the library. ---

std::vector<std::string> Words(const std::string &s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + " ") {
    if (c == ' ' || c == '\t' || c == '\n') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

std::vector<std::vector<std::string>> Grams(const std::vector<std::string> &w, size_t n) {
  std::vector<std::vector<std::string>> out;
  for (size_t i = 0; i + n <= w.size(); ++i) {
    out.emplace_back(w.begin() + i, w.begin() + i + n);
  }
  return out;
}

double NaiveBleu(const Corpus &hyps, const Corpus &refs) {
  double hyp_len = 0, ref_len = 0;
  double matched[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
  for (size_t s = 0; s < hyps.size(); ++s) {
    const auto h = Words(hyps[s]), r = Words(refs[s]);
    hyp_len += h.size();
    ref_len += r.size();
    for (size_t n = 1; n <= 4; ++n) {
      const auto hg = Grams(h, n);
      auto rg = Grams(r, n);
      total[n - 1] += hg.size();
      // Clipping by consuming reference occurrences one at a time.
      for (const auto &g : hg) {
        auto it = std::find(rg.begin(), rg.end(), g);
        if (it != rg.end()) {
          matched[n - 1] += 1;
          rg.erase(it);
        }
      }
    }
  }
  double log_p = 0;
  for (int n = 0; n < 4; ++n) {
    if (total[n] == 0 || matched[n] == 0) return 0.0;
    log_p += std::log(matched[n] / total[n]) / 4.0;
  }
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return 100.0 * bp * std::exp(log_p);
}

double NaiveWer(const Corpus &hyps, const Corpus &refs) {
  double edits = 0, words = 0;
  for (size_t s = 0; s < hyps.size(); ++s) {
    const auto h = Words(hyps[s]), r = Words(refs[s]);
    std::vector<std::vector<int>> d(h.size() + 1, std::vector<int>(r.size() + 1));
    for (size_t i = 0; i <= h.size(); ++i) d[i][0] = static_cast<int>(i);
    for (size_t j = 0; j <= r.size(); ++j) d[0][j] = static_cast<int>(j);
    for (size_t i = 1; i <= h.size(); ++i) {
      for (size_t j = 1; j <= r.size(); ++j) {
        d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                            d[i - 1][j - 1] + (h[i - 1] == r[j - 1] ? 0 : 1)});
      }
    }
    edits += d[h.size()][r.size()];
    words += r.size();
  }
  return edits / words;
}

TEST_CASE("bleu hand cases") {
  const Corpus same = {"the cat sat on the mat", "a b c d e"};
  CHECK(Bleu4(same, same).bleu == doctest::Approx(100.0));

  const Corpus hyp = {"a b c d"}, ref = {"a b c d e"};
  const EvalReport r = Bleu4(hyp, ref);
  for (double p : r.precisions) CHECK(p == 1.0);
  CHECK(r.brevity_penalty == doctest::Approx(std::exp(-0.25)));
  CHECK(std::abs(r.bleu - 77.88) < 0.01);
  CHECK(r.hyp_words == 4);
  CHECK(r.ref_words == 5);

  const Corpus no4 = {"a b c x d"};
  const Corpus ref4 = {"a b c y d"};
  CHECK(Bleu4(no4, ref4).bleu == 0.0);

  // Clipping: repeated hypothesis words only count as often as in the reference.
  const Corpus rep = {"the the the the"}, one = {"the cat"};
  CHECK(Bleu4(rep, one).precisions[0] == doctest::Approx(0.25));

  CHECK_THROWS_AS(Bleu4(Corpus{}, Corpus{}), ContractError);
  CHECK_THROWS_AS(Bleu4(Corpus{"a"}, Corpus{}), ContractError);
}

TEST_CASE("wer hand cases") {
  const Corpus a = {"a b c d"};
  CHECK(Wer(a, a) == 0.0);
  CHECK(Wer(Corpus{"a x c d"}, a) == 0.25);
  CHECK(Wer(Corpus{""}, Corpus{"x y z"}) == 1.0);
  CHECK(Wer(Corpus{"x y z w"}, Corpus{"x"}) == 3.0);
  CHECK_THROWS_AS(Wer(Corpus{"a"}, Corpus{""}), ContractError);
  CHECK_THROWS_AS(Wer(Corpus{}, Corpus{}), ContractError);
}

TEST_CASE("metrics agree with brute force on random corpora") {
  std::mt19937_64 rng(77);
  const std::vector<std::string> lexicon = {"a", "b", "c", "d", "ab", "ba"};
  auto sentence = [&] {
    const int n = static_cast<int>(rng() % 9);  // 0..8 words
    std::string s;
    for (int i = 0; i < n; ++i) {
      if (i > 0) s += ' ';
      s += lexicon[rng() % lexicon.size()];
    }
    return s;
  };
  int nonzero_bleu = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 5);
    Corpus hyps, refs;
    for (int i = 0; i < n; ++i) {
      hyps.push_back(sentence());
      // References often share material with the hypothesis.
      refs.push_back(rng() % 2 ? hyps.back() + " " + sentence() : sentence());
    }
    if (std::all_of(refs.begin(), refs.end(),
                    [](const std::string &s) { return Words(s).empty(); })) {
      refs[0] = "a";
    }
    CAPTURE(trial);
    const double expected = NaiveBleu(hyps, refs);
    CHECK(Bleu4(hyps, refs).bleu == doctest::Approx(expected).epsilon(1e-12));
    CHECK(Wer(hyps, refs) == NaiveWer(hyps, refs));
    nonzero_bleu += expected > 0;

    // Sentence order does not matter at corpus level.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Corpus ph, pr;
    for (int i : order) {
      ph.push_back(hyps[i]);
      pr.push_back(refs[i]);
    }
    CHECK(Bleu4(ph, pr).bleu == doctest::Approx(Bleu4(hyps, refs).bleu).epsilon(1e-12));
    CHECK(Wer(ph, pr) == Wer(hyps, refs));

    const double w = Wer(hyps, refs);
    CHECK(w >= 0.0);
    bool identical = true;
    for (int i = 0; i < n; ++i) identical = identical && Words(hyps[i]) == Words(refs[i]);
    CHECK((w == 0.0) == identical);
  }
  CHECK(nonzero_bleu > 20);  // the oracle comparison is not vacuous
}

struct DecodeFixture {
  Vocabulary vocab;
  ModelConfig config;
  ParamMap<double> params;
  Task task;

  DecodeFixture() {
    SyntheticSpec spec;
    spec.alphabet_size = 5;
    spec.min_len = 3;
    spec.max_len = 6;
    vocab = SyntheticVocab(spec);
    config.d_model = 8;
    config.n_enc = config.n_dec = 1;
    config.n_heads = 2;
    config.d_ff = 16;
    config.vocab_size = vocab.size();
    config.max_len = 40;
    params = InitParams<double>(config, 3);
    task = GenMtTask(spec, vocab, 7, 1);
  }
};

TEST_CASE("greedy decoding") {
  DecodeFixture fx;
  const std::vector<int> idx = {0, 1, 2, 3, 4, 5, 6};
  const Batch batch = MakeBatch(fx.task, idx, false);

  for (int max_len : {1, 3, 12}) {
    const auto out = GreedyDecode(fx.config, fx.params, batch, Modality::kTokens, max_len);
    REQUIRE(out.size() == 7);
    for (const auto &seq : out) {
      CHECK(static_cast<int>(seq.size()) <= max_len);
      for (int id : seq) {
        CHECK(id >= Vocabulary::kNumSpecials - 1);  // UNK allowed, never BOS/EOS/PAD
        CHECK(id < fx.vocab.size());
      }
    }
    CHECK(out == GreedyDecode(fx.config, fx.params, batch, Modality::kTokens, max_len));
  }
  // Batched decoding equals one-at-a-time decoding.
  const auto all = DecodeTask(fx.config, fx.params, fx.task, 12, 3);
  for (int i = 0; i < 7; ++i) {
    const std::vector<int> one = {i};
    CHECK(all[i] == GreedyDecode(fx.config, fx.params, MakeBatch(fx.task, one, false),
                                 Modality::kTokens, 12)[0]);
  }

  // A model that always prefers EOS decodes to nothing.
  fx.params.at("out/b")[Vocabulary::kEos] = 100.0;
  for (const auto &seq : GreedyDecode(fx.config, fx.params, batch, Modality::kTokens, 10)) {
    CHECK(seq.empty());
  }
  CHECK_THROWS_AS(GreedyDecode(fx.config, fx.params, batch, Modality::kTokens, 0),
                  ContractError);
}

}  // namespace
}  // namespace mamlst
