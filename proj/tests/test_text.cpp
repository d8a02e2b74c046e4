// Copyright 2026 The DefSent Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "defsent/batching.hpp"
#include "defsent/corpus.hpp"
#include "defsent/error.hpp"
#include "defsent/rng.hpp"
#include "defsent/vocab.hpp"
#include "support/tempfiles.hpp"

using namespace defsent;
using namespace defsent::testing;

namespace {

Vocab vocab_of(std::vector<std::string> words) {
  std::vector<std::string> toks = Vocab::special_tokens();
  toks.insert(toks.end(), words.begin(), words.end());
  return Vocab::from_tokens(toks);
}

std::vector<DefinitionEntry> numbered_entries(std::size_t words, std::size_t defs_each = 1) {
  std::vector<DefinitionEntry> out;
  for (std::size_t w = 0; w < words; ++w) {
    for (std::size_t d = 0; d < defs_each; ++d) {
      out.push_back({"w" + std::to_string(w), "definition " + std::to_string(d), -1});
    }
  }
  return out;
}

std::set<std::string> words_of(const std::vector<DefinitionEntry>& es) {
  std::set<std::string> s;
  for (auto& e : es) s.insert(e.word);
  return s;
}

}  // namespace

TEST_CASE("vocab ranks by frequency") {
  Vocab v = build_vocab({"a b b"}, 8);
  REQUIRE(v.size() == 7);
  CHECK(v.token(5) == "b");
  CHECK(v.token(6) == "a");
  for (std::size_t i = 0; i < kNumSpecialTokens; ++i) {
    CHECK(v.token(static_cast<TokenId>(i)) == Vocab::special_tokens()[i]);
  }
}

TEST_CASE("vocab truncation keeps the most frequent word") {
  Vocab v = build_vocab({"x y y z z z"}, 6);
  REQUIRE(v.size() == 6);
  CHECK(v.token(5) == "z");
  CHECK_FALSE(v.contains("y"));
}

TEST_CASE("equal frequencies fall back to lexicographic order") {
  Vocab v = build_vocab({"pear apple", "mango"}, 100);
  CHECK(v.id("apple") == 5);
  CHECK(v.id("mango") == 6);
  CHECK(v.id("pear") == 7);
}

TEST_CASE("vocab rejects bad arguments") {
  CHECK_THROWS_AS(build_vocab({"a"}, 5), InvalidArgument);
  CHECK_THROWS_AS(build_vocab({}, 10), InvalidArgument);
  CHECK_THROWS_AS(build_vocab({"   "}, 10), InvalidArgument);
  CHECK_THROWS_AS(Vocab::from_tokens({"a", "b"}), InvalidArgument);
  auto toks = Vocab::special_tokens();
  toks.push_back("x");
  toks.push_back("x");
  CHECK_THROWS_AS(Vocab::from_tokens(toks), InvalidArgument);
}

TEST_CASE("vocab id and token are inverse") {
  Vocab v = build_vocab({"the cat sat on the mat !"}, 100);
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(v.id(v.token(static_cast<TokenId>(i))) == static_cast<TokenId>(i));
  }
  CHECK(v.id("dog") == kUnkId);
  CHECK_THROWS_AS(v.token(static_cast<TokenId>(v.size())), IndexError);
}

TEST_CASE("vocab file round trip") {
  TempDir dir;
  Vocab v = build_vocab({"alpha beta beta gamma"}, 50);
  v.save(dir.file("vocab.txt"));
  CHECK(Vocab::load(dir.file("vocab.txt")) == v);
  CHECK(read_file(dir.file("vocab.txt")).rfind("[PAD]\n[UNK]\n", 0) == 0);
}

TEST_CASE("split_words lowercases and isolates punctuation") {
  CHECK(split_words("Very strange; bizarre") ==
        std::vector<std::string>{"very", "strange", ";", "bizarre"});
  CHECK(split_words("  \t ").empty());
  CHECK(split_words("don't") == std::vector<std::string>{"don", "'", "t"});
}

TEST_CASE("tokenize wraps, maps unknowns and truncates") {
  Vocab v = vocab_of({"royal", "man"});
  CHECK(tokenize("", v, 16) == std::vector<TokenId>{kClsId, kSepId});
  CHECK(tokenize("Royal man", v, 16) == std::vector<TokenId>{kClsId, 5, 6, kSepId});
  CHECK(tokenize("royal woman", v, 16) == std::vector<TokenId>{kClsId, 5, kUnkId, kSepId});
  std::string longs;
  for (int i = 0; i < 100; ++i) longs += "man ";
  auto ids = tokenize(longs, v, 16);
  CHECK(ids.size() == 16);
  CHECK(ids.front() == kClsId);
  CHECK(ids.back() == kSepId);
  CHECK_THROWS_AS(tokenize("man", v, 2), InvalidArgument);
}

TEST_CASE("tokenize round trips in-vocabulary text") {
  Vocab v = build_vocab({"the quick brown fox jumps over the lazy dog"}, 100);
  const auto ids = tokenize("the quick brown fox", v, 32);
  std::string text;
  for (std::size_t i = 1; i + 1 < ids.size(); ++i) text += (i > 1 ? " " : "") + v.token(ids[i]);
  CHECK(text == "the quick brown fox");
}

TEST_CASE("dictionary loads JSON lines and TSV") {
  TempDir dir;
  auto j = load_dictionary(dir.write("d.jsonl",
      "{\"word\": \"pile\", \"definition\": \"place or lay as if in a pile\"}\n\n"
      "{\"word\": \"pile\", \"definition\": \"a heap\"}\n"));
  REQUIRE(j.size() == 2);
  CHECK(j[0].word == "pile");
  CHECK(j[0].definition == "place or lay as if in a pile");
  CHECK(j[1].definition == "a heap");
  auto t = load_dictionary(dir.write("d.tsv", "good\tthat which is pleasing or valuable or useful\r\n"));
  REQUIRE(t.size() == 1);
  CHECK(t[0].word == "good");
  CHECK(t[0].definition == "that which is pleasing or valuable or useful");
}

TEST_CASE("malformed dictionary lines report their line number") {
  TempDir dir;
  auto bad = dir.write("bad.jsonl", "{\"word\":\"a\",\"definition\":\"b\"}\n\n{\"word\": 3}\n");
  try {
    load_dictionary(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  CHECK_THROWS_AS(load_dictionary(dir.write("e.tsv", "")), ParseError);
  CHECK_THROWS_AS(load_dictionary(dir.write("f.tsv", "word only\n")), ParseError);
  CHECK_THROWS_AS(load_dictionary(dir.file("missing.tsv")), IoError);
}

TEST_CASE("sts and classification loaders validate fields") {
  TempDir dir;
  auto sts = load_sts(dir.write("s.tsv", "a cat\ta dog\t3.5\nx\ty\t0\n"));
  REQUIRE(sts.size() == 2);
  CHECK(sts[0].gold == 3.5);
  CHECK_THROWS_AS(load_sts(dir.write("s2.tsv", "a\tb\t5.5\n")), ParseError);
  CHECK_THROWS_AS(load_sts(dir.write("s3.tsv", "a\tb\tfive\n")), ParseError);
  CHECK_THROWS_AS(load_sts(dir.write("s4.tsv", "a\tb\n")), ParseError);
  auto cls = load_classification(dir.write("c.tsv", "1\tgood movie\n0\tbad movie\n"));
  REQUIRE(cls.size() == 2);
  CHECK(cls[0].label == 1);
  CHECK(cls[1].sentence == "bad movie");
  try {
    load_classification(dir.write("c2.tsv", "1\tok\n-1\tneg\n"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("oov filter keeps single in-vocabulary headwords") {
  Vocab v = vocab_of({"cat", "dog"});
  std::vector<DefinitionEntry> es{{"cat", "a pet", -1}, {"emu", "a bird", -1},
                                  {"Dog", "a pet", -1}, {"[CLS]", "special", -1},
                                  {"cat dog", "two words", -1}};
  auto f = filter_oov(es, v);
  REQUIRE(f.size() == 2);
  CHECK(f[0].word == "cat");
  CHECK(f[0].word_id == v.id("cat"));
  CHECK(f[1].word_id == v.id("dog"));
  CHECK(filter_oov(f, v) == f);
  std::vector<DefinitionEntry> all{{"cat", "x", -1}, {"dog", "y", -1}};
  auto g = filter_oov(all, v);
  REQUIRE(g.size() == 2);
  CHECK(g[0].word == "cat");
  CHECK(g[1].word == "dog");
}

TEST_CASE("split by word is 8:1:1 and word-disjoint") {
  auto s = split_by_word(numbered_entries(10), {}, 1);
  CHECK(s.train.size() == 8);
  CHECK(s.dev.size() == 1);
  CHECK(s.test.size() == 1);

  auto es = numbered_entries(20);
  for (int d = 0; d < 4; ++d) es.push_back({"w3", "extra " + std::to_string(d), -1});
  auto s2 = split_by_word(es, {}, 5);
  std::size_t where = 0;
  for (auto* part : {&s2.train, &s2.dev, &s2.test}) {
    const auto n = std::count_if(part->begin(), part->end(), [](auto& e) { return e.word == "w3"; });
    CHECK((n == 0 || n == 5));
    where += n;
  }
  CHECK(where == 5);

  CHECK_THROWS_AS(split_by_word(numbered_entries(9, 3), {}, 1), InsufficientData);
}

TEST_CASE("split disjointness holds across seeds and corpora") {
  Rng rng(11);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t words = 10 + rng.uniform_index(60);
    std::vector<DefinitionEntry> es;
    for (std::size_t i = 0; i < words * 2; ++i) {
      es.push_back({"w" + std::to_string(rng.uniform_index(words)), "d", -1});
    }
    if (count_distinct_words(es) < 10) continue;
    auto s = split_by_word(es, {}, seed);
    auto a = words_of(s.train), b = words_of(s.dev), c = words_of(s.test);
    for (auto& w : b) CHECK(a.count(w) == 0);
    for (auto& w : c) CHECK((a.count(w) == 0 && b.count(w) == 0));
    CHECK(s.train.size() + s.dev.size() + s.test.size() == es.size());
    const std::size_t n = count_distinct_words(es);
    CHECK(b.size() == n / 10);
    CHECK(c.size() == n / 10);
  }
}

TEST_CASE("split is reproducible per seed") {
  auto es = numbered_entries(50);
  auto a = split_by_word(es, {}, 3), b = split_by_word(es, {}, 3), c = split_by_word(es, {}, 4);
  CHECK(a.train == b.train);
  CHECK(a.dev == b.dev);
  CHECK(a.test == b.test);
  CHECK((a.train != c.train || a.dev != c.dev));
}

TEST_CASE("mlm mask never selects specials or pads") {
  std::vector<std::vector<TokenId>> rows;
  for (int r = 0; r < 4; ++r) {
    std::vector<TokenId> row{kClsId};
    for (int j = 0; j < 3 + 4 * r; ++j) row.push_back(5 + (j * 7 + r) % 40);
    row.push_back(kSepId);
    rows.push_back(row);
  }
  const TokenBatch base = pad_batch(rows);
  std::size_t selected = 0, eligible = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const TokenBatch m = mlm_mask(base, 0.3, seed, 50);
    for (std::size_t i = 0; i < base.ids.size(); ++i) {
      const bool special = is_special(base.ids[i]);
      if (special) {
        CHECK(m.labels[i] == kNoLabel);
        CHECK(m.ids[i] == base.ids[i]);
      } else {
        ++eligible;
        if (m.labels[i] != kNoLabel) {
          ++selected;
          CHECK(m.labels[i] == base.ids[i]);
          CHECK_FALSE((is_special(m.ids[i]) && m.ids[i] != kMaskId));
        } else {
          CHECK(m.ids[i] == base.ids[i]);
        }
      }
      CHECK(m.mask[i] == base.mask[i]);
    }
  }
  const double rate = static_cast<double>(selected) / static_cast<double>(eligible);
  CHECK(rate == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("mlm mask corruption mix is roughly 80/10/10") {
  std::vector<TokenId> row{kClsId};
  for (int j = 0; j < 200; ++j) row.push_back(5 + j % 90);
  row.push_back(kSepId);
  const TokenBatch base = pad_batch({row});
  std::size_t masked = 0, kept = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const TokenBatch m = mlm_mask(base, 0.5, seed, 100);
    for (std::size_t i = 0; i < m.ids.size(); ++i) {
      if (m.labels[i] == kNoLabel) continue;
      ++total;
      if (m.ids[i] == kMaskId) ++masked;
      else if (m.ids[i] == base.ids[i]) ++kept;
    }
  }
  CHECK(static_cast<double>(masked) / total == doctest::Approx(0.8).epsilon(0.03));
  // kept includes random draws that hit the original token
  CHECK(static_cast<double>(kept) / total == doctest::Approx(0.1 + 0.1 / 95).epsilon(0.15));
}

TEST_CASE("mlm mask replays with a fixed seed") {
  std::vector<TokenId> row{kClsId};
  for (int j = 0; j < 18; ++j) row.push_back(5 + j);
  row.push_back(kSepId);
  const TokenBatch base = pad_batch({row});
  const TokenBatch a = mlm_mask(base, 0.15, 77, 30), b = mlm_mask(base, 0.15, 77, 30);
  CHECK(a.ids == b.ids);
  CHECK(a.labels == b.labels);
  const TokenBatch none = mlm_mask(base, 1e-12, 77, 30);
  CHECK(std::all_of(none.labels.begin(), none.labels.end(), [](auto l) { return l == kNoLabel; }));
  CHECK_THROWS_AS(mlm_mask(base, 1.0, 1, 30), InvalidArgument);
  CHECK_THROWS_AS(mlm_mask(base, 0.0, 1, 30), InvalidArgument);
}

TEST_CASE("batches split 33 entries as 16, 16, 1") {
  std::vector<std::string> words;
  for (int i = 0; i < 33; ++i) words.push_back("w" + std::to_string(i));
  Vocab v = vocab_of(words);
  std::vector<DefinitionEntry> es;
  for (int i = 0; i < 33; ++i) {
    std::string def;
    for (int k = 0; k <= i % 5; ++k) def += "w" + std::to_string(k) + " ";
    es.push_back({words[i], def, -1});
  }
  es = filter_oov(es, v);
  auto batches = make_batches(es, v, 16, 16, std::nullopt);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].batch == 16);
  CHECK(batches[1].batch == 16);
  CHECK(batches[2].batch == 1);
  for (auto& b : batches) {
    CHECK(b.targets.size() == b.batch);
    std::size_t longest = 0;
    for (std::size_t r = 0; r < b.batch; ++r) {
      std::size_t len = 0;
      for (std::size_t j = 0; j < b.seq_len; ++j) {
        const bool pad = b.id(r, j) == kPadId;
        CHECK(b.mask[r * b.seq_len + j] == (pad ? 0 : 1));
        if (!pad) len = j + 1;
      }
      CHECK(b.id(r, 0) == kClsId);
      CHECK(b.id(r, len - 1) == kSepId);
      longest = std::max(longest, len);
    }
    CHECK(longest == b.seq_len);
  }
  auto s1 = make_batches(es, v, 16, 16, 9), s2 = make_batches(es, v, 16, 16, 9);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].ids == s2[i].ids);
    CHECK(s1[i].targets == s2[i].targets);
  }
  CHECK(s1[0].targets != batches[0].targets);
  auto unfiltered = es;
  unfiltered[0].word_id = -1;
  CHECK_THROWS(make_batches(unfiltered, v, 16, 16, std::nullopt));
}
