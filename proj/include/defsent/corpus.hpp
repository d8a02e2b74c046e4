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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defsent/vocab.hpp"

namespace defsent {

struct DefinitionEntry {
  std::string word;
  std::string definition;
  TokenId word_id = -1;  // set by filter_oov

  friend bool operator==(const DefinitionEntry&, const DefinitionEntry&) = default;
};

struct SplitCorpus {
  std::vector<DefinitionEntry> train;
  std::vector<DefinitionEntry> dev;
  std::vector<DefinitionEntry> test;
};

struct STSPair {
  std::string sentence_a;
  std::string sentence_b;
  double gold = 0.0;
};

struct LabeledSentence {
  std::string sentence;
  int label = 0;
};

// JSON Lines ({"word":…, "definition":…}) or TSV (word<TAB>definition),
// chosen by the first non-whitespace byte. Blank lines are skipped.
std::vector<DefinitionEntry> load_dictionary(const std::string& path);

// sentence_a<TAB>sentence_b<TAB>score, score in [0, 5].
std::vector<STSPair> load_sts(const std::string& path);

// label<TAB>sentence, label a non-negative integer.
std::vector<LabeledSentence> load_classification(const std::string& path);

// One sentence per non-blank line.
std::vector<std::string> load_sentences(const std::string& path);

// Vocabulary id of a headword, or -1 unless it is exactly one non-special
// in-vocabulary token.
TokenId headword_id(const std::string& word, const Vocab& vocab);

// Keeps entries whose headword is a single non-special vocabulary token and
// records its id. Order preserved.
std::vector<DefinitionEntry> filter_oov(const std::vector<DefinitionEntry>& entries,
                                        const Vocab& vocab);

std::size_t count_distinct_words(const std::vector<DefinitionEntry>& entries);

struct SplitRatios {
  unsigned train = 8;
  unsigned dev = 1;
  unsigned test = 1;
};

// Partitions by headword: distinct words are shuffled with the seed, dev and
// test take floor(n * ratio) words each, train the remainder.
SplitCorpus split_by_word(const std::vector<DefinitionEntry>& entries, SplitRatios ratios,
                          std::uint64_t seed);

}  // namespace defsent
