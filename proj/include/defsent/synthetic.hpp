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

// Synthetic "dictionary world" for desk-scale experiments. Every headword is
// a unique combination of one attribute per category. Definitions name all
// of a word's attributes; the pretraining corpus mentions each word next to
// some of its attributes, so a masked-LM learns which attributes point to
// which word without ever seeing the definitions.

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "defsent/corpus.hpp"
#include "defsent/model.hpp"
#include "defsent/rng.hpp"
#include "defsent/vocab.hpp"

namespace defsent::synthetic {

struct WorldConfig {
  std::size_t num_words = 1500;
  std::size_t num_categories = 4;
  std::size_t values_per_category = 12;
  std::size_t definitions_per_word = 1;
  std::size_t corpus_sentences_per_word = 8;
  std::uint64_t seed = 1;
};

struct World {
  std::vector<std::string> words;
  std::vector<std::vector<std::string>> attributes;  // [category][value]
  std::vector<std::vector<std::size_t>> word_attributes;  // [word][category] -> value
  std::vector<DefinitionEntry> dictionary;
  std::vector<std::string> corpus;
};

// Distinct pronounceable pseudo-words.
inline std::vector<std::string> pseudo_words(std::size_t n, std::size_t syllables, Rng& rng,
                                              std::set<std::string>& taken) {
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                  "s", "t", "v", "z", "br", "st", "tr", "pl", "gr", "sh"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kOnsets[rng.uniform_index(std::size(kOnsets))];
      w += kVowels[rng.uniform_index(std::size(kVowels))];
    }
    if (rng.uniform() < 0.5) w += "n";
    if (taken.insert(w).second) out.push_back(w);
  }
  return out;
}

inline World make_world(const WorldConfig& cfg) {
  Rng rng(cfg.seed);
  World world;
  // Function words are reserved so generated names never collide with them.
  std::set<std::string> taken = {"a",    "an",   "the",   "thing", "that", "is",   "and",
                                 "with", "for",  "in",    "of",    "kind", "one",  "which",
                                 "it",   "you",  "find",  "from",  "can",  "be",   "very",
                                 "some", "people", "say", "this",  "was",  "has",  "often"};
  for (std::size_t c = 0; c < cfg.num_categories; ++c) {
    world.attributes.push_back(pseudo_words(cfg.values_per_category, 2, rng, taken));
  }
  world.words = pseudo_words(cfg.num_words, 3, rng, taken);

  std::set<std::vector<std::size_t>> used;
  for (std::size_t w = 0; w < cfg.num_words; ++w) {
    std::vector<std::size_t> combo;
    do {
      combo.clear();
      for (std::size_t c = 0; c < cfg.num_categories; ++c) {
        combo.push_back(rng.uniform_index(cfg.values_per_category));
      }
    } while (!used.insert(combo).second);
    world.word_attributes.push_back(combo);
  }

  auto attr = [&](std::size_t w, std::size_t c) {
    return world.attributes[c][world.word_attributes[w][c]];
  };
  const std::size_t C = cfg.num_categories;

  for (std::size_t w = 0; w < cfg.num_words; ++w) {
    for (std::size_t d = 0; d < cfg.definitions_per_word; ++d) {
      std::vector<std::size_t> order(C);
      for (std::size_t c = 0; c < C; ++c) order[c] = c;
      rng.shuffle(order.begin(), order.end());
      std::string def;
      switch (rng.uniform_index(3)) {
        case 0: def = "a thing that is"; break;
        case 1: def = "a kind of"; break;
        default: def = "one which is"; break;
      }
      for (std::size_t i = 0; i < C; ++i) {
        if (i > 0) def += (i + 1 == C) ? " and" : " ,";
        def += " " + attr(w, order[i]);
      }
      world.dictionary.push_back({world.words[w], def, -1});
    }
  }

  for (std::size_t w = 0; w < cfg.num_words; ++w) {
    for (std::size_t s = 0; s < cfg.corpus_sentences_per_word; ++s) {
      const std::size_t c1 = rng.uniform_index(C);
      std::size_t c2 = rng.uniform_index(C - 1);
      if (c2 >= c1) ++c2;
      std::string sent;
      switch (rng.uniform_index(5)) {
        case 0: sent = "the " + world.words[w] + " is " + attr(w, c1) + " and " + attr(w, c2); break;
        case 1: sent = "you find a " + attr(w, c1) + " " + world.words[w] + " with " + attr(w, c2); break;
        case 2: sent = "people say this " + world.words[w] + " was very " + attr(w, c1); break;
        case 3: sent = "some " + attr(w, c1) + " " + attr(w, c2) + " " + world.words[w] + " can be " + attr(w, (c1 + c2 + 1) % C == c1 ? c2 : (c1 + c2 + 1) % C); break;
        default: {
          sent = "the " + world.words[w] + " is";
          for (std::size_t c = 0; c < C; ++c) sent += " " + attr(w, c);
          break;
        }
      }
      world.corpus.push_back(sent);
    }
  }
  rng.shuffle(world.corpus.begin(), world.corpus.end());
  return world;
}

// Pairs of definitions scored 5 * shared_attributes / categories.
inline std::vector<STSPair> sts_pairs(const World& world, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<STSPair> out;
  const std::size_t W = world.dictionary.size();
  const std::size_t per = W / world.words.size();
  while (out.size() < n) {
    const std::size_t a = rng.uniform_index(W), b = rng.uniform_index(W);
    const auto& wa = world.word_attributes[a / per];
    const auto& wb = world.word_attributes[b / per];
    std::size_t shared = 0;
    for (std::size_t c = 0; c < wa.size(); ++c) shared += wa[c] == wb[c];
    out.push_back({world.dictionary[a].definition, world.dictionary[b].definition,
                   5.0 * static_cast<double>(shared) / static_cast<double>(wa.size())});
  }
  return out;
}

// Definitions labelled by their word's value in one attribute category.
inline std::vector<LabeledSentence> classification_rows(const World& world, std::size_t category) {
  std::vector<LabeledSentence> out;
  for (std::size_t i = 0; i < world.dictionary.size(); ++i) {
    const std::size_t w = i / (world.dictionary.size() / world.words.size());
    out.push_back({world.dictionary[i].definition,
                   static_cast<int>(world.word_attributes[w][category])});
  }
  return out;
}

// Small world used by the overfit and training fixtures: 32 headwords, one
// definition each.
inline World overfit_world() {
  WorldConfig cfg;
  cfg.num_words = 32;
  cfg.values_per_category = 4;
  cfg.corpus_sentences_per_word = 8;
  cfg.seed = 17;
  return make_world(cfg);
}

// Vocabulary over corpus and definitions together.
inline Vocab world_vocab(const World& world) {
  std::vector<std::string> all = world.corpus;
  for (const auto& e : world.dictionary) all.push_back(e.definition);
  return build_vocab(all, 100000);
}

inline ModelConfig small_model(std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 32;
  c.num_layers = 2;
  c.num_heads = 2;
  c.d_ff = 64;
  c.max_len = 16;
  c.dropout_prob = 0.0;
  return c;
}

}  // namespace defsent::synthetic
