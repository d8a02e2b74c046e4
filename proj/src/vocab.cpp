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

#include "defsent/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "defsent/error.hpp"

namespace defsent {

const std::vector<std::string>& Vocab::special_tokens() {
  static const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                                     "[MASK]"};
  return kSpecials;
}

Vocab::Vocab() {
  tokens_ = special_tokens();
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<TokenId>(i));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    throw InvalidArgument("vocabulary must start with [PAD] [UNK] [CLS] [SEP] [MASK]");
  }
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  v.index_.reserve(v.tokens_.size());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (v.tokens_[i].empty()) throw InvalidArgument("empty token at id " + std::to_string(i));
    if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
      throw InvalidArgument("duplicate token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocab::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw IoError("write failed: " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

std::vector<std::string> split_words(std::string_view sentence) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char ch : sentence) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return words;
}

Vocab build_vocab(const std::vector<std::string>& sentences, std::size_t max_size) {
  if (max_size <= kNumSpecialTokens) {
    throw InvalidArgument("vocabulary max_size must exceed the 5 special tokens");
  }
  const auto& specials = Vocab::special_tokens();
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (auto& w : split_words(s)) {
      if (std::find(specials.begin(), specials.end(), w) != specials.end()) continue;
      ++counts[w];
    }
  }
  if (counts.empty()) throw InvalidArgument("cannot build a vocabulary from an empty corpus");
  // std::map iterates lexicographically; stable_sort keeps that order on ties.
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = specials;
  for (auto& [w, n] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(w);
  }
  return Vocab::from_tokens(std::move(tokens));
}

std::vector<TokenId> tokenize(std::string_view sentence, const Vocab& vocab,
                              std::size_t max_len) {
  if (max_len < 3) throw InvalidArgument("tokenize: max_len must be at least 3");
  const auto words = split_words(sentence);
  const std::size_t interior = std::min(words.size(), max_len - 2);
  std::vector<TokenId> ids;
  ids.reserve(interior + 2);
  ids.push_back(kClsId);
  for (std::size_t i = 0; i < interior; ++i) ids.push_back(vocab.id(words[i]));
  ids.push_back(kSepId);
  return ids;
}

}  // namespace defsent
