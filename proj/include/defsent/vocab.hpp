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

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace defsent {

using TokenId = std::int32_t;

// Reserved ids, fixed in every vocabulary.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr TokenId kMaskId = 4;
inline constexpr std::size_t kNumSpecialTokens = 5;

inline bool is_special(TokenId id) { return id >= 0 && id < static_cast<TokenId>(kNumSpecialTokens); }

class Vocab {
 public:
  static const std::vector<std::string>& special_tokens();

  // Specials only.
  Vocab();

  // Tokens in id order. The first five must be the special tokens in their
  // reserved order; duplicates are rejected.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const;
  // kUnkId when absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;

  // One token per line; line number (0-based) is the id.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Lowercases ASCII and splits on whitespace; every ASCII punctuation
// character becomes its own token.
std::vector<std::string> split_words(std::string_view sentence);

// Frequency-ranked vocabulary (ties broken lexicographically), truncated to
// max_size entries including the five specials.
Vocab build_vocab(const std::vector<std::string>& sentences, std::size_t max_size);

// [CLS] tokens... [SEP], unknown words -> [UNK], interior truncated so the
// result has at most max_len ids.
std::vector<TokenId> tokenize(std::string_view sentence, const Vocab& vocab, std::size_t max_len);

}  // namespace defsent
