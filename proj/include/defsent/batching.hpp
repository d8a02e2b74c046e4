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
#include <optional>
#include <string>
#include <vector>

#include "defsent/corpus.hpp"
#include "defsent/vocab.hpp"

namespace defsent {

inline constexpr std::int32_t kNoLabel = -1;

// Padded id matrix for one batch of sentences.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<TokenId> ids;          // batch x seq_len, PAD-filled
  std::vector<std::uint8_t> mask;    // 1 on real tokens, 0 on PAD
  std::vector<TokenId> targets;      // per-row headword id, empty when absent
  std::vector<std::int32_t> labels;  // MLM labels, kNoLabel when unsupervised; empty when absent

  TokenId id(std::size_t row, std::size_t pos) const { return ids[row * seq_len + pos]; }
};

// Pads tokenized rows to the longest one.
TokenBatch pad_batch(const std::vector<std::vector<TokenId>>& rows);

// Selects each non-special, non-pad position independently with mask_prob;
// a selected position becomes [MASK] (80%), a random non-special token (10%)
// or stays unchanged (10%). Labels carry the original id at selected positions.
TokenBatch mlm_mask(const TokenBatch& batch, double mask_prob, std::uint64_t seed,
                    std::size_t vocab_size);

// Definition batches with per-row target ids (entries must be OOV-filtered).
// No shuffle when shuffle_seed is empty; the final partial batch is kept.
std::vector<TokenBatch> make_batches(const std::vector<DefinitionEntry>& entries,
                                     const Vocab& vocab, std::size_t batch_size,
                                     std::size_t max_len,
                                     std::optional<std::uint64_t> shuffle_seed);

std::vector<TokenBatch> make_batches(const std::vector<std::string>& sentences, const Vocab& vocab,
                                     std::size_t batch_size, std::size_t max_len,
                                     std::optional<std::uint64_t> shuffle_seed);

}  // namespace defsent
