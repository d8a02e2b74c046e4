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

#include "defsent/batching.hpp"

#include <algorithm>
#include <numeric>

#include "defsent/error.hpp"
#include "defsent/rng.hpp"

namespace defsent {

TokenBatch pad_batch(const std::vector<std::vector<TokenId>>& rows) {
  if (rows.empty()) throw InvalidArgument("pad_batch: no rows");
  TokenBatch b;
  b.batch = rows.size();
  for (const auto& r : rows) b.seq_len = std::max(b.seq_len, r.size());
  b.ids.assign(b.batch * b.seq_len, kPadId);
  b.mask.assign(b.batch * b.seq_len, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      b.ids[i * b.seq_len + j] = rows[i][j];
      b.mask[i * b.seq_len + j] = 1;
    }
  }
  return b;
}

TokenBatch mlm_mask(const TokenBatch& batch, double mask_prob, std::uint64_t seed,
                    std::size_t vocab_size) {
  if (!(mask_prob > 0.0 && mask_prob < 1.0)) {
    throw InvalidArgument("mask_prob must be in (0, 1)");
  }
  if (vocab_size <= kNumSpecialTokens) {
    throw InvalidArgument("mlm_mask needs at least one non-special token");
  }
  TokenBatch out = batch;
  out.labels.assign(batch.ids.size(), kNoLabel);
  Rng rng(seed);
  const auto n_regular = vocab_size - kNumSpecialTokens;
  for (std::size_t i = 0; i < out.ids.size(); ++i) {
    if (!out.mask[i] || is_special(out.ids[i])) continue;
    if (rng.uniform() >= mask_prob) continue;
    out.labels[i] = out.ids[i];
    const double r = rng.uniform();
    if (r < 0.8) {
      out.ids[i] = kMaskId;
    } else if (r < 0.9) {
      out.ids[i] = static_cast<TokenId>(kNumSpecialTokens + rng.uniform_index(n_regular));
    }
  }
  return out;
}

namespace {

std::vector<std::size_t> batch_order(std::size_t n, std::optional<std::uint64_t> seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (seed) {
    Rng rng(*seed);
    rng.shuffle(order.begin(), order.end());
  }
  return order;
}

}  // namespace

std::vector<TokenBatch> make_batches(const std::vector<DefinitionEntry>& entries,
                                     const Vocab& vocab, std::size_t batch_size,
                                     std::size_t max_len,
                                     std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
  const auto order = batch_order(entries.size(), shuffle_seed);
  std::vector<TokenBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<std::vector<TokenId>> rows;
    std::vector<TokenId> targets;
    for (std::size_t i = start; i < end; ++i) {
      const auto& e = entries[order[i]];
      if (e.word_id < 0 || static_cast<std::size_t>(e.word_id) >= vocab.size() ||
          is_special(e.word_id)) {
        throw InvalidArgument("entry '" + e.word + "' has no valid vocabulary id (run filter_oov)");
      }
      rows.push_back(tokenize(e.definition, vocab, max_len));
      targets.push_back(e.word_id);
    }
    TokenBatch b = pad_batch(rows);
    b.targets = std::move(targets);
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<TokenBatch> make_batches(const std::vector<std::string>& sentences, const Vocab& vocab,
                                     std::size_t batch_size, std::size_t max_len,
                                     std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
  const auto order = batch_order(sentences.size(), shuffle_seed);
  std::vector<TokenBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<std::vector<TokenId>> rows;
    for (std::size_t i = start; i < end; ++i) {
      rows.push_back(tokenize(sentences[order[i]], vocab, max_len));
    }
    batches.push_back(pad_batch(rows));
  }
  return batches;
}

}  // namespace defsent
