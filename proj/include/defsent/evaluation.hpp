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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "defsent/corpus.hpp"
#include "defsent/model.hpp"

namespace defsent {

// ---- word prediction ranking ------------------------------------------

struct RankReport {
  double mrr = 0.0;
  double top1 = 0.0;
  double top3 = 0.0;
  double top10 = 0.0;
  std::size_t n_examples = 0;
};

// 1 + number of scores strictly greater than scores[target].
std::size_t rank_of_target(std::span<const float> scores, std::size_t target);
std::size_t rank_of_target(std::span<const double> scores, std::size_t target);

RankReport rank_metrics(std::span<const std::size_t> ranks);

// Ranks every entry's headword among all vocabulary logits for the pooled
// embedding of its definition. Entries must be OOV-filtered.
RankReport eval_word_prediction(const EncoderModel<float>& model, const Vocab& vocab,
                                const std::vector<DefinitionEntry>& entries,
                                const Pooling& pooling, std::size_t batch_size = 64);

// Expected MRR when the target's rank is uniform over 1..V: H_V / V.
double random_ranking_mrr(std::size_t vocab_size);

struct MaskedLmReport {
  double accuracy = 0.0;
  std::size_t n_masked = 0;
};

// Top-1 accuracy of recovering masked tokens (mlm_mask with the given seed
// per batch) on held-out sentences.
MaskedLmReport eval_masked_lm(const EncoderModel<float>& model, const Vocab& vocab,
                              const std::vector<std::string>& sentences, double mask_prob,
                              std::uint64_t seed, std::size_t batch_size = 64);

// ---- similarity --------------------------------------------------------

double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(std::span<const float> u, std::span<const float> v);

// Average (fractional) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of average ranks; tie-robust.
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct STSResult {
  std::string dataset;
  double rho = 0.0;
  std::size_t n_pairs = 0;
};

using SentenceEmbedder = std::function<std::vector<double>(const std::string&)>;

// Spearman rho between cosine similarities of embedded pairs and gold scores.
STSResult eval_sts(const SentenceEmbedder& embed, const std::vector<STSPair>& pairs,
                   const std::string& dataset = "sts");
STSResult eval_sts(const EncoderModel<float>& model, const Vocab& vocab,
                   const std::vector<STSPair>& pairs, const Pooling& pooling,
                   const std::string& dataset = "sts");

// ---- classification probe ---------------------------------------------

struct ProbeOptions {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  std::size_t iterations = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

struct ProbeReport {
  std::vector<double> fold_accuracies;
  std::vector<std::size_t> fold_sizes;
  double mean_accuracy = 0.0;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
};

// Seeded shuffle into k contiguous folds; per fold, multinomial logistic
// regression (full-batch gradient descent with L2, features standardized on
// the training folds) scored on the held-out fold.
ProbeReport probe_classifier(const std::vector<std::vector<double>>& embeddings,
                             std::span<const int> labels, const ProbeOptions& options);

}  // namespace defsent
