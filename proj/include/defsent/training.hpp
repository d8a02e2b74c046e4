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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "defsent/checkpoint.hpp"
#include "defsent/corpus.hpp"
#include "defsent/evaluation.hpp"
#include "defsent/optim.hpp"

namespace defsent {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 1;
  double base_lr = 1e-4;
  double warmup_fraction = 0.10;
  std::uint64_t seed = 0;
  Pooling pooling;
  bool freeze_prediction_layer = true;
  std::optional<double> max_grad_norm;
  LrDecay decay = LrDecay::kConstant;
  double mask_prob = 0.15;  // MLM pretraining only

  void validate() const;
};

// floor(fraction * total_steps).
std::uint64_t warmup_steps_for(std::uint64_t total_steps, double warmup_fraction);

struct StepRecord {
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> log;
  std::vector<double> epoch_mean_loss;
  std::uint64_t total_steps = 0;
  std::uint64_t warmup_steps = 0;
};

// Masked-language-model training of every parameter, prediction head
// included. Phase of the returned checkpoint is "pretrained".
TrainResult pretrain_mlm(const std::vector<std::string>& corpus, const Vocab& vocab,
                         const ModelConfig& model_config, const TrainConfig& config);

// Adam on the definition -> headword objective with linear warmup. The
// prediction head is frozen when config.freeze_prediction_layer is set (no
// optimizer state is allocated for it). Entries must be OOV-filtered.
TrainResult finetune_defsent(const Checkpoint& pretrained,
                             const std::vector<DefinitionEntry>& train,
                             const TrainConfig& config);

// x in {0, 0.5, ..., 7}.
std::vector<double> default_grid_exponents();
inline constexpr double kDefaultGridBase = 1e-6;

struct GridCandidate {
  double exponent = 0.0;
  double lr = 0.0;
  double dev_mrr = 0.0;
  std::uint64_t seed = 0;
};

struct GridSearchResult {
  std::vector<GridCandidate> candidates;
  std::size_t selected = 0;
  double selected_lr() const { return candidates.at(selected).lr; }
};

// Fine-tunes a fresh copy per lr = 2^x * base and keeps the best dev MRR
// (ties -> smaller lr). Candidates run on up to `threads` workers.
GridSearchResult lr_grid_search(const Checkpoint& pretrained, const SplitCorpus& split,
                                const TrainConfig& config, std::span<const double> exponents,
                                double base = kDefaultGridBase, std::size_t threads = 1);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::vector<double> per_seed;
};

struct MultiSeedReport {
  std::vector<std::uint64_t> seeds;
  std::map<std::string, MetricSummary> metrics;
};

using SeedRun = std::function<std::map<std::string, double>(std::uint64_t seed)>;

MultiSeedReport multi_seed(const SeedRun& run, std::span<const std::uint64_t> seeds,
                           std::size_t threads = 1);

MetricSummary summarize(std::span<const double> values);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace defsent
