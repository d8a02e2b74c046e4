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

#include "defsent/training.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "defsent/batching.hpp"
#include "defsent/error.hpp"
#include "defsent/rng.hpp"

namespace defsent {

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (!(base_lr >= 0.0)) throw InvalidArgument("base_lr must be non-negative");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
    throw InvalidArgument("warmup_fraction must be in [0, 1]");
  }
  if (max_grad_norm && !(*max_grad_norm > 0.0)) {
    throw InvalidArgument("max_grad_norm must be positive");
  }
  if (!(mask_prob > 0.0 && mask_prob < 1.0)) throw InvalidArgument("mask_prob must be in (0, 1)");
}

std::uint64_t warmup_steps_for(std::uint64_t total_steps, double warmup_fraction) {
  return static_cast<std::uint64_t>(std::floor(warmup_fraction * static_cast<double>(total_steps)));
}

namespace {

LrSchedule make_schedule(const TrainConfig& config, std::uint64_t total_steps) {
  LrSchedule s;
  s.base_lr = config.base_lr;
  s.total_steps = total_steps;
  s.warmup_steps = warmup_steps_for(total_steps, config.warmup_fraction);
  s.decay = config.decay;
  return s;
}

std::uint64_t count_batches(std::size_t n, std::size_t batch_size) {
  return (n + batch_size - 1) / batch_size;
}

// One optimizer step on the accumulated gradients.
void apply_step(EncoderModel<float>& model, std::vector<Parameter<float>*>& ptrs,
                AdamState<float>& adam, const TrainConfig& config, double lr) {
  if (config.max_grad_norm) clip_grad_norm<float>(ptrs, *config.max_grad_norm);
  adam.step(lr);
  model.zero_grad();
}

}  // namespace

TrainResult pretrain_mlm(const std::vector<std::string>& corpus, const Vocab& vocab,
                         const ModelConfig& model_config, const TrainConfig& config) {
  if (corpus.empty()) throw InvalidArgument("pretrain_mlm: empty corpus");
  config.validate();
  if (model_config.vocab_size != vocab.size()) {
    throw DimensionError("model vocab_size " + std::to_string(model_config.vocab_size) +
                         " differs from vocabulary size " + std::to_string(vocab.size()));
  }
  EncoderModel<float> model(model_config, sub_seed(config.seed, "init"));
  auto ptrs = model.parameter_ptrs();
  AdamState<float> adam(ptrs);
  Rng dropout_rng(sub_seed(config.seed, "dropout"));

  TrainResult result;
  result.total_steps = config.epochs * count_batches(corpus.size(), config.batch_size);
  const LrSchedule schedule = make_schedule(config, result.total_steps);
  result.warmup_steps = schedule.warmup_steps;
  const std::uint64_t shuffle_seed = sub_seed(config.seed, "shuffle");
  const std::uint64_t mask_seed = sub_seed(config.seed, "mask");

  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_batches(corpus, vocab, config.batch_size, model_config.max_len,
                                      splitmix64(shuffle_seed + epoch));
    double epoch_loss = 0.0;
    std::size_t counted = 0;
    for (const auto& plain : batches) {
      ++step;
      const TokenBatch batch =
          mlm_mask(plain, config.mask_prob, splitmix64(mask_seed + step), vocab.size());
      Forward<float> fwd(model, &dropout_rng);
      const auto loss = fwd.mlm_loss(batch);
      if (!loss) continue;
      fwd.backward(*loss);
      const double lr = lr_at(schedule, step);
      apply_step(model, ptrs, adam, config, lr);
      const double value = loss->value()[0];
      result.log.push_back({step, lr, value});
      epoch_loss += value;
      ++counted;
    }
    result.epoch_mean_loss.push_back(counted ? epoch_loss / static_cast<double>(counted) : 0.0);
  }
  Provenance prov;
  prov.phase = "pretrained";
  prov.seed = config.seed;
  prov.lr = config.base_lr;
  prov.pooling = pooling_name(config.pooling.strategy);
  prov.pool_include_specials = config.pooling.include_specials;
  prov.data_fingerprint = fingerprint(corpus);
  result.checkpoint = Checkpoint::from_model(model, vocab, prov);
  return result;
}

TrainResult finetune_defsent(const Checkpoint& pretrained,
                             const std::vector<DefinitionEntry>& train,
                             const TrainConfig& config) {
  config.validate();
  if (pretrained.provenance.phase != "pretrained") {
    throw InvalidArgument("finetune_defsent expects a pretrained checkpoint, got phase '" +
                          pretrained.provenance.phase + "'");
  }
  if (train.empty()) throw InsufficientData("finetune_defsent: no training entries");
  const Vocab& vocab = pretrained.vocab;
  std::vector<std::string> fp_items;
  for (const auto& e : train) {
    if (e.word_id < 0 || headword_id(e.word, vocab) != e.word_id) {
      throw InvalidArgument("entry '" + e.word +
                            "' is out of vocabulary or was not OOV-filtered");
    }
    fp_items.push_back(e.word + '\t' + e.definition);
  }

  EncoderModel<float> model = pretrained.to_model();
  model.set_prediction_head_trainable(!config.freeze_prediction_layer);
  auto ptrs = model.parameter_ptrs();
  AdamState<float> adam(ptrs);
  Rng dropout_rng(sub_seed(config.seed, "dropout"));

  TrainResult result;
  result.total_steps = config.epochs * count_batches(train.size(), config.batch_size);
  const LrSchedule schedule = make_schedule(config, result.total_steps);
  result.warmup_steps = schedule.warmup_steps;
  const std::uint64_t shuffle_seed = sub_seed(config.seed, "shuffle");

  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_batches(train, vocab, config.batch_size, model.config().max_len,
                                      splitmix64(shuffle_seed + epoch));
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      ++step;
      Forward<float> fwd(model, &dropout_rng);
      const Var<float> loss = fwd.defsent_loss(batch, config.pooling);
      fwd.backward(loss);
      const double lr = lr_at(schedule, step);
      apply_step(model, ptrs, adam, config, lr);
      result.log.push_back({step, lr, loss.value()[0]});
      epoch_loss += loss.value()[0];
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(batches.size()));
  }
  Provenance prov;
  prov.phase = "finetuned";
  prov.seed = config.seed;
  prov.lr = config.base_lr;
  prov.pooling = pooling_name(config.pooling.strategy);
  prov.pool_include_specials = config.pooling.include_specials;
  prov.data_fingerprint = fingerprint(fp_items);
  result.checkpoint = Checkpoint::from_model(model, vocab, prov);
  return result;
}

std::vector<double> default_grid_exponents() {
  std::vector<double> xs;
  for (int i = 0; i <= 14; ++i) xs.push_back(0.5 * i);
  return xs;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

GridSearchResult lr_grid_search(const Checkpoint& pretrained, const SplitCorpus& split,
                                const TrainConfig& config, std::span<const double> exponents,
                                double base, std::size_t threads) {
  if (exponents.empty()) throw InvalidArgument("lr_grid_search: empty grid");
  if (split.dev.empty()) throw InsufficientData("lr_grid_search: empty dev split");
  if (!(base > 0.0)) throw InvalidArgument("lr_grid_search: base must be positive");
  GridSearchResult result;
  result.candidates.resize(exponents.size());
  parallel_for(exponents.size(), threads, [&](std::size_t i) {
    TrainConfig c = config;
    c.base_lr = std::pow(2.0, exponents[i]) * base;
    const TrainResult run = finetune_defsent(pretrained, split.train, c);
    const RankReport dev = eval_word_prediction(run.checkpoint.to_model(), pretrained.vocab,
                                                split.dev, c.pooling);
    result.candidates[i] = {exponents[i], c.base_lr, dev.mrr, c.seed};
  });
  for (std::size_t i = 1; i < result.candidates.size(); ++i) {
    const auto& cand = result.candidates[i];
    const auto& best = result.candidates[result.selected];
    if (cand.dev_mrr > best.dev_mrr || (cand.dev_mrr == best.dev_mrr && cand.lr < best.lr)) {
      result.selected = i;
    }
  }
  return result;
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  s.per_seed.assign(values.begin(), values.end());
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / n);
  return s;
}

MultiSeedReport multi_seed(const SeedRun& run, std::span<const std::uint64_t> seeds,
                           std::size_t threads) {
  if (seeds.empty()) throw InvalidArgument("multi_seed: no seeds");
  std::vector<std::map<std::string, double>> results(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) { results[i] = run(seeds[i]); });
  MultiSeedReport report;
  report.seeds.assign(seeds.begin(), seeds.end());
  for (const auto& [name, _] : results.front()) {
    std::vector<double> values;
    for (const auto& r : results) {
      const auto it = r.find(name);
      if (it == r.end()) throw InvalidArgument("multi_seed: metric " + name + " missing for a seed");
      values.push_back(it->second);
    }
    report.metrics[name] = summarize(values);
  }
  return report;
}

}  // namespace defsent
