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


#include <cmath>
#include <cstring>

#include "doctest.h"
#include "defsent/report.hpp"
#include "defsent/training.hpp"
#include "support/fixtures.hpp"
#include "defsent/synthetic.hpp"

using namespace defsent;
using namespace defsent::testing;

namespace {

struct Fixture {
  synthetic::World world;
  Vocab vocab;
  std::vector<DefinitionEntry> entries;
  TrainResult pretrained;
};

TrainConfig pretrain_config(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.base_lr = 2e-3;
  c.mask_prob = 0.3;
  c.seed = 1;
  return c;
}

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.world = synthetic::overfit_world();
    x.vocab = synthetic::world_vocab(x.world);
    x.entries = filter_oov(x.world.dictionary, x.vocab);
    x.pretrained = pretrain_mlm(x.world.corpus, x.vocab, synthetic::small_model(x.vocab.size()),
                                pretrain_config(100));
    return x;
  }();
  return f;
}

bool head_bytes_equal(const Checkpoint& a, const Checkpoint& b) {
  const EncoderModel<float> ma = a.to_model(), mb = b.to_model();
  for (auto slot : ma.prediction_head_slots()) {
    if (!bitwise_equal(ma.params()[slot].value, mb.params()[slot].value)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("warmup is the floor of ten percent of steps") {
  CHECK(warmup_steps_for(100, 0.10) == 10);
  CHECK(warmup_steps_for(99, 0.10) == 9);
  CHECK(warmup_steps_for(5, 0.10) == 0);
  const auto& f = fixture();
  TrainConfig c;
  c.base_lr = 1e-3;
  c.epochs = 10;
  const TrainResult r = finetune_defsent(f.pretrained.checkpoint, f.entries, c);
  CHECK(r.total_steps == 20);  // 32 entries, batch 16
  CHECK(r.warmup_steps == 2);
  REQUIRE(r.log.size() == 20);
  CHECK(r.log[0].lr == doctest::Approx(5e-4));
  CHECK(r.log[1].lr == 1e-3);
  CHECK(r.log[19].lr == 1e-3);
}

TEST_CASE("default train config is batch 16, one epoch, ten percent warmup") {
  TrainConfig c;
  CHECK(c.batch_size == 16);
  CHECK(c.epochs == 1);
  CHECK(c.warmup_fraction == 0.10);
  CHECK(c.freeze_prediction_layer);
  CHECK(c.decay == LrDecay::kConstant);
}

TEST_CASE("pretraining halves the loss and beats chance on held-out text") {
  synthetic::WorldConfig wc;
  wc.num_words = 25;
  wc.values_per_category = 4;
  wc.corpus_sentences_per_word = 12;
  wc.seed = 5;
  const auto world = synthetic::make_world(wc);
  const std::vector<std::string> train(world.corpus.begin(), world.corpus.begin() + 200);
  const std::vector<std::string> held(world.corpus.begin() + 200, world.corpus.end());
  const Vocab vocab = synthetic::world_vocab(world);
  const TrainResult r = pretrain_mlm(train, vocab, synthetic::small_model(vocab.size()), pretrain_config(30));
  INFO("first " << r.log.front().loss << " last epoch " << r.epoch_mean_loss.back());
  CHECK(r.epoch_mean_loss.back() < 0.5 * r.log.front().loss);
  CHECK(r.checkpoint.provenance.phase == "pretrained");
  const auto acc = eval_masked_lm(r.checkpoint.to_model(), vocab, held, 0.15, 3);
  INFO("masked accuracy " << acc.accuracy << " over " << acc.n_masked);
  CHECK(acc.n_masked > 50);
  CHECK(acc.accuracy > 10.0 / static_cast<double>(vocab.size()));
}

TEST_CASE("pretraining is bitwise reproducible") {
  const auto& f = fixture();
  const std::vector<std::string> corpus(f.world.corpus.begin(), f.world.corpus.begin() + 64);
  const auto mc = synthetic::small_model(f.vocab.size());
  auto c = pretrain_config(2);
  const auto a = pretrain_mlm(corpus, f.vocab, mc, c), b = pretrain_mlm(corpus, f.vocab, mc, c);
  CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
  c.seed = 2;
  const auto other = pretrain_mlm(corpus, f.vocab, mc, c);
  CHECK(serialize_checkpoint(a.checkpoint) != serialize_checkpoint(other.checkpoint));
  CHECK_THROWS_AS(pretrain_mlm({}, f.vocab, mc, c), InvalidArgument);
}

TEST_CASE("fine-tuning leaves the prediction head bitwise unchanged") {
  const auto& f = fixture();
  for (auto s : {PoolingStrategy::kCls, PoolingStrategy::kMean, PoolingStrategy::kMax}) {
    TrainConfig c;
    c.base_lr = 5e-3;
    c.epochs = 3;
    c.pooling.strategy = s;
    c.max_grad_norm = 1.0;
    const TrainResult r = finetune_defsent(f.pretrained.checkpoint, f.entries, c);
    CHECK(head_bytes_equal(f.pretrained.checkpoint, r.checkpoint));
    CHECK(r.checkpoint.provenance.phase == "finetuned");
    CHECK(r.checkpoint.provenance.pooling == pooling_name(s));
    const auto& pos = "embeddings.position";
    CHECK_FALSE(bitwise_equal(f.pretrained.checkpoint.tensor(pos), r.checkpoint.tensor(pos)));
  }
}

TEST_CASE("unfrozen fine-tuning does move the head") {
  const auto& f = fixture();
  TrainConfig c;
  c.base_lr = 1e-3;
  c.freeze_prediction_layer = false;
  const TrainResult r = finetune_defsent(f.pretrained.checkpoint, f.entries, c);
  CHECK_FALSE(head_bytes_equal(f.pretrained.checkpoint, r.checkpoint));
}

TEST_CASE("no optimizer state exists for frozen parameters") {
  const auto& f = fixture();
  EncoderModel<float> m = f.pretrained.checkpoint.to_model();
  m.set_prediction_head_trainable(false);
  auto ptrs = m.parameter_ptrs();
  AdamState<float> adam(ptrs);
  std::size_t trainable = 0;
  for (auto& p : m.params()) trainable += p.trainable;
  CHECK(adam.allocated_count() == trainable);
  for (auto slot : m.prediction_head_slots()) CHECK_FALSE(adam.has_state_for(m.params()[slot]));
}

TEST_CASE("fine-tuning is deterministic") {
  const auto& f = fixture();
  TrainConfig c;
  c.base_lr = 1e-3;
  c.epochs = 2;
  c.seed = 4;
  const auto a = finetune_defsent(f.pretrained.checkpoint, f.entries, c);
  const auto b = finetune_defsent(f.pretrained.checkpoint, f.entries, c);
  CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
}

TEST_CASE("fine-tuning rejects bad inputs") {
  const auto& f = fixture();
  TrainConfig c;
  auto bad = f.entries;
  bad[0].word_id = -1;
  CHECK_THROWS_AS(finetune_defsent(f.pretrained.checkpoint, bad, c), InvalidArgument);
  auto wrong = f.entries;
  wrong[0].word_id = wrong[1].word_id;
  CHECK_THROWS_AS(finetune_defsent(f.pretrained.checkpoint, wrong, c), InvalidArgument);
  Checkpoint done = f.pretrained.checkpoint;
  done.provenance.phase = "finetuned";
  CHECK_THROWS_AS(finetune_defsent(done, f.entries, c), InvalidArgument);
  CHECK_THROWS_AS(finetune_defsent(f.pretrained.checkpoint, {}, c), InsufficientData);
  c.epochs = 0;
  CHECK_THROWS_AS(finetune_defsent(f.pretrained.checkpoint, f.entries, c), InvalidArgument);
}

TEST_CASE("overfit fixture reaches full train accuracy") {
  const auto& f = fixture();
  REQUIRE(f.entries.size() == 32);
  TrainConfig c;
  c.base_lr = 3e-3;
  c.epochs = 300;
  c.seed = 2;
  const TrainResult r = finetune_defsent(f.pretrained.checkpoint, f.entries, c);
  for (std::size_t e = 1; e < 10; ++e) CHECK(r.epoch_mean_loss[e] < r.epoch_mean_loss[e - 1]);
  const RankReport rep = eval_word_prediction(r.checkpoint.to_model(), f.vocab, f.entries, c.pooling);
  CHECK(rep.top1 >= 0.95);
  CHECK(head_bytes_equal(f.pretrained.checkpoint, r.checkpoint));
}

TEST_CASE("grid has fifteen candidates and ties go to the smaller lr") {
  const auto xs = default_grid_exponents();
  REQUIRE(xs.size() == 15);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(xs[i] == 0.5 * static_cast<double>(i));
  const auto& f = fixture();
  SplitCorpus split = split_by_word(f.entries, {}, 3);
  TrainConfig c;
  // Steps this small cannot move float weights, so every candidate ties.
  const auto tie = lr_grid_search(f.pretrained.checkpoint, split, c, xs, 1e-30);
  REQUIRE(tie.candidates.size() == 15);
  CHECK(tie.selected == 0);
  for (auto& cand : tie.candidates) CHECK(cand.dev_mrr == tie.candidates[0].dev_mrr);
  CHECK(tie.selected_lr() == 1e-30);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(tie.candidates[i].lr == doctest::Approx(std::pow(2.0, xs[i]) * 1e-30));
  }

  const std::vector<double> few{0.0, 4.0, 7.0};
  c.epochs = 2;
  const auto g = lr_grid_search(f.pretrained.checkpoint, split, c, few, 1e-4, 2);
  for (auto& cand : g.candidates) CHECK(g.candidates[g.selected].dev_mrr >= cand.dev_mrr);
  const auto g1 = lr_grid_search(f.pretrained.checkpoint, split, c, few, 1e-4, 1);
  for (std::size_t i = 0; i < few.size(); ++i) CHECK(g.candidates[i].dev_mrr == g1.candidates[i].dev_mrr);
  CHECK_THROWS_AS(lr_grid_search(f.pretrained.checkpoint, split, c, {}, 1e-4), InvalidArgument);
}

TEST_CASE("multi seed summary") {
  const std::vector<std::uint64_t> seeds{1, 2};
  auto report = multi_seed([](std::uint64_t s) { return std::map<std::string, double>{{"mrr", 0.2 * s}}; }, seeds);
  CHECK(report.metrics["mrr"].mean == doctest::Approx(0.3));
  CHECK(report.metrics["mrr"].std == doctest::Approx(0.1));
  CHECK(report.metrics["mrr"].per_seed == std::vector<double>{0.2, 0.4});
  const std::vector<std::uint64_t> one{9};
  auto single = multi_seed([](std::uint64_t) { return std::map<std::string, double>{{"x", 0.75}}; }, one);
  CHECK(single.metrics["x"].mean == 0.75);
  CHECK(single.metrics["x"].std == 0.0);
  CHECK(format_mean_std(report.metrics["mrr"], MetricStyle::kFraction) == ".3000 ± .1000");
  CHECK_THROWS_AS(multi_seed([](std::uint64_t) { return std::map<std::string, double>{}; }, {}), InvalidArgument);
}

TEST_CASE("parallel runs match sequential runs") {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  auto run = [](std::uint64_t s) { return std::map<std::string, double>{{"v", std::sqrt(double(s))}}; };
  CHECK(multi_seed(run, seeds, 3).metrics["v"].per_seed == multi_seed(run, seeds, 1).metrics["v"].per_seed);
  CHECK_THROWS_AS(parallel_for(4, 2, [](std::size_t i) { if (i == 2) throw InvalidArgument("boom"); }), InvalidArgument);
}
