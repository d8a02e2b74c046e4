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

#include "defsent/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "defsent/batching.hpp"
#include "defsent/error.hpp"
#include "defsent/rng.hpp"

namespace defsent {

namespace {

template <typename T>
std::size_t rank_impl(std::span<const T> scores, std::size_t target) {
  if (target >= scores.size()) {
    throw IndexError("rank_of_target: target " + std::to_string(target) + " outside [0, " +
                     std::to_string(scores.size()) + ")");
  }
  const T t = scores[target];
  std::size_t greater = 0;
  for (T s : scores) greater += s > t ? 1 : 0;
  return greater + 1;
}

}  // namespace

std::size_t rank_of_target(std::span<const float> scores, std::size_t target) {
  return rank_impl(scores, target);
}

std::size_t rank_of_target(std::span<const double> scores, std::size_t target) {
  return rank_impl(scores, target);
}

RankReport rank_metrics(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw InvalidArgument("rank_metrics: no ranks");
  RankReport r;
  double rr = 0.0;
  std::size_t t1 = 0, t3 = 0, t10 = 0;
  for (std::size_t rank : ranks) {
    if (rank < 1) throw InvalidArgument("rank_metrics: ranks start at 1");
    rr += 1.0 / static_cast<double>(rank);
    t1 += rank <= 1;
    t3 += rank <= 3;
    t10 += rank <= 10;
  }
  const double n = static_cast<double>(ranks.size());
  r.mrr = rr / n;
  r.top1 = static_cast<double>(t1) / n;
  r.top3 = static_cast<double>(t3) / n;
  r.top10 = static_cast<double>(t10) / n;
  r.n_examples = ranks.size();
  return r;
}

RankReport eval_word_prediction(const EncoderModel<float>& model, const Vocab& vocab,
                                const std::vector<DefinitionEntry>& entries,
                                const Pooling& pooling, std::size_t batch_size) {
  if (entries.empty()) throw InvalidArgument("eval_word_prediction: no entries");
  std::vector<std::size_t> ranks;
  ranks.reserve(entries.size());
  for (const auto& batch :
       make_batches(entries, vocab, batch_size, model.config().max_len, std::nullopt)) {
    const Tensor<float> u = embed_batch(model, batch, pooling);
    const auto pred = predict_word(model, u);
    for (std::size_t r = 0; r < batch.batch; ++r) {
      ranks.push_back(rank_of_target(pred.logits.row(r), static_cast<std::size_t>(batch.targets[r])));
    }
  }
  return rank_metrics(ranks);
}

double random_ranking_mrr(std::size_t vocab_size) {
  double h = 0.0;
  for (std::size_t r = 1; r <= vocab_size; ++r) h += 1.0 / static_cast<double>(r);
  return h / static_cast<double>(vocab_size);
}

MaskedLmReport eval_masked_lm(const EncoderModel<float>& model, const Vocab& vocab,
                              const std::vector<std::string>& sentences, double mask_prob,
                              std::uint64_t seed, std::size_t batch_size) {
  if (sentences.empty()) throw InsufficientData("eval_masked_lm: no sentences");
  const auto batches =
      make_batches(sentences, vocab, batch_size, model.config().max_len, std::nullopt);
  std::size_t hits = 0, total = 0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const TokenBatch masked = mlm_mask(batches[b], mask_prob, splitmix64(seed + b), vocab.size());
    Forward<float> fwd(model);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < masked.labels.size(); ++i) {
      if (masked.labels[i] != kNoLabel) rows.push_back(i);
    }
    if (rows.empty()) continue;
    const Var<float> emb = fwd.encode(masked);
    const Tensor<float> logits =
        fwd.prediction_logits(gather_rows(emb, std::span<const std::size_t>(rows))).value();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = logits.row(r);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      hits += best == masked.labels[rows[r]];
      ++total;
    }
  }
  MaskedLmReport report;
  report.n_masked = total;
  report.accuracy = total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
  return report;
}

namespace {

template <typename T>
double cosine_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size() || u.empty()) {
    throw DimensionError("cosine_similarity: vectors of length " + std::to_string(u.size()) +
                         " and " + std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    nu += static_cast<double>(u[i]) * u[i];
    nv += static_cast<double>(v[i]) * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw InvalidArgument("cosine_similarity: zero vector");
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  return cosine_impl(u, v);
}

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
  return cosine_impl(u, v);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share the mean of ranks i+1..j+1
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionError("spearman_rho: series of length " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
  }
  if (x.size() < 3) throw InsufficientData("spearman_rho needs at least 3 observations");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw NumericError("spearman_rho: non-finite input");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("spearman_rho undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

STSResult eval_sts(const SentenceEmbedder& embed, const std::vector<STSPair>& pairs,
                   const std::string& dataset) {
  if (pairs.size() < 3) throw InsufficientData("eval_sts needs at least 3 pairs");
  std::vector<double> sims, gold;
  for (const auto& p : pairs) {
    const auto a = embed(p.sentence_a);
    const auto b = embed(p.sentence_b);
    sims.push_back(cosine_similarity(std::span<const double>(a), std::span<const double>(b)));
    gold.push_back(p.gold);
  }
  if (std::all_of(sims.begin(), sims.end(), [&](double s) { return s == sims.front(); })) {
    throw InvalidArgument("eval_sts: all similarities are identical");
  }
  return {dataset, spearman_rho(sims, gold), pairs.size()};
}

STSResult eval_sts(const EncoderModel<float>& model, const Vocab& vocab,
                   const std::vector<STSPair>& pairs, const Pooling& pooling,
                   const std::string& dataset) {
  SentenceEmbedder embed = [&](const std::string& s) {
    const auto v = embed_sentence(model, vocab, s, pooling);
    return std::vector<double>(v.begin(), v.end());
  };
  return eval_sts(embed, pairs, dataset);
}

namespace {

// Softmax regression weights [(d + 1) x C], last row is the bias.
struct LogisticModel {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<double> w;
  std::vector<double> mean, scale;

  std::vector<double> features(const std::vector<double>& x) const {
    std::vector<double> f(dim);
    for (std::size_t j = 0; j < dim; ++j) f[j] = (x[j] - mean[j]) * scale[j];
    return f;
  }

  void logits(const std::vector<double>& f, std::vector<double>& out) const {
    out.assign(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c) out[c] = w[dim * classes + c];
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t c = 0; c < classes; ++c) out[c] += f[j] * w[j * classes + c];
    }
  }

  int predict(const std::vector<double>& x) const {
    std::vector<double> z;
    logits(features(x), z);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
};

LogisticModel fit_logistic(const std::vector<const std::vector<double>*>& xs,
                           const std::vector<int>& ys, std::size_t classes,
                           const ProbeOptions& opt) {
  LogisticModel m;
  m.dim = xs.front()->size();
  m.classes = classes;
  m.mean.assign(m.dim, 0.0);
  m.scale.assign(m.dim, 1.0);
  const double n = static_cast<double>(xs.size());
  for (const auto* x : xs) {
    for (std::size_t j = 0; j < m.dim; ++j) m.mean[j] += (*x)[j] / n;
  }
  for (std::size_t j = 0; j < m.dim; ++j) {
    double var = 0.0;
    for (const auto* x : xs) var += ((*x)[j] - m.mean[j]) * ((*x)[j] - m.mean[j]) / n;
    m.scale[j] = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
  }
  std::vector<std::vector<double>> feats;
  feats.reserve(xs.size());
  for (const auto* x : xs) feats.push_back(m.features(*x));

  m.w.assign((m.dim + 1) * classes, 0.0);
  std::vector<double> grad(m.w.size()), z;
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < feats.size(); ++i) {
      m.logits(feats[i], z);
      const double mx = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (auto& v : z) {
        v = std::exp(v - mx);
        s += v;
      }
      for (std::size_t c = 0; c < classes; ++c) {
        const double err = z[c] / s - (ys[i] == static_cast<int>(c) ? 1.0 : 0.0);
        for (std::size_t j = 0; j < m.dim; ++j) grad[j * classes + c] += err * feats[i][j] / n;
        grad[m.dim * classes + c] += err / n;
      }
    }
    for (std::size_t j = 0; j < m.dim * classes; ++j) grad[j] += opt.l2 * m.w[j];
    for (std::size_t j = 0; j < m.w.size(); ++j) m.w[j] -= opt.learning_rate * grad[j];
  }
  return m;
}

}  // namespace

ProbeReport probe_classifier(const std::vector<std::vector<double>>& embeddings,
                             std::span<const int> labels, const ProbeOptions& options) {
  const std::size_t n = embeddings.size();
  const std::size_t k = options.folds;
  if (labels.size() != n) throw DimensionError("probe: one label per embedding required");
  if (k < 2) throw InvalidArgument("probe: need at least 2 folds");
  if (n < k) {
    throw InsufficientData("probe: " + std::to_string(n) + " samples for " + std::to_string(k) +
                           " folds");
  }
  const std::size_t dim = embeddings.front().size();
  for (const auto& e : embeddings) {
    if (e.size() != dim || dim == 0) throw DimensionError("probe: embeddings differ in length");
  }
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw InvalidArgument("probe: labels must be non-negative");
    max_label = std::max(max_label, l);
  }
  const std::size_t classes = static_cast<std::size_t>(max_label) + 1;
  std::vector<std::size_t> per_class(classes, 0);
  for (int l : labels) ++per_class[static_cast<std::size_t>(l)];
  if (std::count_if(per_class.begin(), per_class.end(), [](std::size_t c) { return c > 0; }) < 2) {
    throw InsufficientData("probe: need at least two classes");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(options.seed);
  rng.shuffle(order.begin(), order.end());

  ProbeReport report;
  report.folds = k;
  report.seed = options.seed;
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    const std::size_t end = start + size;
    std::vector<const std::vector<double>*> train_x;
    std::vector<int> train_y;
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= start && i < end) continue;
      train_x.push_back(&embeddings[order[i]]);
      train_y.push_back(labels[order[i]]);
    }
    const LogisticModel model = fit_logistic(train_x, train_y, classes, options);
    std::size_t correct = 0;
    for (std::size_t i = start; i < end; ++i) {
      correct += model.predict(embeddings[order[i]]) == labels[order[i]];
    }
    report.fold_accuracies.push_back(static_cast<double>(correct) / static_cast<double>(size));
    report.fold_sizes.push_back(size);
    start = end;
  }
  report.mean_accuracy =
      std::accumulate(report.fold_accuracies.begin(), report.fold_accuracies.end(), 0.0) /
      static_cast<double>(k);
  return report;
}

}  // namespace defsent
