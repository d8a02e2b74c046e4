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


#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "defsent/evaluation.hpp"
#include "defsent/report.hpp"
#include "defsent/rng.hpp"

using namespace defsent;

namespace {

std::size_t brute_rank(const std::vector<double>& s, std::size_t target) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (s[order[i]] == s[target]) return i + 1;
  }
  return 0;
}

long double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<long double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::size_t lt = 0, eq = 0;
      for (double w : v) {
        lt += w < v[i];
        eq += w == v[i];
      }
      r[i] = 1.0L + lt + (eq - 1) / 2.0L;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const long double n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += rx[i], my += ry[i];
  mx /= n, my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double sp(std::vector<double> x, std::vector<double> y) { return spearman_rho(x, y); }

}  // namespace

TEST_CASE("rank fixtures") {
  const std::vector<double> a{3, 2, 2, 1};
  CHECK(rank_of_target(std::span<const double>(a), 1) == 2);
  CHECK(rank_of_target(std::span<const double>(a), 2) == 2);
  CHECK(rank_of_target(std::span<const double>(a), 0) == 1);
  CHECK(rank_of_target(std::span<const double>(a), 3) == 4);
  const std::vector<float> flat(7, 0.5f);
  for (std::size_t t = 0; t < 7; ++t) CHECK(rank_of_target(std::span<const float>(flat), t) == 1);
  CHECK_THROWS_AS(rank_of_target(std::span<const double>(a), 4), IndexError);
}

TEST_CASE("rank, metrics and spearman agree with brute force") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(60);
    const bool ties = trial % 2 == 0;
    std::vector<double> s(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = ties ? static_cast<double>(rng.uniform_index(6)) : rng.normal();
      t[i] = ties ? static_cast<double>(rng.uniform_index(5)) : rng.normal();
    }
    const std::size_t target = rng.uniform_index(n);
    CHECK(rank_of_target(std::span<const double>(s), target) == brute_rank(s, target));

    std::vector<std::size_t> ranks(n);
    for (auto& r : ranks) r = 1 + rng.uniform_index(20);
    const RankReport rep = rank_metrics(ranks);
    double mrr = 0, t1 = 0, t3 = 0, t10 = 0;
    for (auto r : ranks) {
      mrr += 1.0 / r;
      t1 += r <= 1, t3 += r <= 3, t10 += r <= 10;
    }
    CHECK(rep.mrr == doctest::Approx(mrr / n).epsilon(1e-14));
    CHECK(rep.top1 == t1 / n);
    CHECK(rep.top3 == t3 / n);
    CHECK(rep.top10 == t10 / n);
    CHECK(rep.n_examples == n);
    CHECK(rep.top1 <= rep.top3);
    CHECK(rep.top3 <= rep.top10);
    CHECK(rep.mrr >= rep.top1);
    CHECK(rep.mrr > 0.0);
    CHECK(rep.mrr <= 1.0);

    auto constant = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
    };
    if (constant(s) || constant(t)) continue;
    const double rho = spearman_rho(s, t);
    CHECK(std::abs(rho - static_cast<double>(brute_spearman(s, t))) < 1e-10);
    CHECK(rho == doctest::Approx(spearman_rho(t, s)).epsilon(1e-14));
  }
}

TEST_CASE("rank metrics reject empty and zero ranks") {
  CHECK_THROWS_AS(rank_metrics({}), InvalidArgument);
  const std::vector<std::size_t> zero{1, 0};
  CHECK_THROWS_AS(rank_metrics(zero), InvalidArgument);
}

TEST_CASE("random ranking baseline is the harmonic mean rank") {
  CHECK(random_ranking_mrr(1) == 1.0);
  CHECK(random_ranking_mrr(4) == doctest::Approx((1 + 0.5 + 1.0 / 3 + 0.25) / 4));
  const double v = 2000;
  CHECK(random_ranking_mrr(2000) == doctest::Approx((std::log(v) + 0.5772156649) / v).epsilon(1e-3));
}

TEST_CASE("spearman fixtures") {
  CHECK(sp({1, 2, 3, 4}, {1, 2, 3, 4}) == doctest::Approx(1.0));
  CHECK(sp({1, 2, 3}, {3, 1, 2}) == doctest::Approx(-0.5).epsilon(1e-15));
  // scipy.stats.spearmanr([1,2,2,3],[1,2,3,4])
  CHECK(std::abs(sp({1, 2, 2, 3}, {1, 2, 3, 4}) - 0.9486832980505139) < 1e-12);
  CHECK_THROWS_AS(sp({1, 2}, {1, 2}), InsufficientData);
  CHECK_THROWS_AS(sp({1, 2, 3}, {1, 2}), DimensionError);
  CHECK_THROWS_AS(sp({1, 1, 1}, {1, 2, 3}), InvalidArgument);
}

TEST_CASE("spearman is invariant under increasing transforms") {
  Rng rng(8);
  std::vector<double> x(40), y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    x[i] = rng.normal();
    y[i] = x[i] + rng.normal();
  }
  std::vector<double> ex(40), lx(40);
  for (std::size_t i = 0; i < 40; ++i) {
    ex[i] = std::exp(x[i]);
    lx[i] = 2 * x[i] + 7;
  }
  const double base = spearman_rho(x, y);
  CHECK(spearman_rho(ex, y) == doctest::Approx(base).epsilon(1e-14));
  CHECK(spearman_rho(lx, y) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("average ranks split ties") {
  const std::vector<double> v{10, 20, 20, 5};
  CHECK(average_ranks(v) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("cosine fixtures") {
  const std::vector<double> e1{1, 0}, e2{0, 1};
  CHECK(cosine_similarity(std::span<const double>(e1), std::span<const double>(e2)) == 0.0);
  Rng rng(5);
  std::vector<double> w(16), cw(16), nw(16);
  for (std::size_t i = 0; i < 16; ++i) {
    w[i] = rng.normal();
    cw[i] = 3.7 * w[i];
    nw[i] = -0.2 * w[i];
  }
  CHECK(std::abs(cosine_similarity(std::span<const double>(w), std::span<const double>(cw)) - 1.0) < 1e-6);
  CHECK(std::abs(cosine_similarity(std::span<const double>(w), std::span<const double>(nw)) + 1.0) < 1e-6);
  const std::vector<double> zero(16, 0.0);
  CHECK_THROWS_AS(cosine_similarity(std::span<const double>(w), std::span<const double>(zero)), InvalidArgument);
  CHECK_THROWS_AS(cosine_similarity(std::span<const double>(w), std::span<const double>(e1)), DimensionError);
}

TEST_CASE("cosine matches a high precision recomputation") {
  std::vector<double> u(16), v(16);
  for (int i = 0; i < 16; ++i) {
    u[i] = ((i * 37) % 11 - 5) / 7.0;
    v[i] = ((i * 53) % 13 - 6) / 3.0;
  }
  // mpmath at 50 digits
  CHECK(std::abs(cosine_similarity(std::span<const double>(u), std::span<const double>(v)) -
                 0.0734561968061851036428514) < 1e-12);
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    long double dot = 0, nu = 0, nv = 0;
    for (int i = 0; i < 16; ++i) {
      u[i] = rng.normal();
      v[i] = rng.normal();
      dot += static_cast<long double>(u[i]) * v[i];
      nu += static_cast<long double>(u[i]) * u[i];
      nv += static_cast<long double>(v[i]) * v[i];
    }
    const long double want = dot / std::sqrt(nu * nv);
    CHECK(std::abs(cosine_similarity(std::span<const double>(u), std::span<const double>(v)) -
                   static_cast<double>(want)) < 1e-12);
  }
}

TEST_CASE("sts harness recovers a constructed order") {
  // sentence "s<k>" embeds at angle k * 0.1; pair k is (base, s<k>)
  std::map<std::string, std::vector<double>> table{{"base", {1.0, 0.0}}};
  std::vector<STSPair> pairs;
  for (int k = 1; k <= 12; ++k) {
    const double a = 0.1 * k;
    table["s" + std::to_string(k)] = {std::cos(a), std::sin(a)};
    pairs.push_back({"base", "s" + std::to_string(k), 5.0 - 0.4 * k});
  }
  SentenceEmbedder embed = [&](const std::string& s) { return table.at(s); };
  const STSResult r = eval_sts(embed, pairs, "fixture");
  CHECK(std::abs(r.rho - 1.0) < 1e-12);
  CHECK(r.n_pairs == 12);
  CHECK(r.dataset == "fixture");
  for (auto& p : pairs) p.gold = 5.0 - p.gold;
  CHECK(std::abs(eval_sts(embed, pairs).rho + 1.0) < 1e-12);
  std::vector<STSPair> same(4, STSPair{"base", "s1", 1.0});
  same[0].gold = 2.0;
  CHECK_THROWS(eval_sts(embed, same));
}

TEST_CASE("probe separates a separable set") {
  Rng rng(3);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    const int label = i % 2;
    const double offset = 0.5 + 2.5 * rng.uniform();
    x.push_back({label ? offset : -offset, 4 * rng.normal()});
    y.push_back(label);
  }
  ProbeOptions opt;
  opt.seed = 11;
  const ProbeReport r = probe_classifier(x, y, opt);
  CHECK(r.folds == 10);
  CHECK(r.fold_accuracies.size() == 10);
  CHECK(r.mean_accuracy == 1.0);
  const ProbeReport again = probe_classifier(x, y, opt);
  CHECK(again.fold_accuracies == r.fold_accuracies);
  CHECK(again.fold_sizes == r.fold_sizes);
}

TEST_CASE("probe on constant features falls back to the majority class") {
  std::vector<std::vector<double>> x(100, std::vector<double>{1.0, -2.0, 0.5});
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) y.push_back(i < 60 ? 0 : 1);
  ProbeOptions opt;
  opt.seed = 4;
  const ProbeReport r = probe_classifier(x, y, opt);
  CHECK(std::abs(r.mean_accuracy - 0.6) <= 0.1);
  double mean = 0;
  for (double a : r.fold_accuracies) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    mean += a;
  }
  CHECK(r.mean_accuracy == doctest::Approx(mean / 10));
}

TEST_CASE("probe folds differ in size by at most one") {
  Rng rng(1);
  for (std::size_t n : {10u, 23u, 105u, 207u}) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back({rng.normal()});
      y.push_back(static_cast<int>(i % 3));
    }
    const ProbeReport r = probe_classifier(x, y, {});
    const auto [lo, hi] = std::minmax_element(r.fold_sizes.begin(), r.fold_sizes.end());
    CHECK(*hi - *lo <= 1);
    CHECK(std::accumulate(r.fold_sizes.begin(), r.fold_sizes.end(), std::size_t{0}) == n);
  }
  std::vector<std::vector<double>> few(5, std::vector<double>{1.0});
  std::vector<int> labels{0, 1, 0, 1, 0};
  CHECK_THROWS_AS(probe_classifier(few, labels, {}), InsufficientData);
  std::vector<std::vector<double>> many(20, std::vector<double>{1.0});
  std::vector<int> one(20, 0);
  CHECK_THROWS_AS(probe_classifier(many, one, {}), InsufficientData);
}

TEST_CASE("report formatting") {
  CHECK(format_fraction(0.32) == ".3200");
  CHECK(format_fraction(1.0) == "1.0000");
  CHECK(format_percent(0.74139) == "74.14");
  MetricSummary s{0.32, 0.002, {}};
  CHECK(format_mean_std(s, MetricStyle::kFraction) == ".3200 ± .0020");
  CHECK(format_mean_std(s, MetricStyle::kPercent) == "32.00 ± 0.20");
  RankReport r{0.5, 0.25, 0.5, 0.75, 4};
  const auto j = to_json(r);
  CHECK(j["mrr"] == 0.5);
  CHECK(j["n_examples"] == 4);
  const std::string t = render_table({"a", "bb"}, {{{"x", "1"}}, {{"long", "22"}}});
  CHECK(t.find("long") != std::string::npos);
}
