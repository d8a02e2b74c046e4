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

#include "defsent/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace defsent {

std::string format_fraction(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  std::string s(buf);
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
  return s;
}

std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value * 100.0);
  return buf;
}

std::string format_mean_std(const MetricSummary& summary, MetricStyle style) {
  const auto fmt = style == MetricStyle::kFraction ? format_fraction : format_percent;
  return fmt(summary.mean) + " ± " + fmt(summary.std);
}

nlohmann::json to_json(const RankReport& r) {
  return {{"mrr", r.mrr}, {"top1", r.top1}, {"top3", r.top3}, {"top10", r.top10},
          {"n_examples", r.n_examples}};
}

nlohmann::json to_json(const STSResult& r) {
  return {{"dataset", r.dataset}, {"spearman", r.rho}, {"n_pairs", r.n_pairs}};
}

nlohmann::json to_json(const ProbeReport& r) {
  return {{"fold_accuracies", r.fold_accuracies},
          {"fold_sizes", r.fold_sizes},
          {"mean_accuracy", r.mean_accuracy},
          {"folds", r.folds},
          {"seed", r.seed}};
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {{"batch_size", c.batch_size},
                      {"epochs", c.epochs},
                      {"base_lr", c.base_lr},
                      {"warmup_fraction", c.warmup_fraction},
                      {"seed", c.seed},
                      {"pooling", pooling_name(c.pooling.strategy)},
                      {"pool_include_specials", c.pooling.include_specials},
                      {"freeze_prediction_layer", c.freeze_prediction_layer},
                      {"decay", decay_name(c.decay)},
                      {"mask_prob", c.mask_prob}};
  j["max_grad_norm"] = c.max_grad_norm ? nlohmann::json(*c.max_grad_norm) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const GridSearchResult& r) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : r.candidates) {
    cands.push_back({{"exponent", c.exponent}, {"lr", c.lr}, {"dev_mrr", c.dev_mrr}, {"seed", c.seed}});
  }
  return {{"candidates", cands},
          {"selected_index", r.selected},
          {"selected_lr", r.selected_lr()}};
}

nlohmann::json to_json(const MultiSeedReport& r) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, s] : r.metrics) {
    out[name] = {{"mean", s.mean}, {"std", s.std}, {"per_seed", s.per_seed}};
  }
  return out;
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<TableRow>& rows) {
  // Display width: count UTF-8 lead bytes only.
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (std::size_t i = 0; i < header.size(); ++i) widths[i] = width(header[i]);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.cells.size() && i < widths.size(); ++i) {
      widths[i] = std::max(widths[i], width(r.cells[i]));
    }
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const std::string cell = i < cells.size() ? cells[i] : "";
      const std::string pad(widths[i] - width(cell), ' ');
      if (i > 0) out << "  ";
      out << (i == 0 ? cell + pad : pad + cell);
    }
    out << '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (auto w : widths) total += w;
  out << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
  for (const auto& r : rows) emit(r.cells);
  return out.str();
}

std::string rank_table(const std::string& pooling, const std::string& lr_label,
                       const MultiSeedReport& report, const std::string& prefix) {
  auto cell = [&](const std::string& metric) {
    const auto it = report.metrics.find(prefix + metric);
    return it == report.metrics.end() ? std::string("-")
                                      : format_mean_std(it->second, MetricStyle::kFraction);
  };
  return render_table({"Pooling", "lr", "MRR", "Top1", "Top3", "Top10"},
                      {{{pooling, lr_label, cell("mrr"), cell("top1"), cell("top3"), cell("top10")}}});
}

}  // namespace defsent
