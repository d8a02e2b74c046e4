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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "defsent/evaluation.hpp"
#include "defsent/training.hpp"

namespace defsent {

// ".3200": four decimals, no leading zero (MRR / accuracy style).
std::string format_fraction(double value);
// "74.14": value x 100 with two decimals (rho / percent style).
std::string format_percent(double value);

enum class MetricStyle { kFraction, kPercent };

// "mean ± std" in the given style.
std::string format_mean_std(const MetricSummary& summary, MetricStyle style);

nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const RankReport& report);
nlohmann::json to_json(const STSResult& result);
nlohmann::json to_json(const ProbeReport& report);
nlohmann::json to_json(const GridSearchResult& result);
// {metric -> {mean, std, per_seed}}
nlohmann::json to_json(const MultiSeedReport& report);

struct TableRow {
  std::vector<std::string> cells;
};

// Left-aligned first column, right-aligned remaining columns.
std::string render_table(const std::vector<std::string>& header, const std::vector<TableRow>& rows);

// Word prediction summary: pooling | lr | MRR | Top1 | Top3 | Top10.
std::string rank_table(const std::string& pooling, const std::string& lr_label,
                       const MultiSeedReport& report, const std::string& prefix = "");

}  // namespace defsent
