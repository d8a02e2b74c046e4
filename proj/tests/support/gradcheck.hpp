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

// Central finite-difference gradient checks in double precision.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "defsent/autodiff.hpp"

namespace defsent::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
// gradient is (numerically) zero from dominating through round-off.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

using LossFn = std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>;

// Builds the loss from tape variables carrying `inputs`, backpropagates, then
// compares every input coordinate against (f(x+h) - f(x-h)) / 2h.
inline GradCheckResult grad_check(std::vector<Tensor<double>> inputs, const LossFn& loss,
                                  double h = 1e-5) {
  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    Var<double> out = loss(tape, vars);
    tape.backward(out);
    for (auto& v : vars) {
      auto g = tape.grad(v);
      analytic.emplace_back(g.begin(), g.end());
    }
  }
  auto eval = [&]() {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : inputs) vars.push_back(tape.constant(t));
    return loss(tape, vars).value()[0];
  };
  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double orig = inputs[i][j];
      inputs[i][j] = orig + h;
      const double up = eval();
      inputs[i][j] = orig - h;
      const double down = eval();
      inputs[i][j] = orig;
      const double numeric = (up - down) / (2 * h);
      result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[i][j], numeric));
      ++result.checked;
    }
  }
  return result;
}

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

}  // namespace defsent::testing
