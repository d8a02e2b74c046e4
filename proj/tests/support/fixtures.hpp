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

#include <cstring>
#include <vector>

#include "defsent/batching.hpp"
#include "defsent/model.hpp"
#include "support/gradcheck.hpp"

namespace defsent::testing {

inline ModelConfig tiny_config(std::size_t vocab = 64, std::size_t d = 16, std::size_t layers = 2) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = d;
  c.num_layers = layers;
  c.num_heads = 2;
  c.d_ff = 2 * d;
  c.max_len = 8;
  c.dropout_prob = 0.0;
  return c;
}

inline TokenBatch batch_of(const std::vector<std::vector<TokenId>>& rows,
                           std::vector<TokenId> targets = {}) {
  TokenBatch b = pad_batch(rows);
  b.targets = std::move(targets);
  return b;
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

// Max relative error of the full model loss gradient over every trainable
// parameter coordinate.
inline GradCheckResult model_grad_check(
    EncoderModel<double>& model,
    const std::function<Var<double>(Forward<double>&)>& loss, double h = 1e-5) {
  model.zero_grad();
  {
    Forward<double> fwd(model);
    fwd.backward(loss(fwd));
  }
  GradCheckResult result;
  for (auto& p : model.params()) {
    if (!p.trainable) continue;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double orig = p.value[j];
      p.value[j] = orig + h;
      const double up = [&] { Forward<double> f(std::as_const(model)); return loss(f).value()[0]; }();
      p.value[j] = orig - h;
      const double down = [&] { Forward<double> f(std::as_const(model)); return loss(f).value()[0]; }();
      p.value[j] = orig;
      result.max_rel_error = std::max(result.max_rel_error, relative_error(p.grad[j], (up - down) / (2 * h)));
      ++result.checked;
    }
  }
  return result;
}

}  // namespace defsent::testing
