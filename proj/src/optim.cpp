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

#include "defsent/optim.hpp"

#include <algorithm>
#include <cmath>

namespace defsent {

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments<T>& moments,
                 std::uint64_t step, const AdamHyper& hyper, double lr) {
  if (grad.size() != param.size()) {
    throw DimensionError("adam: gradient has " + std::to_string(grad.size()) +
                         " entries for a parameter of " + std::to_string(param.size()));
  }
  if (lr < 0.0) throw InvalidArgument("adam: learning rate must be non-negative");
  if (moments.m.empty()) {
    moments.m.assign(param.size(), T{0});
    moments.v.assign(param.size(), T{0});
  }
  if (moments.m.size() != param.size() || moments.v.size() != param.size()) {
    throw DimensionError("adam: moment buffers do not match parameter size");
  }
  const double b1 = hyper.beta1, b2 = hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = b1 * moments.m[i] + (1.0 - b1) * g;
    const double v = b2 * moments.v[i] + (1.0 - b2) * g * g;
    moments.m[i] = static_cast<T>(m);
    moments.v[i] = static_cast<T>(v);
    const double update = lr * (m / c1) / (std::sqrt(v / c2) + hyper.epsilon);
    if (update != 0.0) param[i] = static_cast<T>(param[i] - update);
  }
}

template <typename T>
AdamState<T>::AdamState(std::span<Parameter<T>* const> params, AdamHyper hyper)
    : hyper_(hyper) {
  for (Parameter<T>* p : params) {
    if (p == nullptr || !p->trainable) continue;
    bool seen = false;
    for (const auto& s : slots_) seen = seen || s.param == p;
    if (seen) continue;
    Slot slot{p, {}};
    slot.moments.m.assign(p->value.size(), T{0});
    slot.moments.v.assign(p->value.size(), T{0});
    slots_.push_back(std::move(slot));
  }
}

template <typename T>
void AdamState<T>::step(double lr) {
  ++t_;
  for (auto& slot : slots_) {
    Parameter<T>& p = *slot.param;
    if (p.grad.size() != p.value.size()) {
      throw DimensionError("adam: gradient shape mismatch for " + p.name);
    }
    adam_update<T>(p.value.data(), p.grad, slot.moments, t_, hyper_, lr);
  }
}

template <typename T>
bool AdamState<T>::has_state_for(const Parameter<T>& p) const {
  return std::any_of(slots_.begin(), slots_.end(), [&](const Slot& s) { return s.param == &p; });
}

template <typename T>
const AdamMoments<T>& AdamState<T>::moments_for(const Parameter<T>& p) const {
  for (const auto& s : slots_) {
    if (s.param == &p) return s.moments;
  }
  throw InvalidArgument("adam: no state for parameter " + p.name);
}

template <typename T>
double clip_grad_norm(std::span<Parameter<T>* const> params, double max_norm) {
  if (!(max_norm > 0.0)) throw InvalidArgument("max_grad_norm must be positive");
  double sq = 0.0;
  for (const Parameter<T>* p : params) {
    if (!p->trainable) continue;
    for (T g : p->grad) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (Parameter<T>* p : params) {
      if (!p->trainable) continue;
      for (T& g : p->grad) g *= factor;
    }
  }
  return norm;
}

void LrSchedule::validate() const {
  if (!(base_lr > 0.0)) throw InvalidArgument("base_lr must be positive");
  if (total_steps == 0) throw InvalidArgument("total_steps must be positive");
  if (warmup_steps > total_steps) throw InvalidArgument("warmup_steps exceeds total_steps");
}

double lr_at(const LrSchedule& s, std::uint64_t step) {
  if (s.warmup_steps > 0 && step < s.warmup_steps) {
    return s.base_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  }
  if (s.decay == LrDecay::kLinear) {
    if (step >= s.total_steps || s.total_steps == s.warmup_steps) return 0.0;
    const double remaining = static_cast<double>(s.total_steps - step);
    return s.base_lr * remaining / static_cast<double>(s.total_steps - s.warmup_steps);
  }
  return s.base_lr;
}

LrDecay parse_decay(const std::string& name) {
  if (name == "constant") return LrDecay::kConstant;
  if (name == "linear") return LrDecay::kLinear;
  throw InvalidArgument("unknown lr decay '" + name + "' (expected constant|linear)");
}

std::string decay_name(LrDecay decay) {
  return decay == LrDecay::kLinear ? "linear" : "constant";
}

template void adam_update(std::span<float>, std::span<const float>, AdamMoments<float>&,
                          std::uint64_t, const AdamHyper&, double);
template void adam_update(std::span<double>, std::span<const double>, AdamMoments<double>&,
                          std::uint64_t, const AdamHyper&, double);
template class AdamState<float>;
template class AdamState<double>;
template double clip_grad_norm(std::span<Parameter<float>* const>, double);
template double clip_grad_norm(std::span<Parameter<double>* const>, double);

}  // namespace defsent
