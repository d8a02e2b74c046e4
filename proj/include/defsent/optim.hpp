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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "defsent/autodiff.hpp"

namespace defsent {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment buffers for one parameter.
template <typename T>
struct AdamMoments {
  std::vector<T> m;
  std::vector<T> v;
};

// One bias-corrected Adam update on a flat parameter. `step` is the 1-based
// step count after incrementing.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments<T>& moments,
                 std::uint64_t step, const AdamHyper& hyper, double lr);

// Optimizer state over a fixed parameter list. Moments are allocated only for
// parameters flagged trainable; frozen parameters are never written.
template <typename T>
class AdamState {
 public:
  AdamState(std::span<Parameter<T>* const> params, AdamHyper hyper = {});

  // Applies one update using each parameter's accumulated grad, then bumps t.
  void step(double lr);

  std::uint64_t t() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }
  std::size_t allocated_count() const { return slots_.size(); }
  bool has_state_for(const Parameter<T>& p) const;
  const AdamMoments<T>& moments_for(const Parameter<T>& p) const;

 private:
  struct Slot {
    Parameter<T>* param;
    AdamMoments<T> moments;
  };

  std::vector<Slot> slots_;
  AdamHyper hyper_;
  std::uint64_t t_ = 0;
};

// Scales all trainable gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(std::span<Parameter<T>* const> params, double max_norm);

enum class LrDecay { kConstant, kLinear };

struct LrSchedule {
  double base_lr = 1e-4;
  std::uint64_t warmup_steps = 0;
  std::uint64_t total_steps = 1;
  LrDecay decay = LrDecay::kConstant;

  // Throws InvalidArgument unless base_lr > 0, total_steps > 0 and
  // warmup_steps <= total_steps.
  void validate() const;
};

// Linear ramp 0 -> base_lr over warmup_steps, then constant (or linear decay
// to zero at total_steps with LrDecay::kLinear).
double lr_at(const LrSchedule& schedule, std::uint64_t step);

LrDecay parse_decay(const std::string& name);
std::string decay_name(LrDecay decay);

}  // namespace defsent
