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

// Reverse-mode automatic differentiation over the operations the encoder
// needs. A Tape records one forward pass; backward() replays it in reverse.
// Tapes are single-owner and not thread-safe; independent tapes may run in
// parallel.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "defsent/rng.hpp"
#include "defsent/tensor.hpp"

namespace defsent {

// Named model weight with its accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  std::vector<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.size(), T{0}), trainable(train) {}

  void zero_grad() { std::fill(grad.begin(), grad.end(), T{0}); }
};

template <typename T>
class Tape;

// Handle to a node on a tape.
template <typename T>
class Var {
 public:
  Var() = default;

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that never receives a gradient.
  Var<T> constant(Tensor<T> value);
  // Constant leaf that references caller-owned storage (must outlive the tape).
  Var<T> constant_ref(const Tensor<T>& value);
  // Leaf whose gradient is kept on the tape (read it with grad()).
  Var<T> variable(Tensor<T> value);
  // Leaf bound to a parameter. Trainable parameters receive their gradient in
  // Parameter::grad after backward(); frozen ones are treated as constants.
  // The parameter must outlive the tape.
  Var<T> parameter(Parameter<T>& p);

  // Records an op output. `backward` runs only when some input requires grad.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, Backward backward);

  const Tensor<T>& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of a node that requires grad (allocated on first use).
  std::span<T> grad(std::size_t id);
  std::span<T> grad(const Var<T>& v) { return grad(v.id()); }
  // Gradient buffer if the node requires grad, empty span otherwise.
  std::span<T> grad_if(std::size_t id) {
    return nodes_[id].requires_grad ? grad(id) : std::span<T>();
  }

  // Backpropagates from a scalar root and accumulates parameter gradients.
  void backward(const Var<T>& root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Parameter<T>* param = nullptr;
    std::vector<T> grad;
    bool requires_grad = false;
    Backward backward;
  };

  std::deque<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

// ---- operations ---------------------------------------------------------

// [m x k] * [k x n] -> [m x n].
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

// [m x k] * [n x k]^T -> [m x n].
template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

// Adds a [n] vector to every row of a [... x n] tensor.
template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& bias);

// x * W + b with W stored [in x out].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> scale(const Var<T>& x, T factor);

// Sum of all elements as a [1] tensor.
template <typename T>
Var<T> sum(const Var<T>& x);

// GELU, tanh approximation.
template <typename T>
Var<T> gelu(const Var<T>& x);

// Normalizes over the last axis, then applies gain and bias.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5));

template <typename T>
Var<T> softmax(const Var<T>& x, std::size_t axis);

// Mean over rows of -log softmax(logits)[target].
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::int32_t> targets);

// Rows of a [V x d] table selected by ids -> [n x d].
template <typename T>
Var<T> embedding(const Var<T>& table, std::span<const std::int32_t> ids);

// Rows of a [... x d] tensor selected by row index -> [n x d].
template <typename T>
Var<T> gather_rows(const Var<T>& x, std::span<const std::size_t> rows);

// Multi-head scaled dot-product self-attention. q, k, v are [B*L x d];
// key_mask is B*L entries, 0 marks a key that receives zero weight.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                 std::span<const std::uint8_t> key_mask, std::size_t batch,
                 std::size_t seq_len, std::size_t heads);

// Per-sequence mean / max over rows of a [B*L x d] tensor where mask is 1.
template <typename T>
Var<T> masked_mean(const Var<T>& x, std::span<const std::uint8_t> mask,
                   std::size_t batch, std::size_t seq_len);
template <typename T>
Var<T> masked_max(const Var<T>& x, std::span<const std::uint8_t> mask,
                  std::size_t batch, std::size_t seq_len);

// Inverted dropout: zeroes each element with probability p, scales the rest
// by 1/(1-p). Identity when p == 0.
template <typename T>
Var<T> dropout(const Var<T>& x, double p, Rng& rng);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

// ---- value-level kernels ------------------------------------------------

namespace kernels {

// C[m x n] += A[m x k] * B[k x n], accumulation in index order.
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c);

// C[k x n] += A[m x k]^T * B[m x n].
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c);

// C[m x n] += A[m x k] * B[n x k]^T.
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c);

template <typename T>
T gelu(T x);
template <typename T>
T gelu_derivative(T x);

// Throws NumericError naming `op` if any element is NaN or Inf.
template <typename T>
void check_finite(std::span<const T> values, const char* op);

}  // namespace kernels

}  // namespace defsent
