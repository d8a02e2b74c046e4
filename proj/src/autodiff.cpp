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

#include "defsent/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace defsent {

// ---- tape ---------------------------------------------------------------

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::constant_ref(const Tensor<T>& value) {
  Node node;
  node.external = &value;
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::parameter(Parameter<T>& p) {
  Node node;
  node.external = &p.value;
  node.requires_grad = p.trainable;
  node.param = p.trainable ? &p : nullptr;
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs,
                       Backward backward) {
  kernels::check_finite<T>(value.data(), "op output");
  Node node;
  node.value = std::move(value);
  for (const auto& in : inputs) {
    if (in.tape_ != this) throw InvalidArgument("op inputs belong to different tapes");
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
const Tensor<T>& Tape<T>::value(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.external ? *node.external : node.value;
}

template <typename T>
std::span<T> Tape<T>::grad(std::size_t id) {
  Node& node = nodes_.at(id);
  if (!node.requires_grad) throw InvalidArgument("node does not require grad");
  if (node.grad.empty()) node.grad.assign(value(id).size(), T{0});
  return node.grad;
}

template <typename T>
void Tape<T>::backward(const Var<T>& root) {
  if (root.tape_ != this) throw InvalidArgument("root belongs to a different tape");
  if (value(root.id_).size() != 1) {
    throw DimensionError("backward() needs a scalar root, got " +
                         shape_string(value(root.id_).shape()));
  }
  if (!nodes_[root.id_].requires_grad) return;
  grad(root.id_)[0] += T{1};
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, i);
    if (node.param != nullptr) {
      auto& dst = node.param->grad;
      if (dst.size() != node.grad.size()) dst.assign(node.grad.size(), T{0});
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += node.grad[j];
    }
  }
}

// ---- kernels ------------------------------------------------------------

namespace kernels {

template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    const T* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      T* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  // Transpose B once so the inner loop runs over contiguous memory.
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(m, k, n, a, bt.data(), c);
}

template <typename T>
T gelu(T x) {
  constexpr T kAlpha = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kBeta = T(0.044715);
  const T inner = kAlpha * (x + kBeta * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(inner));
}

template <typename T>
T gelu_derivative(T x) {
  constexpr T kAlpha = T(0.7978845608028654);
  constexpr T kBeta = T(0.044715);
  const T inner = kAlpha * (x + kBeta * x * x * x);
  const T th = std::tanh(inner);
  const T sech2 = T(1) - th * th;
  return T(0.5) * (T(1) + th) + T(0.5) * x * sech2 * kAlpha * (T(1) + T(3) * kBeta * x * x);
}

template <typename T>
void check_finite(std::span<const T> values, const char* op) {
  for (T v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + op);
  }
}

}  // namespace kernels

// ---- ops ----------------------------------------------------------------

namespace {

template <typename T>
void require_rank2(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
  }
}

template <typename T>
void accumulate(std::span<T> dst, std::span<const T> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) {
    throw DimensionError("matmul shape mismatch: " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor<T> out({m, n});
  kernels::gemm_nn(m, k, n, av.data().data(), bv.data().data(), out.data().data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    const auto& A = t.value(ia);
    const auto& B = t.value(ib);
    if (auto ga = t.grad_if(ia); !ga.empty()) {
      kernels::gemm_nt(m, n, k, g.data(), B.data().data(), ga.data());
    }
    if (auto gb = t.grad_if(ib); !gb.empty()) {
      kernels::gemm_tn(m, k, n, A.data().data(), g.data(), gb.data());
    }
  });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_rank2(av, "matmul_nt");
  require_rank2(bv, "matmul_nt");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
  if (bv.dim(1) != k) {
    throw DimensionError("matmul_nt shape mismatch: " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()) + "^T");
  }
  Tensor<T> out({m, n});
  kernels::gemm_nt(m, k, n, av.data().data(), bv.data().data(), out.data().data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    const auto& A = t.value(ia);
    const auto& B = t.value(ib);
    // dA = G * B, dB = G^T * A
    if (auto ga = t.grad_if(ia); !ga.empty()) {
      kernels::gemm_nn(m, n, k, g.data(), B.data().data(), ga.data());
    }
    if (auto gb = t.grad_if(ib); !gb.empty()) {
      kernels::gemm_tn(m, n, k, g.data(), A.data().data(), gb.data());
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) {
    throw DimensionError("add shape mismatch: " + shape_string(av.shape()) + " vs " +
                         shape_string(bv.shape()));
  }
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape<T>& t, std::size_t self) {
    std::span<const T> g = t.grad(self);
    if (auto ga = t.grad_if(ia); !ga.empty()) accumulate(ga, g);
    if (auto gb = t.grad_if(ib); !gb.empty()) accumulate(gb, g);
  });
}

template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& bias) {
  const auto& xv = x.value();
  const auto& bv = bias.value();
  const std::size_t n = xv.cols();
  if (bv.size() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bv.shape()) + " vs input " +
                         shape_string(xv.shape()));
  }
  Tensor<T> out = xv;
  const std::size_t rows = xv.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  }
  const std::size_t ix = x.id(), ib = bias.id();
  return x.tape().record(std::move(out), {x, bias}, [=](Tape<T>& t, std::size_t self) {
    std::span<const T> g = t.grad(self);
    if (auto gx = t.grad_if(ix); !gx.empty()) accumulate(gx, g);
    if (auto gb = t.grad_if(ib); !gb.empty()) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
      }
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  return add_bias(matmul(x, weight), bias);
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v *= factor;
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    std::span<const T> g = t.grad(self);
    auto gx = t.grad(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * g[i];
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T total{0};
  for (T v : x.value().data()) total += v;
  const std::size_t ix = x.id();
  return x.tape().record(Tensor<T>({1}, {total}), {x}, [=](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    for (auto& v : t.grad(ix)) v += g;
  });
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = kernels::gelu(v);
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    std::span<const T> g = t.grad(self);
    const auto& xv = t.value(ix);
    auto gx = t.grad(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * kernels::gelu_derivative(xv[i]);
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  const auto& xv = x.value();
  const std::size_t d = xv.cols();
  const std::size_t rows = xv.rows();
  if (gain.value().size() != d || bias.value().size() != d) {
    throw DimensionError("layer_norm: gain/bias must have " + std::to_string(d) + " entries");
  }
  if (!(eps > T{0})) throw InvalidArgument("layer_norm: eps must be positive");
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  Tensor<T> out(xv.shape());
  std::vector<T> xhat(xv.size());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data().data() + r * d;
    T mean{0};
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= T(d);
    T var{0};
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= T(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xr[j] - mean) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, std::size_t self) {
        std::span<const T> g = t.grad(self);
        const auto& gv2 = t.value(ig);
        auto gx = t.grad_if(ix);
        auto gg = t.grad_if(ig);
        auto gb = t.grad_if(ib);
        std::vector<T> dh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gr = g.data() + r * d;
          const T* hr = xhat.data() + r * d;
          if (!gg.empty()) {
            for (std::size_t j = 0; j < d; ++j) gg[j] += gr[j] * hr[j];
          }
          if (!gb.empty()) {
            for (std::size_t j = 0; j < d; ++j) gb[j] += gr[j];
          }
          if (gx.empty()) continue;
          T mean_dh{0}, mean_dh_h{0};
          for (std::size_t j = 0; j < d; ++j) {
            dh[j] = gr[j] * gv2[j];
            mean_dh += dh[j];
            mean_dh_h += dh[j] * hr[j];
          }
          mean_dh /= T(d);
          mean_dh_h /= T(d);
          for (std::size_t j = 0; j < d; ++j) {
            gx[r * d + j] += inv_std[r] * (dh[j] - mean_dh - hr[j] * mean_dh_h);
          }
        }
      });
}

template <typename T>
Var<T> softmax(const Var<T>& x, std::size_t axis) {
  const auto& xv = x.value();
  if (axis >= xv.rank()) {
    throw DimensionError("softmax axis " + std::to_string(axis) + " out of range for " +
                         shape_string(xv.shape()));
  }
  kernels::check_finite(xv.data(), "softmax input");
  std::size_t outer = 1, inner = 1;
  const std::size_t n = xv.dim(axis);
  for (std::size_t i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (std::size_t i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  Tensor<T> out(xv.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = xv[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      T z{0};
      for (std::size_t j = 0; j < n; ++j) {
        const T e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  }
  const std::size_t ix = x.id();
  Tensor<T> probs = out;
  return x.tape().record(
      std::move(out), {x}, [=, probs = std::move(probs)](Tape<T>& t, std::size_t self) {
        std::span<const T> g = t.grad(self);
        auto gx = t.grad(ix);
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            T dot{0};
            for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * probs[base + j * inner];
            for (std::size_t j = 0; j < n; ++j) {
              const std::size_t idx = base + j * inner;
              gx[idx] += probs[idx] * (g[idx] - dot);
            }
          }
        }
      });
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::int32_t> targets) {
  const auto& lv = logits.value();
  require_rank2(lv, "cross_entropy");
  const std::size_t batch = lv.dim(0), classes = lv.dim(1);
  if (targets.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(batch) + " rows");
  }
  kernels::check_finite(lv.data(), "cross_entropy input");
  std::vector<T> probs(lv.size());
  T loss{0};
  for (std::size_t r = 0; r < batch; ++r) {
    const auto target = targets[r];
    if (target < 0 || static_cast<std::size_t>(target) >= classes) {
      throw IndexError("cross_entropy: target " + std::to_string(target) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    const T* row = lv.data().data() + r * classes;
    T mx = row[0];
    for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
    T z{0};
    for (std::size_t j = 0; j < classes; ++j) {
      const T e = std::exp(row[j] - mx);
      probs[r * classes + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < classes; ++j) probs[r * classes + j] /= z;
    loss += -(row[target] - mx - std::log(z));
  }
  loss /= T(batch);
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  const std::size_t il = logits.id();
  return logits.tape().record(
      Tensor<T>({1}, {loss}), {logits},
      [=, probs = std::move(probs), tgt = std::move(tgt)](Tape<T>& t, std::size_t self) {
        const T g = t.grad(self)[0] / T(batch);
        auto gl = t.grad(il);
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t j = 0; j < classes; ++j) {
            gl[r * classes + j] += g * probs[r * classes + j];
          }
          gl[r * classes + static_cast<std::size_t>(tgt[r])] -= g;
        }
      });
}

template <typename T>
Var<T> embedding(const Var<T>& table, std::span<const std::int32_t> ids) {
  const auto& tv = table.value();
  require_rank2(tv, "embedding");
  const std::size_t vocab = tv.dim(0), d = tv.dim(1);
  Tensor<T> out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("embedding: id " + std::to_string(ids[i]) + " outside [0, " +
                       std::to_string(vocab) + ")");
    }
    const auto src = tv.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  const std::size_t it = table.id();
  return table.tape().record(std::move(out), {table},
                             [=, idv = std::move(idv)](Tape<T>& t, std::size_t self) {
                               std::span<const T> g = t.grad(self);
                               auto gt = t.grad(it);
                               for (std::size_t i = 0; i < idv.size(); ++i) {
                                 T* dst = gt.data() + static_cast<std::size_t>(idv[i]) * d;
                                 for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j];
                               }
                             });
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, std::span<const std::size_t> rows) {
  const auto& xv = x.value();
  const std::size_t d = xv.cols();
  Tensor<T> out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) {
      throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " outside [0, " +
                       std::to_string(xv.rows()) + ")");
    }
    const auto src = xv.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x},
                         [=, rv = std::move(rv)](Tape<T>& t, std::size_t self) {
                           std::span<const T> g = t.grad(self);
                           auto gx = t.grad(ix);
                           for (std::size_t i = 0; i < rv.size(); ++i) {
                             T* dst = gx.data() + rv[i] * d;
                             for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j];
                           }
                         });
}

template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                 std::span<const std::uint8_t> key_mask, std::size_t batch,
                 std::size_t seq_len, std::size_t heads) {
  const auto& qv = q.value();
  const auto& kv = k.value();
  const auto& vv = v.value();
  const std::size_t d = qv.cols();
  if (qv.shape() != kv.shape() || qv.shape() != vv.shape() || qv.rows() != batch * seq_len ||
      key_mask.size() != batch * seq_len) {
    throw DimensionError("attention: q/k/v must all be [" + std::to_string(batch * seq_len) +
                         " x d] with a matching mask, got " + shape_string(qv.shape()));
  }
  if (heads == 0 || d % heads != 0) {
    throw DimensionError("attention: d=" + std::to_string(d) + " not divisible by heads=" +
                         std::to_string(heads));
  }
  const std::size_t dh = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(T(dh));
  // probs[((b*H + h)*L + i)*L + j]
  std::vector<T> probs(batch * heads * seq_len * seq_len, T{0});
  Tensor<T> out(qv.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    bool any = false;
    for (std::size_t j = 0; j < seq_len; ++j) any = any || key_mask[b * seq_len + j] != 0;
    if (!any) throw InvalidArgument("attention: sequence " + std::to_string(b) + " is fully masked");
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < seq_len; ++i) {
        T* p = probs.data() + ((b * heads + h) * seq_len + i) * seq_len;
        const T* qi = qv.data().data() + (b * seq_len + i) * d + off;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < seq_len; ++j) {
          if (!key_mask[b * seq_len + j]) continue;
          const T* kj = kv.data().data() + (b * seq_len + j) * d + off;
          T s{0};
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          p[j] = s * inv_sqrt;
          mx = std::max(mx, p[j]);
        }
        T z{0};
        for (std::size_t j = 0; j < seq_len; ++j) {
          if (!key_mask[b * seq_len + j]) continue;
          p[j] = std::exp(p[j] - mx);
          z += p[j];
        }
        T* oi = out.data().data() + (b * seq_len + i) * d + off;
        for (std::size_t j = 0; j < seq_len; ++j) {
          if (!key_mask[b * seq_len + j]) continue;
          p[j] /= z;
          const T* vj = vv.data().data() + (b * seq_len + j) * d + off;
          for (std::size_t c = 0; c < dh; ++c) oi[c] += p[j] * vj[c];
        }
      }
    }
  }
  std::vector<std::uint8_t> mask(key_mask.begin(), key_mask.end());
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape().record(
      std::move(out), {q, k, v},
      [=, probs = std::move(probs), mask = std::move(mask)](Tape<T>& t, std::size_t self) {
        std::span<const T> g = t.grad(self);
        const auto& Q = t.value(iq);
        const auto& K = t.value(ik);
        const auto& V = t.value(iv);
        auto gq = t.grad_if(iq);
        auto gk = t.grad_if(ik);
        auto gv = t.grad_if(iv);
        std::vector<T> dp(seq_len);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < seq_len; ++i) {
              const T* p = probs.data() + ((b * heads + h) * seq_len + i) * seq_len;
              const T* gi = g.data() + (b * seq_len + i) * d + off;
              T dot{0};
              for (std::size_t j = 0; j < seq_len; ++j) {
                dp[j] = T{0};
                if (!mask[b * seq_len + j]) continue;
                const std::size_t rj = (b * seq_len + j) * d + off;
                T s{0};
                for (std::size_t c = 0; c < dh; ++c) s += gi[c] * V[rj + c];
                dp[j] = s;
                dot += p[j] * s;
                if (!gv.empty()) {
                  for (std::size_t c = 0; c < dh; ++c) gv[rj + c] += p[j] * gi[c];
                }
              }
              const std::size_t ri = (b * seq_len + i) * d + off;
              for (std::size_t j = 0; j < seq_len; ++j) {
                if (!mask[b * seq_len + j]) continue;
                const T ds = p[j] * (dp[j] - dot) * inv_sqrt;
                const std::size_t rj = (b * seq_len + j) * d + off;
                if (!gq.empty()) {
                  for (std::size_t c = 0; c < dh; ++c) gq[ri + c] += ds * K[rj + c];
                }
                if (!gk.empty()) {
                  for (std::size_t c = 0; c < dh; ++c) gk[rj + c] += ds * Q[ri + c];
                }
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> masked_mean(const Var<T>& x, std::span<const std::uint8_t> mask, std::size_t batch,
                   std::size_t seq_len) {
  const auto& xv = x.value();
  const std::size_t d = xv.cols();
  if (xv.rows() != batch * seq_len || mask.size() != batch * seq_len) {
    throw DimensionError("masked_mean: expected " + std::to_string(batch * seq_len) + " rows");
  }
  Tensor<T> out({batch, d});
  std::vector<T> counts(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < seq_len; ++i) {
      if (!mask[b * seq_len + i]) continue;
      ++n;
      const auto src = xv.row(b * seq_len + i);
      for (std::size_t j = 0; j < d; ++j) out[b * d + j] += src[j];
    }
    if (n == 0) throw InvalidArgument("mean pooling: row " + std::to_string(b) + " is fully masked");
    counts[b] = T(n);
    for (std::size_t j = 0; j < d; ++j) out[b * d + j] /= counts[b];
  }
  std::vector<std::uint8_t> mv(mask.begin(), mask.end());
  const std::size_t ix = x.id();
  return x.tape().record(
      std::move(out), {x},
      [=, mv = std::move(mv), counts = std::move(counts)](Tape<T>& t, std::size_t self) {
        std::span<const T> g = t.grad(self);
        auto gx = t.grad(ix);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < seq_len; ++i) {
            if (!mv[b * seq_len + i]) continue;
            T* dst = gx.data() + (b * seq_len + i) * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += g[b * d + j] / counts[b];
          }
        }
      });
}

template <typename T>
Var<T> masked_max(const Var<T>& x, std::span<const std::uint8_t> mask, std::size_t batch,
                  std::size_t seq_len) {
  const auto& xv = x.value();
  const std::size_t d = xv.cols();
  if (xv.rows() != batch * seq_len || mask.size() != batch * seq_len) {
    throw DimensionError("masked_max: expected " + std::to_string(batch * seq_len) + " rows");
  }
  Tensor<T> out({batch, d});
  std::vector<std::size_t> argmax(batch * d, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    bool first = true;
    for (std::size_t i = 0; i < seq_len; ++i) {
      if (!mask[b * seq_len + i]) continue;
      const std::size_t r = b * seq_len + i;
      const auto src = xv.row(r);
      for (std::size_t j = 0; j < d; ++j) {
        if (first || src[j] > out[b * d + j]) {
          out[b * d + j] = src[j];
          argmax[b * d + j] = r;
        }
      }
      first = false;
    }
    if (first) throw InvalidArgument("max pooling: row " + std::to_string(b) + " is fully masked");
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x},
                         [=, argmax = std::move(argmax)](Tape<T>& t, std::size_t self) {
                           std::span<const T> g = t.grad(self);
                           auto gx = t.grad(ix);
                           for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t j = 0; j < d; ++j) {
                               gx[argmax[b * d + j] * d + j] += g[b * d + j];
                             }
                           }
                         });
}

template <typename T>
Var<T> dropout(const Var<T>& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw InvalidArgument("dropout probability must be in [0, 1)");
  if (p == 0.0) return x;
  const T keep_scale = T(1.0 / (1.0 - p));
  Tensor<T> out = x.value();
  std::vector<T> factor(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    factor[i] = rng.uniform() < p ? T{0} : keep_scale;
    out[i] *= factor[i];
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x},
                         [=, factor = std::move(factor)](Tape<T>& t, std::size_t self) {
                           std::span<const T> g = t.grad(self);
                           auto gx = t.grad(ix);
                           for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * factor[i];
                         });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    accumulate(t.grad(ix), std::span<const T>(t.grad(self)));
  });
}

#define DEFSENT_INSTANTIATE(T)                                                              \
  template class Tape<T>;                                                                   \
  template class Var<T>;                                                                    \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                     \
  template Var<T> matmul_nt(const Var<T>&, const Var<T>&);                                  \
  template Var<T> add(const Var<T>&, const Var<T>&);                                        \
  template Var<T> add_bias(const Var<T>&, const Var<T>&);                                   \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                      \
  template Var<T> scale(const Var<T>&, T);                                                  \
  template Var<T> sum(const Var<T>&);                                                       \
  template Var<T> gelu(const Var<T>&);                                                      \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);               \
  template Var<T> softmax(const Var<T>&, std::size_t);                                      \
  template Var<T> cross_entropy(const Var<T>&, std::span<const std::int32_t>);              \
  template Var<T> embedding(const Var<T>&, std::span<const std::int32_t>);                  \
  template Var<T> gather_rows(const Var<T>&, std::span<const std::size_t>);                 \
  template Var<T> attention(const Var<T>&, const Var<T>&, const Var<T>&,                    \
                            std::span<const std::uint8_t>, std::size_t, std::size_t,        \
                            std::size_t);                                                   \
  template Var<T> masked_mean(const Var<T>&, std::span<const std::uint8_t>, std::size_t,    \
                              std::size_t);                                                 \
  template Var<T> masked_max(const Var<T>&, std::span<const std::uint8_t>, std::size_t,     \
                             std::size_t);                                                  \
  template Var<T> dropout(const Var<T>&, double, Rng&);                                     \
  template Var<T> reshape(const Var<T>&, Shape);                                            \
  template void kernels::gemm_nn(std::size_t, std::size_t, std::size_t, const T*, const T*, \
                                 T*);                                                       \
  template void kernels::gemm_tn(std::size_t, std::size_t, std::size_t, const T*, const T*, \
                                 T*);                                                       \
  template void kernels::gemm_nt(std::size_t, std::size_t, std::size_t, const T*, const T*, \
                                 T*);                                                       \
  template T kernels::gelu(T);                                                              \
  template T kernels::gelu_derivative(T);                                                   \
  template void kernels::check_finite(std::span<const T>, const char*);

DEFSENT_INSTANTIATE(float)
DEFSENT_INSTANTIATE(double)

#undef DEFSENT_INSTANTIATE

}  // namespace defsent
