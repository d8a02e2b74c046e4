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

#include "defsent/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "defsent/error.hpp"

namespace defsent {

void ModelConfig::validate() const {
  if (vocab_size <= kNumSpecialTokens) throw InvalidArgument("vocab_size must exceed 5");
  if (d_model == 0 || num_layers == 0 || num_heads == 0 || d_ff == 0) {
    throw InvalidArgument("model dimensions must be positive");
  }
  if (d_model % num_heads != 0) {
    throw InvalidArgument("d_model (" + std::to_string(d_model) +
                          ") must be divisible by num_heads (" + std::to_string(num_heads) + ")");
  }
  if (max_len < 3) throw InvalidArgument("max_len must be at least 3");
  if (dropout_prob < 0.0 || dropout_prob >= 1.0) {
    throw InvalidArgument("dropout_prob must be in [0, 1)");
  }
}

PoolingStrategy parse_pooling(const std::string& name) {
  if (name == "cls" || name == "CLS") return PoolingStrategy::kCls;
  if (name == "mean" || name == "Mean") return PoolingStrategy::kMean;
  if (name == "max" || name == "Max") return PoolingStrategy::kMax;
  throw InvalidArgument("unknown pooling '" + name + "' (expected cls|mean|max)");
}

std::string pooling_name(PoolingStrategy strategy) {
  switch (strategy) {
    case PoolingStrategy::kCls: return "cls";
    case PoolingStrategy::kMean: return "mean";
    case PoolingStrategy::kMax: return "max";
  }
  return "cls";
}

// ---- parameters ---------------------------------------------------------

namespace {

struct Spec {
  std::string name;
  Shape shape;
  enum Init { kNormal, kZero, kOne } init;
};

std::vector<Spec> parameter_specs(const ModelConfig& c) {
  const std::size_t d = c.d_model;
  std::vector<Spec> specs;
  specs.push_back({"embeddings.token", {c.vocab_size, d}, Spec::kNormal});
  specs.push_back({"embeddings.position", {c.max_len, d}, Spec::kNormal});
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    for (const char* proj : {"query", "key", "value", "output"}) {
      specs.push_back({p + "attention." + proj + ".weight", {d, d}, Spec::kNormal});
      specs.push_back({p + "attention." + proj + ".bias", {d}, Spec::kZero});
    }
    specs.push_back({p + "attention.norm.gain", {d}, Spec::kOne});
    specs.push_back({p + "attention.norm.bias", {d}, Spec::kZero});
    specs.push_back({p + "ffn.in.weight", {d, c.d_ff}, Spec::kNormal});
    specs.push_back({p + "ffn.in.bias", {c.d_ff}, Spec::kZero});
    specs.push_back({p + "ffn.out.weight", {c.d_ff, d}, Spec::kNormal});
    specs.push_back({p + "ffn.out.bias", {d}, Spec::kZero});
    specs.push_back({p + "ffn.norm.gain", {d}, Spec::kOne});
    specs.push_back({p + "ffn.norm.bias", {d}, Spec::kZero});
  }
  specs.push_back({"head.transform.weight", {d, d}, Spec::kNormal});
  specs.push_back({"head.transform.bias", {d}, Spec::kZero});
  specs.push_back({"head.norm.gain", {d}, Spec::kOne});
  specs.push_back({"head.norm.bias", {d}, Spec::kZero});
  if (!c.tie_prediction_weights) {
    specs.push_back({"head.decoder.weight", {c.vocab_size, d}, Spec::kNormal});
  }
  specs.push_back({"head.bias", {c.vocab_size}, Spec::kZero});
  return specs;
}

constexpr double kInitStd = 0.02;

}  // namespace

template <typename T>
EncoderModel<T>::EncoderModel(const ModelConfig& config, std::uint64_t init_seed)
    : config_(config) {
  config_.validate();
  Rng rng(init_seed);
  for (auto& spec : parameter_specs(config_)) {
    Tensor<T> value(spec.shape);
    for (auto& v : value.data()) {
      switch (spec.init) {
        case Spec::kNormal: v = static_cast<T>(kInitStd * rng.normal()); break;
        case Spec::kZero: v = T{0}; break;
        case Spec::kOne: v = T{1}; break;
      }
    }
    params_.emplace_back(spec.name, std::move(value));
  }
  build_slots();
}

template <typename T>
EncoderModel<T>::EncoderModel(const ModelConfig& config,
                              const std::vector<std::pair<std::string, Tensor<T>>>& named)
    : config_(config) {
  config_.validate();
  std::map<std::string, const Tensor<T>*> by_name;
  for (const auto& [n, t] : named) by_name[n] = &t;
  const auto specs = parameter_specs(config_);
  if (named.size() != specs.size()) {
    throw DimensionError("expected " + std::to_string(specs.size()) + " tensors, got " +
                         std::to_string(named.size()));
  }
  for (const auto& spec : specs) {
    const auto it = by_name.find(spec.name);
    if (it == by_name.end()) throw DimensionError("missing tensor " + spec.name);
    if (it->second->shape() != spec.shape) {
      throw DimensionError("tensor " + spec.name + " has shape " +
                           shape_string(it->second->shape()) + ", expected " +
                           shape_string(spec.shape));
    }
    params_.emplace_back(spec.name, *it->second);
  }
  build_slots();
}

template <typename T>
EncoderModel<T>::EncoderModel(const EncoderModel& other) = default;

template <typename T>
EncoderModel<T>& EncoderModel<T>::operator=(const EncoderModel& other) = default;

template <typename T>
void EncoderModel<T>::build_slots() {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < params_.size(); ++i) index[params_[i].name] = i;
  tok_emb_ = index.at("embeddings.token");
  pos_emb_ = index.at("embeddings.position");
  layers_.clear();
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    LayerSlots s{};
    s.wq = index.at(p + "attention.query.weight");
    s.bq = index.at(p + "attention.query.bias");
    s.wk = index.at(p + "attention.key.weight");
    s.bk = index.at(p + "attention.key.bias");
    s.wv = index.at(p + "attention.value.weight");
    s.bv = index.at(p + "attention.value.bias");
    s.wo = index.at(p + "attention.output.weight");
    s.bo = index.at(p + "attention.output.bias");
    s.ln1_gain = index.at(p + "attention.norm.gain");
    s.ln1_bias = index.at(p + "attention.norm.bias");
    s.w1 = index.at(p + "ffn.in.weight");
    s.b1 = index.at(p + "ffn.in.bias");
    s.w2 = index.at(p + "ffn.out.weight");
    s.b2 = index.at(p + "ffn.out.bias");
    s.ln2_gain = index.at(p + "ffn.norm.gain");
    s.ln2_bias = index.at(p + "ffn.norm.bias");
    layers_.push_back(s);
  }
  head_.transform_w = index.at("head.transform.weight");
  head_.transform_b = index.at("head.transform.bias");
  head_.norm_gain = index.at("head.norm.gain");
  head_.norm_bias = index.at("head.norm.bias");
  head_.decoder = config_.tie_prediction_weights ? tok_emb_ : index.at("head.decoder.weight");
  head_.bias = index.at("head.bias");
}

template <typename T>
std::vector<Parameter<T>*> EncoderModel<T>::parameter_ptrs() {
  std::vector<Parameter<T>*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::vector<std::size_t> EncoderModel<T>::prediction_head_slots() const {
  return {head_.transform_w, head_.transform_b, head_.norm_gain,
          head_.norm_bias,   head_.decoder,     head_.bias};
}

template <typename T>
void EncoderModel<T>::set_prediction_head_trainable(bool trainable) {
  for (auto slot : prediction_head_slots()) params_[slot].trainable = trainable;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> EncoderModel<T>::named_tensors() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  for (const auto& p : params_) out.emplace_back(p.name, p.value);
  return out;
}

template <typename T>
void EncoderModel<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

// ---- forward ------------------------------------------------------------

template <typename T>
Forward<T>::Forward(EncoderModel<T>& model, Rng* dropout_rng)
    : model_(&model), mutable_model_(&model), rng_(dropout_rng) {
  bound_.resize(model.params().size());
}

template <typename T>
Forward<T>::Forward(const EncoderModel<T>& model)
    : model_(&model), mutable_model_(nullptr), rng_(nullptr) {
  bound_.resize(model.params().size());
}

template <typename T>
const Var<T>& Forward<T>::param(std::size_t slot) {
  Var<T>& v = bound_.at(slot);
  if (!v.valid()) {
    v = mutable_model_ ? tape_.parameter(mutable_model_->params()[slot])
                       : tape_.constant_ref(model_->params()[slot].value);
  }
  return v;
}

template <typename T>
Var<T> Forward<T>::encode(const TokenBatch& batch) {
  const auto& c = model_->config();
  if (batch.seq_len > c.max_len) {
    throw InvalidArgument("sequence length " + std::to_string(batch.seq_len) +
                          " exceeds max_len " + std::to_string(c.max_len));
  }
  if (batch.ids.size() != batch.batch * batch.seq_len || batch.mask.size() != batch.ids.size()) {
    throw DimensionError("token batch arrays do not match batch x seq_len");
  }
  for (TokenId id : batch.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
      throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(c.vocab_size));
    }
  }
  const std::size_t B = batch.batch, L = batch.seq_len;
  std::vector<std::int32_t> positions(B * L);
  for (std::size_t i = 0; i < B * L; ++i) positions[i] = static_cast<std::int32_t>(i % L);
  const double p = training() ? c.dropout_prob : 0.0;

  Var<T> x = add(embedding(param(model_->token_embedding_slot()), std::span(batch.ids)),
                 embedding(param(model_->position_embedding_slot()), std::span(positions)));
  if (p > 0.0) x = dropout(x, p, *rng_);
  for (const auto& s : model_->layer_slots()) {
    Var<T> q = linear(x, param(s.wq), param(s.bq));
    Var<T> k = linear(x, param(s.wk), param(s.bk));
    Var<T> v = linear(x, param(s.wv), param(s.bv));
    Var<T> a = attention(q, k, v, std::span(batch.mask), B, L, c.num_heads);
    Var<T> o = linear(a, param(s.wo), param(s.bo));
    if (p > 0.0) o = dropout(o, p, *rng_);
    x = layer_norm(add(x, o), param(s.ln1_gain), param(s.ln1_bias));
    Var<T> f = linear(gelu(linear(x, param(s.w1), param(s.b1))), param(s.w2), param(s.b2));
    if (p > 0.0) f = dropout(f, p, *rng_);
    x = layer_norm(add(x, f), param(s.ln2_gain), param(s.ln2_bias));
  }
  return x;
}

template <typename T>
Var<T> Forward<T>::prediction_logits(const Var<T>& hidden) {
  const auto& h = model_->head_slots();
  if (hidden.value().cols() != model_->config().d_model) {
    throw DimensionError("prediction head expects vectors of " +
                         std::to_string(model_->config().d_model) + ", got " +
                         shape_string(hidden.shape()));
  }
  Var<T> t = gelu(linear(hidden, param(h.transform_w), param(h.transform_b)));
  t = layer_norm(t, param(h.norm_gain), param(h.norm_bias));
  return add_bias(matmul_nt(t, param(h.decoder)), param(h.bias));
}

template <typename T>
Var<T> Forward<T>::defsent_loss(const TokenBatch& batch, const Pooling& pooling) {
  if (batch.targets.size() != batch.batch) {
    throw InvalidArgument("defsent loss needs one target word id per row");
  }
  Var<T> emb = encode(batch);
  const auto mask = pooling_mask(batch, pooling);
  Var<T> u = pool(emb, std::span<const std::uint8_t>(mask), batch.batch, batch.seq_len,
                  pooling.strategy);
  return cross_entropy(prediction_logits(u), std::span(batch.targets));
}

template <typename T>
std::optional<Var<T>> Forward<T>::mlm_loss(const TokenBatch& batch) {
  if (batch.labels.size() != batch.ids.size()) {
    throw InvalidArgument("mlm loss needs a label per position");
  }
  std::vector<std::size_t> rows;
  std::vector<std::int32_t> targets;
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    if (batch.labels[i] == kNoLabel) continue;
    rows.push_back(i);
    targets.push_back(batch.labels[i]);
  }
  if (rows.empty()) return std::nullopt;
  Var<T> emb = encode(batch);
  Var<T> picked = gather_rows(emb, std::span<const std::size_t>(rows));
  return cross_entropy(prediction_logits(picked), std::span<const std::int32_t>(targets));
}

// ---- pooling ------------------------------------------------------------

std::vector<std::uint8_t> pooling_mask(const TokenBatch& batch, const Pooling& pooling) {
  std::vector<std::uint8_t> mask = batch.mask;
  if (pooling.include_specials || pooling.strategy == PoolingStrategy::kCls) return mask;
  for (std::size_t r = 0; r < batch.batch; ++r) {
    std::vector<std::uint8_t> row(mask.begin() + r * batch.seq_len,
                                  mask.begin() + (r + 1) * batch.seq_len);
    bool any = false;
    for (std::size_t j = 0; j < batch.seq_len; ++j) {
      const TokenId id = batch.ids[r * batch.seq_len + j];
      if (id == kClsId || id == kSepId) row[j] = 0;
      any = any || row[j];
    }
    // A [CLS] [SEP]-only row keeps its specials rather than becoming empty.
    if (any) std::copy(row.begin(), row.end(), mask.begin() + r * batch.seq_len);
  }
  return mask;
}

template <typename T>
Var<T> pool(const Var<T>& embeddings, std::span<const std::uint8_t> mask, std::size_t batch,
            std::size_t seq_len, PoolingStrategy strategy) {
  switch (strategy) {
    case PoolingStrategy::kCls: {
      for (std::size_t b = 0; b < batch; ++b) {
        bool any = false;
        for (std::size_t j = 0; j < seq_len; ++j) any = any || mask[b * seq_len + j];
        if (!any) throw InvalidArgument("CLS pooling: row " + std::to_string(b) + " is fully masked");
      }
      std::vector<std::size_t> rows(batch);
      for (std::size_t b = 0; b < batch; ++b) rows[b] = b * seq_len;
      return gather_rows(embeddings, std::span<const std::size_t>(rows));
    }
    case PoolingStrategy::kMean: return masked_mean(embeddings, mask, batch, seq_len);
    case PoolingStrategy::kMax: return masked_max(embeddings, mask, batch, seq_len);
  }
  throw InvalidArgument("unknown pooling strategy");
}

template <typename T>
Tensor<T> pool(const Tensor<T>& embeddings, std::span<const std::uint8_t> mask,
               PoolingStrategy strategy) {
  if (embeddings.rank() != 3) {
    throw DimensionError("pool expects [B x L x d], got " + shape_string(embeddings.shape()));
  }
  const std::size_t B = embeddings.dim(0), L = embeddings.dim(1), d = embeddings.dim(2);
  if (mask.size() != B * L) throw DimensionError("pool: mask must have B x L entries");
  Tape<T> tape;
  Var<T> x = tape.constant_ref(embeddings);
  Var<T> flat = reshape(x, {B * L, d});
  return pool(flat, mask, B, L, strategy).value();
}

// ---- eval helpers -------------------------------------------------------

template <typename T>
Tensor<T> encode(const EncoderModel<T>& model, const TokenBatch& batch) {
  Forward<T> fwd(model);
  return fwd.encode(batch).value().reshaped(
      {batch.batch, batch.seq_len, model.config().d_model});
}

template <typename T>
Tensor<T> embed_batch(const EncoderModel<T>& model, const TokenBatch& batch,
                      const Pooling& pooling) {
  Forward<T> fwd(model);
  Var<T> emb = fwd.encode(batch);
  const auto mask = pooling_mask(batch, pooling);
  return pool(emb, std::span<const std::uint8_t>(mask), batch.batch, batch.seq_len,
              pooling.strategy)
      .value();
}

template <typename T>
std::vector<T> embed_sentence(const EncoderModel<T>& model, const Vocab& vocab,
                              const std::string& sentence, const Pooling& pooling) {
  TokenBatch batch = pad_batch({tokenize(sentence, vocab, model.config().max_len)});
  const Tensor<T> u = embed_batch(model, batch, pooling);
  return u.storage();
}

template <typename T>
WordPrediction<T> predict_word(const EncoderModel<T>& model, const Tensor<T>& pooled) {
  if (pooled.rank() != 2 || pooled.cols() != model.config().d_model) {
    throw DimensionError("predict_word expects [B x " + std::to_string(model.config().d_model) +
                         "], got " + shape_string(pooled.shape()));
  }
  Forward<T> fwd(model);
  Var<T> u = fwd.tape().constant_ref(pooled);
  Var<T> logits = fwd.prediction_logits(u);
  Var<T> probs = softmax(logits, 1);
  return {logits.value(), probs.value()};
}

template <typename T>
T defsent_loss(const EncoderModel<T>& model, const TokenBatch& batch, const Pooling& pooling) {
  Forward<T> fwd(model);
  return fwd.defsent_loss(batch, pooling).value()[0];
}

#define DEFSENT_INSTANTIATE(T)                                                               \
  template class EncoderModel<T>;                                                            \
  template class Forward<T>;                                                                 \
  template Var<T> pool(const Var<T>&, std::span<const std::uint8_t>, std::size_t, std::size_t, \
                       PoolingStrategy);                                                     \
  template Tensor<T> pool(const Tensor<T>&, std::span<const std::uint8_t>, PoolingStrategy); \
  template Tensor<T> encode(const EncoderModel<T>&, const TokenBatch&);                      \
  template Tensor<T> embed_batch(const EncoderModel<T>&, const TokenBatch&, const Pooling&); \
  template std::vector<T> embed_sentence(const EncoderModel<T>&, const Vocab&,               \
                                         const std::string&, const Pooling&);                \
  template WordPrediction<T> predict_word(const EncoderModel<T>&, const Tensor<T>&);         \
  template T defsent_loss(const EncoderModel<T>&, const TokenBatch&, const Pooling&);

DEFSENT_INSTANTIATE(float)
DEFSENT_INSTANTIATE(double)

#undef DEFSENT_INSTANTIATE

}  // namespace defsent
