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
#include "defsent/batching.hpp"
#include "defsent/vocab.hpp"

namespace defsent {

struct ModelConfig {
  std::size_t vocab_size = 2000;
  std::size_t d_model = 64;
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_len = 32;
  bool tie_prediction_weights = true;
  double dropout_prob = 0.1;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class PoolingStrategy { kCls, kMean, kMax };

struct Pooling {
  PoolingStrategy strategy = PoolingStrategy::kCls;
  // Mean/Max range over [CLS] and [SEP] too unless this is false.
  bool include_specials = true;
};

PoolingStrategy parse_pooling(const std::string& name);  // cls | mean | max
std::string pooling_name(PoolingStrategy strategy);

// Index of every weight inside EncoderModel::params().
struct LayerSlots {
  std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
  std::size_t ln1_gain, ln1_bias;
  std::size_t w1, b1, w2, b2;
  std::size_t ln2_gain, ln2_bias;
};

struct HeadSlots {
  std::size_t transform_w, transform_b;
  std::size_t norm_gain, norm_bias;
  std::size_t decoder;  // == token embedding slot when weights are tied
  std::size_t bias;
};

// BERT-style post-norm transformer encoder with an MLM word-prediction head.
template <typename T>
class EncoderModel {
 public:
  // Weights ~ N(0, 0.02), biases 0, layer-norm gains 1.
  EncoderModel(const ModelConfig& config, std::uint64_t init_seed);

  // Rebuilds a model from named tensors; every expected name must be present
  // with the expected shape.
  EncoderModel(const ModelConfig& config,
               const std::vector<std::pair<std::string, Tensor<T>>>& named);

  EncoderModel(const EncoderModel& other);
  EncoderModel& operator=(const EncoderModel& other);
  EncoderModel(EncoderModel&&) noexcept = default;
  EncoderModel& operator=(EncoderModel&&) noexcept = default;

  const ModelConfig& config() const { return config_; }

  std::vector<Parameter<T>>& params() { return params_; }
  const std::vector<Parameter<T>>& params() const { return params_; }
  std::vector<Parameter<T>*> parameter_ptrs();

  // Transform, decoder and output bias (the shared token embedding when tied).
  std::vector<std::size_t> prediction_head_slots() const;
  void set_prediction_head_trainable(bool trainable);

  std::size_t token_embedding_slot() const { return tok_emb_; }
  std::size_t position_embedding_slot() const { return pos_emb_; }
  const std::vector<LayerSlots>& layer_slots() const { return layers_; }
  const HeadSlots& head_slots() const { return head_; }

  std::vector<std::pair<std::string, Tensor<T>>> named_tensors() const;

  template <typename U>
  EncoderModel<U> cast() const {
    std::vector<std::pair<std::string, Tensor<U>>> named;
    for (auto& [n, t] : named_tensors()) named.emplace_back(n, t.template cast<U>());
    EncoderModel<U> out(config_, named);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i].trainable = params_[i].trainable;
    return out;
  }

  void zero_grad();

 private:
  void build_slots();

  ModelConfig config_;
  std::vector<Parameter<T>> params_;
  std::size_t tok_emb_ = 0, pos_emb_ = 0;
  std::vector<LayerSlots> layers_;
  HeadSlots head_{};
};

// One forward pass: a tape plus the model's parameters bound onto it.
template <typename T>
class Forward {
 public:
  // Gradient-tracking pass. A non-null generator enables dropout (training
  // mode); it must outlive this object.
  explicit Forward(EncoderModel<T>& model, Rng* dropout_rng = nullptr);
  // Inference pass: parameters bound read-only, dropout off.
  explicit Forward(const EncoderModel<T>& model);

  Tape<T>& tape() { return tape_; }
  const EncoderModel<T>& model() const { return *model_; }
  const Var<T>& param(std::size_t slot);
  bool training() const { return rng_ != nullptr; }

  // Contextual embeddings as [B*L x d].
  Var<T> encode(const TokenBatch& batch);
  // Head logits [n x V] for pooled or per-token vectors [n x d].
  Var<T> prediction_logits(const Var<T>& hidden);
  // Mean cross-entropy of predicting each row's target from its pooled vector.
  Var<T> defsent_loss(const TokenBatch& batch, const Pooling& pooling);
  // Masked-token cross-entropy; empty when the batch has no labelled position.
  std::optional<Var<T>> mlm_loss(const TokenBatch& batch);

  void backward(const Var<T>& loss) { tape_.backward(loss); }

 private:
  const EncoderModel<T>* model_;
  EncoderModel<T>* mutable_model_;
  Rng* rng_;
  Tape<T> tape_;
  std::vector<Var<T>> bound_;
};

// Mask of positions pooling may use (drops [CLS]/[SEP] when asked).
std::vector<std::uint8_t> pooling_mask(const TokenBatch& batch, const Pooling& pooling);

// u [B x d] from contextual embeddings [B*L x d].
template <typename T>
Var<T> pool(const Var<T>& embeddings, std::span<const std::uint8_t> mask, std::size_t batch,
            std::size_t seq_len, PoolingStrategy strategy);

// Value-level pooling over embeddings shaped [B x L x d].
template <typename T>
Tensor<T> pool(const Tensor<T>& embeddings, std::span<const std::uint8_t> mask,
               PoolingStrategy strategy);

// Eval-mode helpers (dropout off, no gradient state touched).
template <typename T>
Tensor<T> encode(const EncoderModel<T>& model, const TokenBatch& batch);  // [B x L x d]

template <typename T>
Tensor<T> embed_batch(const EncoderModel<T>& model, const TokenBatch& batch,
                      const Pooling& pooling);  // [B x d]

template <typename T>
std::vector<T> embed_sentence(const EncoderModel<T>& model, const Vocab& vocab,
                              const std::string& sentence, const Pooling& pooling);

template <typename T>
struct WordPrediction {
  Tensor<T> logits;         // [B x V]
  Tensor<T> probabilities;  // row-wise softmax of logits
};

template <typename T>
WordPrediction<T> predict_word(const EncoderModel<T>& model, const Tensor<T>& pooled);

template <typename T>
T defsent_loss(const EncoderModel<T>& model, const TokenBatch& batch, const Pooling& pooling);

}  // namespace defsent
