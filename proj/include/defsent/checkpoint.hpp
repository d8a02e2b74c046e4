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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "defsent/error.hpp"
#include "defsent/model.hpp"
#include "defsent/tensor.hpp"
#include "defsent/vocab.hpp"

namespace defsent {

// Binary layout:
//   "DFS1" | u32 LE header length | UTF-8 JSON header | f32 LE payloads
// The header holds the model config, provenance, vocabulary and a manifest of
// {name, shape, offset} with offsets relative to the first payload byte.
inline constexpr char kCheckpointMagic[4] = {'D', 'F', 'S', '1'};

enum class CheckpointErrorCode {
  kIo = 1,
  kBadMagic = 2,
  kTruncated = 3,
  kManifestMismatch = 4,
  kBadHeader = 5,
};

class CheckpointError : public Error {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& what)
      : Error(std::string(code_name(code)) + ": " + what), code_(code) {}

  CheckpointErrorCode code() const { return code_; }
  static const char* code_name(CheckpointErrorCode code);

 private:
  CheckpointErrorCode code_;
};

struct Provenance {
  std::string phase = "pretrained";  // pretrained | finetuned | untrained
  std::uint64_t seed = 0;
  double lr = 0.0;
  std::string pooling = "cls";
  bool pool_include_specials = true;
  std::string data_fingerprint;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
  Provenance provenance;

  static Checkpoint from_model(const EncoderModel<float>& model, const Vocab& vocab,
                               Provenance provenance);
  EncoderModel<float> to_model() const;
  const Tensor<float>& tensor(const std::string& name) const;
  Pooling pooling() const;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// In-memory forms of the same format.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Provenance& provenance);
Provenance provenance_from_json(const nlohmann::json& j);

// FNV-1a over the given strings, hex encoded.
std::string fingerprint(const std::vector<std::string>& items);

}  // namespace defsent
