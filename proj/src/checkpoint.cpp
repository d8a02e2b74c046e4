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

#include "defsent/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "defsent/rng.hpp"

namespace defsent {

const char* CheckpointError::code_name(CheckpointErrorCode code) {
  switch (code) {
    case CheckpointErrorCode::kIo: return "io error";
    case CheckpointErrorCode::kBadMagic: return "bad magic";
    case CheckpointErrorCode::kTruncated: return "truncated";
    case CheckpointErrorCode::kManifestMismatch: return "manifest mismatch";
    case CheckpointErrorCode::kBadHeader: return "bad header";
  }
  return "checkpoint error";
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},
          {"num_layers", c.num_layers}, {"num_heads", c.num_heads},
          {"d_ff", c.d_ff},             {"max_len", c.max_len},
          {"tie_prediction_weights", c.tie_prediction_weights},
          {"dropout_prob", c.dropout_prob}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.tie_prediction_weights = j.at("tie_prediction_weights").get<bool>();
  c.dropout_prob = j.at("dropout_prob").get<double>();
  return c;
}

nlohmann::json to_json(const Provenance& p) {
  return {{"phase", p.phase},
          {"seed", p.seed},
          {"lr", p.lr},
          {"pooling", p.pooling},
          {"pool_include_specials", p.pool_include_specials},
          {"data_fingerprint", p.data_fingerprint}};
}

Provenance provenance_from_json(const nlohmann::json& j) {
  Provenance p;
  p.phase = j.at("phase").get<std::string>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.lr = j.at("lr").get<double>();
  p.pooling = j.at("pooling").get<std::string>();
  p.pool_include_specials = j.value("pool_include_specials", true);
  p.data_fingerprint = j.value("data_fingerprint", std::string());
  return p;
}

std::string fingerprint(const std::vector<std::string>& items) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : items) {
    h = fnv1a64(s, h);
    h = fnv1a64(std::string_view("\n", 1), h);
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

Checkpoint Checkpoint::from_model(const EncoderModel<float>& model, const Vocab& vocab,
                                  Provenance provenance) {
  if (vocab.size() != model.config().vocab_size) {
    throw DimensionError("vocabulary has " + std::to_string(vocab.size()) +
                         " tokens but the model expects " +
                         std::to_string(model.config().vocab_size));
  }
  return Checkpoint{model.config(), vocab, model.named_tensors(), std::move(provenance)};
}

EncoderModel<float> Checkpoint::to_model() const { return EncoderModel<float>(config, tensors); }

const Tensor<float>& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw InvalidArgument("checkpoint has no tensor " + name);
}

Pooling Checkpoint::pooling() const {
  return Pooling{parse_pooling(provenance.pooling), provenance.pool_include_specials};
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(float);
  }
  const nlohmann::json header = {{"model", to_json(ckpt.config)},
                                 {"provenance", to_json(ckpt.provenance)},
                                 {"vocab", ckpt.vocab.tokens()},
                                 {"tensors", manifest}};
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : ckpt.tensors) {
    for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(CheckpointErrorCode::kBadMagic, "file does not start with DFS1");
  }
  if (bytes.size() < 8) throw CheckpointError(CheckpointErrorCode::kTruncated, "missing header length");
  const std::uint32_t header_len = get_u32(data + 4);
  if (bytes.size() < 8 + static_cast<std::size_t>(header_len)) {
    throw CheckpointError(CheckpointErrorCode::kTruncated, "header extends past end of file");
  }
  nlohmann::json header;
  Checkpoint ckpt;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
    ckpt.config = model_config_from_json(header.at("model"));
    ckpt.provenance = provenance_from_json(header.at("provenance"));
    ckpt.vocab = Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointErrorCode::kBadHeader, e.what());
  }
  if (ckpt.vocab.size() != ckpt.config.vocab_size) {
    throw CheckpointError(CheckpointErrorCode::kManifestMismatch,
                          "vocabulary size does not match model config");
  }
  const std::size_t payload = 8 + static_cast<std::size_t>(header_len);
  const std::size_t available = bytes.size() - payload;
  std::uint64_t expected_offset = 0;
  const auto& manifest = header.contains("tensors") ? header["tensors"] : nlohmann::json();
  if (!manifest.is_array()) throw CheckpointError(CheckpointErrorCode::kBadHeader, "missing tensor manifest");
  for (const auto& entry : manifest) {
    std::string name;
    Shape shape;
    std::uint64_t offset = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<Shape>();
      offset = entry.at("offset").get<std::uint64_t>();
    } catch (const std::exception& e) {
      throw CheckpointError(CheckpointErrorCode::kBadHeader, e.what());
    }
    if (offset != expected_offset) {
      throw CheckpointError(CheckpointErrorCode::kManifestMismatch,
                            "tensor " + name + " offset is not contiguous");
    }
    const std::size_t count = shape_size(shape);
    if (shape.empty() || count == 0) {
      throw CheckpointError(CheckpointErrorCode::kManifestMismatch, "tensor " + name + " has empty shape");
    }
    const std::uint64_t nbytes = count * sizeof(float);
    if (offset + nbytes > available) {
      throw CheckpointError(CheckpointErrorCode::kTruncated,
                            "payload for tensor " + name + " extends past end of file");
    }
    std::vector<float> values(count);
    const unsigned char* p = data + payload + offset;
    for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(get_u32(p + 4 * i));
    ckpt.tensors.emplace_back(name, Tensor<float>(shape, std::move(values)));
    expected_offset += nbytes;
  }
  if (expected_offset != available) {
    throw CheckpointError(CheckpointErrorCode::kManifestMismatch,
                          "trailing bytes after the last tensor payload");
  }
  try {
    (void)ckpt.to_model();
  } catch (const Error& e) {
    throw CheckpointError(CheckpointErrorCode::kManifestMismatch, e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointErrorCode::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrorCode::kIo, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorCode::kIo, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace defsent
