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


#include <cstring>
#include <string>

#include "doctest.h"
#include "defsent/checkpoint.hpp"
#include "support/fixtures.hpp"
#include "support/tempfiles.hpp"

using namespace defsent;
using namespace defsent::testing;

namespace {

Checkpoint sample_checkpoint() {
  ModelConfig c = tiny_config(12, 8, 1);
  std::vector<std::string> toks = Vocab::special_tokens();
  for (int i = 0; i < 7; ++i) toks.push_back("t" + std::to_string(i));
  Provenance p;
  p.phase = "finetuned";
  p.seed = 42;
  p.lr = 3.2e-5;
  p.pooling = "max";
  p.pool_include_specials = false;
  p.data_fingerprint = fingerprint({"a", "b"});
  return Checkpoint::from_model(EncoderModel<float>(c, 9), Vocab::from_tokens(toks), p);
}

CheckpointErrorCode code_of(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.code();
  }
  FAIL("checkpoint was accepted");
  return CheckpointErrorCode::kIo;
}

}  // namespace

TEST_CASE("save and load round trip bitwise") {
  TempDir dir;
  const Checkpoint a = sample_checkpoint();
  save_checkpoint(a, dir.file("a.dfs1"));
  const Checkpoint b = load_checkpoint(dir.file("a.dfs1"));
  CHECK(b.config == a.config);
  CHECK(b.vocab == a.vocab);
  CHECK(b.provenance == a.provenance);
  REQUIRE(b.tensors.size() == a.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    CHECK(b.tensors[i].first == a.tensors[i].first);
    CHECK(bitwise_equal(b.tensors[i].second, a.tensors[i].second));
  }
  CHECK(serialize_checkpoint(b) == read_file(dir.file("a.dfs1")));
  CHECK(b.pooling().strategy == PoolingStrategy::kMax);
  CHECK_FALSE(b.pooling().include_specials);
}

TEST_CASE("checkpoint layout starts with magic and header length") {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  CHECK(bytes.substr(0, 4) == "DFS1");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 + i])) << (8 * i);
  const auto header = nlohmann::json::parse(bytes.substr(8, len));
  CHECK(header.contains("model"));
  CHECK(header.contains("provenance"));
  CHECK(header["vocab"].size() == 12);
  std::size_t payload = 0;
  for (const auto& t : header["tensors"]) {
    CHECK(t["offset"].get<std::size_t>() == payload);
    std::size_t n = 4;
    for (auto d : t["shape"]) n *= d.get<std::size_t>();
    payload += n;
  }
  CHECK(bytes.size() == 8 + len + payload);
}

TEST_CASE("corrupted checkpoints are rejected with distinct codes") {
  const std::string good = serialize_checkpoint(sample_checkpoint());
  std::string magic = good;
  magic[0] = 'X';
  CHECK(code_of(magic) == CheckpointErrorCode::kBadMagic);
  try {
    deserialize_checkpoint(magic);
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
  }
  CHECK(code_of(good.substr(0, 6)) == CheckpointErrorCode::kTruncated);
  CHECK(code_of(good.substr(0, good.size() - 1)) == CheckpointErrorCode::kTruncated);
  CHECK(code_of(good + "xx") == CheckpointErrorCode::kManifestMismatch);
  std::string header = good;
  header[9] = '#';
  CHECK(code_of(header) == CheckpointErrorCode::kBadHeader);
}

TEST_CASE("manifest declaring three tensors over two payloads is truncated") {
  // Three-tensor file cut right after the second payload.
  Checkpoint c = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(c);
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 + i])) << (8 * i);
  auto header = nlohmann::json::parse(bytes.substr(8, len));
  auto& t = header["tensors"];
  t.erase(t.begin() + 3, t.end());
  REQUIRE(t.size() == 3);
  const std::size_t two = t[2]["offset"].get<std::size_t>();
  const std::string h = header.dump();
  std::string out = "DFS1";
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((h.size() >> (8 * i)) & 0xff));
  out += h;
  out += bytes.substr(8 + len, two);
  CHECK(code_of(out) == CheckpointErrorCode::kTruncated);
  try {
    deserialize_checkpoint(out);
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
}

TEST_CASE("shape mismatch against the config is a manifest mismatch") {
  Checkpoint c = sample_checkpoint();
  c.config.d_ff = 32;
  const std::string bytes = serialize_checkpoint(c);
  CHECK(code_of(bytes) == CheckpointErrorCode::kManifestMismatch);
}

TEST_CASE("missing file is an io error") {
  try {
    load_checkpoint("/nonexistent/x.dfs1");
    FAIL("expected error");
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointErrorCode::kIo);
  }
}

TEST_CASE("checkpoint rebuilds the same model") {
  const Checkpoint c = sample_checkpoint();
  const EncoderModel<float> m = c.to_model();
  TokenBatch b = pad_batch({{kClsId, 6, 7, kSepId}});
  const EncoderModel<float> again = Checkpoint::from_model(m, c.vocab, c.provenance).to_model();
  CHECK(bitwise_equal(encode(m, b), encode(again, b)));
}
