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

#include "defsent/corpus.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "defsent/error.hpp"
#include "defsent/rng.hpp"

namespace defsent {
namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

bool is_blank(const std::string& s) {
  for (unsigned char c : s) {
    if (!std::isspace(c)) return false;
  }
  return true;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::vector<DefinitionEntry> load_dictionary(const std::string& path) {
  const auto lines = read_lines(path);
  bool jsonl = false;
  for (const auto& l : lines) {
    if (is_blank(l)) continue;
    jsonl = trim(l).front() == '{';
    break;
  }
  std::vector<DefinitionEntry> entries;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (is_blank(line)) continue;
    DefinitionEntry e;
    if (jsonl) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& err) {
        throw ParseError(path, i + 1, std::string("invalid JSON: ") + err.what());
      }
      if (!j.is_object() || !j.contains("word") || !j.contains("definition") ||
          !j["word"].is_string() || !j["definition"].is_string()) {
        throw ParseError(path, i + 1, "expected string fields \"word\" and \"definition\"");
      }
      e.word = j["word"].get<std::string>();
      e.definition = j["definition"].get<std::string>();
    } else {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw ParseError(path, i + 1, "expected word<TAB>definition");
      e.word = trim(line.substr(0, tab));
      e.definition = trim(line.substr(tab + 1));
    }
    if (e.word.empty()) throw ParseError(path, i + 1, "empty headword");
    if (e.definition.empty()) throw ParseError(path, i + 1, "empty definition");
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw ParseError(path, 0, "dictionary file has no entries");
  return entries;
}

std::vector<STSPair> load_sts(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<STSPair> pairs;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto fields = split_tabs(lines[i]);
    if (fields.size() != 3) {
      throw ParseError(path, i + 1, "expected sentence_a<TAB>sentence_b<TAB>score");
    }
    const std::string score = trim(fields[2]);
    double gold = 0.0;
    std::size_t used = 0;
    try {
      gold = std::stod(score, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != score.size() || !std::isfinite(gold)) {
      throw ParseError(path, i + 1, "score '" + score + "' is not a number");
    }
    if (gold < 0.0 || gold > 5.0) throw ParseError(path, i + 1, "score outside [0, 5]");
    pairs.push_back({fields[0], fields[1], gold});
  }
  if (pairs.empty()) throw ParseError(path, 0, "STS file has no pairs");
  return pairs;
}

std::vector<LabeledSentence> load_classification(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<LabeledSentence> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) throw ParseError(path, i + 1, "expected label<TAB>sentence");
    const std::string label = trim(lines[i].substr(0, tab));
    int value = -1;
    const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
    if (ec != std::errc() || ptr != label.data() + label.size() || value < 0) {
      throw ParseError(path, i + 1, "label '" + label + "' is not a non-negative integer");
    }
    rows.push_back({lines[i].substr(tab + 1), value});
  }
  if (rows.empty()) throw ParseError(path, 0, "classification file has no rows");
  return rows;
}

std::vector<std::string> load_sentences(const std::string& path) {
  std::vector<std::string> out;
  for (auto& l : read_lines(path)) {
    if (!is_blank(l)) out.push_back(std::move(l));
  }
  if (out.empty()) throw ParseError(path, 0, "corpus file has no sentences");
  return out;
}

TokenId headword_id(const std::string& word, const Vocab& vocab) {
  const auto pieces = split_words(word);
  if (pieces.size() != 1 || !vocab.contains(pieces[0])) return -1;
  const TokenId id = vocab.id(pieces[0]);
  return is_special(id) ? -1 : id;
}

std::vector<DefinitionEntry> filter_oov(const std::vector<DefinitionEntry>& entries,
                                        const Vocab& vocab) {
  std::vector<DefinitionEntry> kept;
  for (const auto& e : entries) {
    const TokenId id = headword_id(e.word, vocab);
    if (id < 0) continue;
    DefinitionEntry copy = e;
    copy.word_id = id;
    kept.push_back(std::move(copy));
  }
  return kept;
}

std::size_t count_distinct_words(const std::vector<DefinitionEntry>& entries) {
  std::unordered_set<std::string> words;
  for (const auto& e : entries) words.insert(e.word);
  return words.size();
}

SplitCorpus split_by_word(const std::vector<DefinitionEntry>& entries, SplitRatios ratios,
                          std::uint64_t seed) {
  const unsigned total = ratios.train + ratios.dev + ratios.test;
  if (total == 0) throw InvalidArgument("split ratios sum to zero");
  std::vector<std::string> words;
  std::unordered_map<std::string, std::size_t> first_seen;
  for (const auto& e : entries) {
    if (first_seen.emplace(e.word, words.size()).second) words.push_back(e.word);
  }
  if (words.size() < 10) {
    throw InsufficientData("word-level split needs at least 10 distinct headwords, got " +
                           std::to_string(words.size()));
  }
  Rng rng(seed);
  rng.shuffle(words.begin(), words.end());
  const std::size_t n = words.size();
  const std::size_t n_dev = n * ratios.dev / total;
  const std::size_t n_test = n * ratios.test / total;
  const std::size_t n_train = n - n_dev - n_test;
  enum Part { kTrain, kDev, kTest };
  std::unordered_map<std::string, Part> part;
  for (std::size_t i = 0; i < n; ++i) {
    part[words[i]] = i < n_train ? kTrain : (i < n_train + n_dev ? kDev : kTest);
  }
  SplitCorpus split;
  for (const auto& e : entries) {
    switch (part.at(e.word)) {
      case kTrain: split.train.push_back(e); break;
      case kDev: split.dev.push_back(e); break;
      case kTest: split.test.push_back(e); break;
    }
  }
  return split;
}

}  // namespace defsent
