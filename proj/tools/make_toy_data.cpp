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


// Writes a synthetic dictionary world as plain files for the CLI.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "defsent/synthetic.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic dictionary, corpus, STS and classification files", "make_toy_data"};
  std::string out;
  defsent::synthetic::WorldConfig cfg;
  std::size_t sts_pairs = 400;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--words", cfg.num_words, "Headwords")->capture_default_str();
  app.add_option("--sentences-per-word", cfg.corpus_sentences_per_word, "Corpus sentences per headword")
      ->capture_default_str();
  app.add_option("--definitions-per-word", cfg.definitions_per_word, "Definitions per headword")
      ->capture_default_str();
  app.add_option("--sts-pairs", sts_pairs, "STS pairs")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const auto world = defsent::synthetic::make_world(cfg);
  fs::create_directories(out);
  const fs::path dir(out);
  {
    std::ofstream f(dir / "corpus.txt");
    for (const auto& s : world.corpus) f << s << "\n";
  }
  {
    std::ofstream f(dir / "dict.jsonl");
    for (const auto& e : world.dictionary) {
      f << nlohmann::json{{"word", e.word}, {"definition", e.definition}}.dump() << "\n";
    }
  }
  {
    std::ofstream f(dir / "sts.tsv");
    for (const auto& p : defsent::synthetic::sts_pairs(world, sts_pairs, cfg.seed + 1)) {
      f << p.sentence_a << "\t" << p.sentence_b << "\t" << p.gold << "\n";
    }
  }
  {
    std::ofstream f(dir / "cls.tsv");
    for (const auto& r : defsent::synthetic::classification_rows(world, 0)) {
      f << r.label << "\t" << r.sentence << "\n";
    }
  }
  defsent::synthetic::world_vocab(world).save((dir / "vocab.txt").string());
  std::cout << "wrote " << world.corpus.size() << " sentences and " << world.dictionary.size()
            << " definitions to " << out << "\n";
  return 0;
}
