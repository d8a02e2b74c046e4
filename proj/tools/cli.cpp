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


#include "defsent/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "defsent/checkpoint.hpp"
#include "defsent/corpus.hpp"
#include "defsent/error.hpp"
#include "defsent/evaluation.hpp"
#include "defsent/report.hpp"
#include "defsent/rng.hpp"
#include "defsent/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace defsent::cli {
namespace {

struct MissingInput : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct BadCheckpoint : Error {
  using Error::Error;
};

void require_file(const std::string& path, const std::string& what) {
  if (path == "-") return;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw MissingInput(what + " not found: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  require_file(path, "checkpoint");
  try {
    return load_checkpoint(path);
  } catch (const CheckpointError& e) {
    throw BadCheckpoint(path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path make_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

// Every option of a subcommand as resolved after flags and config file.
json resolved_options(const CLI::App& sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->get_expected_max() == 0) {
      j[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const auto& res = opt->results();
      j[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else {
      const std::string def = opt->get_default_str();
      j[name] = def.empty() ? json(nullptr) : json(def);
    }
  }
  return j;
}

struct PoolingFlags {
  std::string name;
  bool exclude_specials = false;

  void add(CLI::App* sub, bool with_default) {
    auto* o = sub->add_option("--pooling", name, "cls | mean | max")
                  ->check(CLI::IsMember({"cls", "mean", "max"}));
    if (with_default) {
      name = "cls";
      o->capture_default_str();
    } else {
      o->description("cls | mean | max (default: the checkpoint's)");
    }
    sub->add_flag("--exclude-specials", exclude_specials, "Mean/Max skip [CLS] and [SEP]");
  }

  Pooling resolve(const Checkpoint* ckpt) const {
    Pooling p = ckpt && name.empty() ? ckpt->pooling() : Pooling{};
    if (!name.empty()) p.strategy = parse_pooling(name);
    if (exclude_specials) p.include_specials = false;
    return p;
  }
};

std::size_t workers(std::optional<std::size_t> requested) {
  const std::size_t cap = thread_cap();
  return requested ? std::max<std::size_t>(1, std::min(*requested, cap)) : cap;
}

std::string lr_label(double lr) {
  std::ostringstream s;
  s << lr;
  return s.str();
}

// ---- pretrain ---------------------------------------------------------------

struct PretrainArgs {
  std::string corpus, vocab, out;
  std::size_t vocab_size = 2000;
  ModelConfig model;
  TrainConfig train;
  bool untied = false;
  std::string decay = "constant";
  std::optional<double> max_grad_norm;

  PretrainArgs() {
    train.epochs = 10;
    train.base_lr = 1e-3;
  }
};

void add_model_options(CLI::App* sub, ModelConfig& m, bool& untied) {
  sub->add_option("--d-model", m.d_model, "Hidden size")->capture_default_str();
  sub->add_option("--layers", m.num_layers, "Encoder layers")->capture_default_str();
  sub->add_option("--heads", m.num_heads, "Attention heads")->capture_default_str();
  sub->add_option("--d-ff", m.d_ff, "Feed-forward size")->capture_default_str();
  sub->add_option("--max-len", m.max_len, "Maximum tokens per sentence")->capture_default_str();
  sub->add_option("--dropout", m.dropout_prob, "Dropout probability")->capture_default_str();
  sub->add_flag("--untied", untied, "Separate decoder matrix instead of the token embeddings");
}

void add_train_options(CLI::App* sub, TrainConfig& t, std::string& decay,
                       std::optional<double>& max_grad_norm) {
  sub->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--batch-size", t.batch_size, "Batch size")->capture_default_str();
  sub->add_option("--warmup", t.warmup_fraction, "Warmup fraction of total steps")
      ->capture_default_str();
  sub->add_option("--decay", decay, "constant | linear")
      ->check(CLI::IsMember({"constant", "linear"}))
      ->capture_default_str();
  sub->add_option("--max-grad-norm", max_grad_norm, "Clip gradients to this L2 norm");
}

int cmd_pretrain(const CLI::App& sub, PretrainArgs& a, std::ostream& out) {
  require_file(a.corpus, "corpus");
  if (!a.vocab.empty()) require_file(a.vocab, "vocabulary");
  a.model.tie_prediction_weights = !a.untied;
  a.train.decay = parse_decay(a.decay);
  a.train.max_grad_norm = a.max_grad_norm;

  std::vector<std::string> corpus;
  try {
    corpus = load_sentences(a.corpus);
  } catch (const ParseError& e) {
    if (e.line() == 0) throw InsufficientData(e.what());
    throw;
  }
  const Vocab vocab = a.vocab.empty() ? build_vocab(corpus, a.vocab_size) : Vocab::load(a.vocab);
  a.model.vocab_size = vocab.size();
  a.model.validate();
  a.train.validate();

  const TrainResult r = pretrain_mlm(corpus, vocab, a.model, a.train);
  const fs::path dir = make_out_dir(a.out);
  save_checkpoint(r.checkpoint, (dir / "pretrained.dfs1").string());
  std::ostringstream log;
  for (const auto& s : r.log) log << json{{"step", s.step}, {"lr", s.lr}, {"loss", s.loss}}.dump() << "\n";
  write_text(dir / "pretrain_log.jsonl", log.str());
  write_json(dir / "pretrain_report.json",
             {{"config", {{"options", resolved_options(sub)},
                          {"model", to_json(a.model)},
                          {"train", to_json(a.train)}}},
              {"sentences", corpus.size()},
              {"vocab_size", vocab.size()},
              {"total_steps", r.total_steps},
              {"warmup_steps", r.warmup_steps},
              {"epoch_mean_loss", r.epoch_mean_loss}});
  out << "pretrained " << corpus.size() << " sentences, vocab " << vocab.size() << ", "
      << r.total_steps << " steps\n";
  if (!r.epoch_mean_loss.empty()) {
    out << "epoch loss " << r.epoch_mean_loss.front() << " -> " << r.epoch_mean_loss.back() << "\n";
  }
  out << "wrote " << (dir / "pretrained.dfs1").string() << "\n";
  return kSuccess;
}

// ---- finetune ---------------------------------------------------------------

struct FinetuneArgs {
  std::string dict, checkpoint, out, seeds = "1", decay = "constant";
  PoolingFlags pooling;
  double lr = 1e-4;
  bool grid = false;
  double grid_base = kDefaultGridBase;
  std::uint64_t split_seed = 0;
  TrainConfig train;
  bool train_head = false;
  std::optional<double> max_grad_norm;
  std::optional<double> dropout;
  std::optional<std::size_t> threads;
};

std::vector<DefinitionEntry> load_filtered(const std::string& path, const Vocab& vocab) {
  require_file(path, "dictionary");
  auto entries = filter_oov(load_dictionary(path), vocab);
  const std::size_t words = count_distinct_words(entries);
  if (words < 10) {
    throw InsufficientData(path + ": only " + std::to_string(words) +
                           " distinct in-vocabulary headwords (need at least 10)");
  }
  return entries;
}

std::map<std::string, double> rank_metrics_map(const RankReport& r, const std::string& prefix) {
  return {{prefix + "mrr", r.mrr}, {prefix + "top1", r.top1}, {prefix + "top3", r.top3},
          {prefix + "top10", r.top10}};
}

int cmd_finetune(const CLI::App& sub, FinetuneArgs& a, std::ostream& out) {
  Checkpoint pre = read_checkpoint(a.checkpoint);
  if (pre.provenance.phase != "pretrained") {
    throw BadCheckpoint(a.checkpoint + ": expected a pretrained checkpoint, found phase '" +
                        pre.provenance.phase + "'");
  }
  const auto seeds = parse_seeds(a.seeds);
  const auto entries = load_filtered(a.dict, pre.vocab);
  if (a.dropout) {
    pre.config.dropout_prob = *a.dropout;
    pre.config.validate();
  }
  a.train.pooling = a.pooling.resolve(nullptr);
  a.train.freeze_prediction_layer = !a.train_head;
  a.train.decay = parse_decay(a.decay);
  a.train.max_grad_norm = a.max_grad_norm;
  a.train.base_lr = a.lr;
  a.train.seed = seeds.front();
  a.train.validate();
  const SplitCorpus split = split_by_word(entries, {}, sub_seed(a.split_seed, "split"));
  const std::size_t threads = workers(a.threads);
  const fs::path dir = make_out_dir(a.out);

  json grid_json = nullptr;
  double lr = a.lr;
  if (a.grid) {
    const auto xs = default_grid_exponents();
    const GridSearchResult g = lr_grid_search(pre, split, a.train, xs, a.grid_base, threads);
    lr = g.selected_lr();
    grid_json = to_json(g);
    write_json(dir / "grid_search.json", grid_json);
    out << "grid: " << g.candidates.size() << " learning rates, selected " << lr << "\n";
  }

  std::mutex io;
  const MultiSeedReport report = multi_seed(
      [&](std::uint64_t seed) {
        TrainConfig c = a.train;
        c.base_lr = lr;
        c.seed = seed;
        const TrainResult r = finetune_defsent(pre, split.train, c);
        save_checkpoint(r.checkpoint, (dir / ("seed_" + std::to_string(seed) + ".dfs1")).string());
        const EncoderModel<float> m = r.checkpoint.to_model();
        auto metrics = rank_metrics_map(eval_word_prediction(m, pre.vocab, split.dev, c.pooling), "dev_");
        if (!split.test.empty()) {
          metrics.merge(rank_metrics_map(eval_word_prediction(m, pre.vocab, split.test, c.pooling), "test_"));
        }
        std::lock_guard lock(io);
        out << "seed " << seed << ": dev MRR " << format_fraction(metrics["dev_mrr"]) << "\n";
        return metrics;
      },
      seeds, threads);

  TrainConfig resolved = a.train;
  resolved.base_lr = lr;
  const std::string pool = pooling_name(resolved.pooling.strategy);
  const std::string table = "dev\n" + rank_table(pool, lr_label(lr), report, "dev_") + "\ntest\n" +
                            rank_table(pool, lr_label(lr), report, "test_");
  write_text(dir / "report.txt", table);
  write_json(dir / "report.json",
             {{"config", {{"options", resolved_options(sub)},
                          {"model", to_json(pre.config)},
                          {"train", to_json(resolved)},
                          {"seeds", seeds}}},
              {"split", {{"train", split.train.size()}, {"dev", split.dev.size()}, {"test", split.test.size()}}},
              {"selected_lr", lr},
              {"grid", grid_json},
              {"metrics", to_json(report)}});
  out << table;
  return kSuccess;
}

// ---- evaluation -------------------------------------------------------------

struct EvalWordArgs {
  std::string checkpoint, dict, out, split = "all";
  std::uint64_t split_seed = 0;
  PoolingFlags pooling;
};

int cmd_eval_wordpred(const CLI::App& sub, EvalWordArgs& a, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(a.checkpoint);
  const Pooling pooling = a.pooling.resolve(&ckpt);
  auto entries = load_filtered(a.dict, ckpt.vocab);
  if (a.split != "all") {
    const SplitCorpus s = split_by_word(entries, {}, sub_seed(a.split_seed, "split"));
    entries = a.split == "train" ? s.train : a.split == "dev" ? s.dev : s.test;
  }
  const RankReport r = eval_word_prediction(ckpt.to_model(), ckpt.vocab, entries, pooling);
  const std::string table = render_table(
      {"Pooling", "MRR", "Top1", "Top3", "Top10", "n"},
      {{{pooling_name(pooling.strategy), format_fraction(r.mrr), format_fraction(r.top1),
         format_fraction(r.top3), format_fraction(r.top10), std::to_string(r.n_examples)}}});
  if (!a.out.empty()) {
    const fs::path dir = make_out_dir(a.out);
    write_json(dir / "wordpred_report.json",
               {{"config", {{"options", resolved_options(sub)}, {"checkpoint_provenance", to_json(ckpt.provenance)}}},
                {"pooling", pooling_name(pooling.strategy)},
                {"report", to_json(r)}});
    write_text(dir / "wordpred_report.txt", table);
  }
  out << table;
  return kSuccess;
}

struct EvalStsArgs {
  std::string checkpoint, out;
  std::vector<std::string> files;
  PoolingFlags pooling;
};

int cmd_eval_sts(const CLI::App& sub, EvalStsArgs& a, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(a.checkpoint);
  for (const auto& f : a.files) require_file(f, "STS file");
  const Pooling pooling = a.pooling.resolve(&ckpt);
  const EncoderModel<float> model = ckpt.to_model();
  std::vector<TableRow> rows;
  json results = json::array();
  double sum = 0.0;
  for (const auto& f : a.files) {
    const STSResult r = eval_sts(model, ckpt.vocab, load_sts(f), pooling, fs::path(f).stem().string());
    rows.push_back({{r.dataset, format_percent(r.rho), std::to_string(r.n_pairs)}});
    results.push_back(to_json(r));
    sum += r.rho;
  }
  if (a.files.size() > 1) rows.push_back({{"Avg.", format_percent(sum / a.files.size()), ""}});
  const std::string table = render_table({"Dataset", "rho x 100", "pairs"}, rows);
  if (!a.out.empty()) {
    const fs::path dir = make_out_dir(a.out);
    write_json(dir / "sts_report.json",
               {{"config", {{"options", resolved_options(sub)}, {"checkpoint_provenance", to_json(ckpt.provenance)}}},
                {"pooling", pooling_name(pooling.strategy)},
                {"results", results},
                {"average_rho", sum / a.files.size()}});
    write_text(dir / "sts_report.txt", table);
  }
  out << table;
  return kSuccess;
}

struct EvalClsArgs {
  std::string checkpoint, out;
  std::vector<std::string> files;
  PoolingFlags pooling;
  ProbeOptions probe;
};

int cmd_eval_cls(const CLI::App& sub, EvalClsArgs& a, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(a.checkpoint);
  for (const auto& f : a.files) require_file(f, "classification file");
  const Pooling pooling = a.pooling.resolve(&ckpt);
  const EncoderModel<float> model = ckpt.to_model();
  std::vector<TableRow> rows;
  json results = json::object();
  double sum = 0.0;
  for (const auto& f : a.files) {
    const auto data = load_classification(f);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (const auto& row : data) {
      const auto v = embed_sentence(model, ckpt.vocab, row.sentence, pooling);
      x.emplace_back(v.begin(), v.end());
      y.push_back(row.label);
    }
    const ProbeReport r = probe_classifier(x, y, a.probe);
    const std::string name = fs::path(f).stem().string();
    rows.push_back({{name, format_percent(r.mean_accuracy), std::to_string(data.size())}});
    results[name] = to_json(r);
    sum += r.mean_accuracy;
  }
  if (a.files.size() > 1) rows.push_back({{"Avg.", format_percent(sum / a.files.size()), ""}});
  const std::string table = render_table({"Task", "accuracy x 100", "n"}, rows);
  if (!a.out.empty()) {
    const fs::path dir = make_out_dir(a.out);
    write_json(dir / "cls_report.json",
               {{"config", {{"options", resolved_options(sub)}, {"checkpoint_provenance", to_json(ckpt.provenance)}}},
                {"pooling", pooling_name(pooling.strategy)},
                {"results", results},
                {"average_accuracy", sum / a.files.size()}});
    write_text(dir / "cls_report.txt", table);
  }
  out << table;
  return kSuccess;
}

// ---- inference --------------------------------------------------------------

struct EncodeArgs {
  std::string checkpoint, input = "-", output = "-";
  PoolingFlags pooling;
};

int cmd_encode(EncodeArgs& a, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(a.checkpoint);
  require_file(a.input, "input");
  const Pooling pooling = a.pooling.resolve(&ckpt);
  const EncoderModel<float> model = ckpt.to_model();
  std::ifstream file;
  if (a.input != "-") {
    file.open(a.input, std::ios::binary);
    if (!file) throw MissingInput("cannot open input " + a.input);
  }
  std::istream& in = a.input == "-" ? std::cin : file;
  std::ofstream ofile;
  if (a.output != "-") {
    ofile.open(a.output, std::ios::binary);
    if (!ofile) throw IoError("cannot write " + a.output);
  }
  std::ostream& dst = a.output == "-" ? out : ofile;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto v = embed_sentence(model, ckpt.vocab, line, pooling);
    dst << json{{"sentence", line}, {"vector", v}}.dump() << "\n";
  }
  return kSuccess;
}

struct PredictArgs {
  std::string checkpoint, sentence;
  std::size_t top = 10;
  bool as_json = false;
  PoolingFlags pooling;
};

int cmd_predict_word(PredictArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = read_checkpoint(a.checkpoint);
  if (a.top < 1) throw ConfigError("--top must be at least 1");
  const Pooling pooling = a.pooling.resolve(&ckpt);
  const EncoderModel<float> model = ckpt.to_model();
  const auto u = embed_sentence(model, ckpt.vocab, a.sentence, pooling);
  const auto pred = predict_word(model, Tensor<float>({1, u.size()}, u));
  const auto probs = pred.probabilities.row(0);
  std::size_t k = a.top;
  if (k > probs.size()) {
    err << "warning: --top " << k << " exceeds vocabulary size " << probs.size() << ", clamped\n";
    k = probs.size();
  }
  std::vector<std::size_t> order(probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return probs[x] > probs[y]; });
  json items = json::array();
  for (std::size_t i = 0; i < k; ++i) {
    const std::string& word = ckpt.vocab.token(static_cast<TokenId>(order[i]));
    if (a.as_json) {
      items.push_back({{"rank", i + 1}, {"word", word}, {"probability", probs[order[i]]}});
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", static_cast<double>(probs[order[i]]));
      out << (i + 1) << "\t" << word << "\t" << buf << "\n";
    }
  }
  if (a.as_json) out << json{{"sentence", a.sentence}, {"predictions", items}}.dump() << "\n";
  return kSuccess;
}

// Keys outside any [section] belong to the command being run, so one flat
// file per command works as well as a sectioned file for all of them.
class CommandConfig : public CLI::ConfigBase {
 public:
  explicit CommandConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    auto items = CLI::ConfigBase::from_config(in);
    const auto subs = app_->get_subcommands();
    if (subs.empty()) return items;
    const std::string name = subs.front()->get_name();
    for (auto& item : items) {
      if (item.parents.empty() && item.name != "++" && item.name != "--") item.parents = {name};
    }
    return items;
  }

 private:
  const CLI::App* app_;
};

int report_error(std::ostream& err, int code, const std::string& what) {
  err << "error: " << what << "\n";
  return code;
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  auto number = [&](const std::string& s) -> std::uint64_t {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size() || s.front() == '-') {
      throw ConfigError("bad seed list '" + spec + "'");
    }
    return v;
  };
  std::vector<std::uint64_t> seeds;
  const auto range = spec.find("..");
  if (range != std::string::npos) {
    const auto lo = number(spec.substr(0, range)), hi = number(spec.substr(range + 2));
    if (hi < lo || hi - lo > 100000) throw ConfigError("bad seed range '" + spec + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) seeds.push_back(number(part));
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

std::size_t thread_cap() {
  const char* env = std::getenv("DEFSENT_THREADS");
  if (env == nullptr || *env == '\0') return std::max(1u, std::thread::hardware_concurrency());
  const std::string s(env);
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || v < 1) throw ConfigError("DEFSENT_THREADS must be a positive integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DefSent sentence encoder: pretraining, fine-tuning, evaluation and inference", "defsent"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "defsent 0.1.0");
  app.set_config("--config", "", "Key-value file of option values (flags override it)");
  app.config_formatter(std::make_shared<CommandConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);
  auto config_flag = [](CLI::App* sub) { sub->fallthrough(); };

  PretrainArgs pa;
  auto* pre = app.add_subcommand("pretrain", "Masked-LM pretraining on a sentence corpus");
  config_flag(pre);
  pre->add_option("--corpus", pa.corpus, "One sentence per line")->required();
  pre->add_option("--out", pa.out, "Output directory")->required();
  pre->add_option("--vocab", pa.vocab, "Vocabulary file (one token per line) instead of building one");
  pre->add_option("--vocab-size", pa.vocab_size, "Vocabulary size including specials")->capture_default_str();
  pre->add_option("--lr", pa.train.base_lr, "Peak learning rate")->capture_default_str();
  pre->add_option("--mask-prob", pa.train.mask_prob, "Masking probability")->capture_default_str();
  pre->add_option("--seed", pa.train.seed, "Master seed")->capture_default_str();
  add_model_options(pre, pa.model, pa.untied);
  add_train_options(pre, pa.train, pa.decay, pa.max_grad_norm);

  FinetuneArgs fa;
  auto* ft = app.add_subcommand("finetune", "DefSent fine-tuning through the frozen word prediction layer");
  config_flag(ft);
  ft->add_option("--dict", fa.dict, "Dictionary (JSON lines or TSV)")->required();
  ft->add_option("--checkpoint", fa.checkpoint, "Pretrained checkpoint")->required();
  ft->add_option("--out", fa.out, "Output directory")->required();
  fa.pooling.add(ft, true);
  auto* lr_opt = ft->add_option("--lr", fa.lr, "Learning rate")->capture_default_str();
  auto* grid_opt = ft->add_flag("--grid", fa.grid, "Search lr = 2^x * base, x in {0, 0.5, ..., 7}, by dev MRR");
  lr_opt->excludes(grid_opt);
  ft->add_option("--grid-base", fa.grid_base, "Grid base")->capture_default_str();
  ft->add_option("--seeds", fa.seeds, "Run seeds: 3, 1,2,5 or 1..10")->capture_default_str();
  ft->add_option("--split-seed", fa.split_seed, "Seed of the word-level 8:1:1 split")->capture_default_str();
  ft->add_flag("--train-head", fa.train_head, "Also train the word prediction layer (ablation)");
  ft->add_option("--dropout", fa.dropout, "Override the checkpoint's dropout");
  ft->add_option("--threads", fa.threads, "Parallel runs (capped by DEFSENT_THREADS)");
  add_train_options(ft, fa.train, fa.decay, fa.max_grad_norm);

  EvalWordArgs wa;
  auto* ew = app.add_subcommand("eval-wordpred", "Rank headwords from their definitions (MRR, top-k)");
  config_flag(ew);
  ew->add_option("--checkpoint", wa.checkpoint, "Checkpoint")->required();
  ew->add_option("--dict", wa.dict, "Dictionary (JSON lines or TSV)")->required();
  ew->add_option("--split", wa.split, "all | train | dev | test")
      ->check(CLI::IsMember({"all", "train", "dev", "test"}))
      ->capture_default_str();
  ew->add_option("--split-seed", wa.split_seed, "Seed of the word-level split")->capture_default_str();
  ew->add_option("--out", wa.out, "Directory for the JSON and text report");
  wa.pooling.add(ew, false);

  EvalStsArgs sa;
  auto* es = app.add_subcommand("eval-sts", "Spearman correlation of cosine similarity with gold scores");
  config_flag(es);
  es->add_option("--checkpoint", sa.checkpoint, "Checkpoint")->required();
  es->add_option("--sts", sa.files, "sentence_a<TAB>sentence_b<TAB>score files")->required();
  es->add_option("--out", sa.out, "Directory for the JSON and text report");
  sa.pooling.add(es, false);

  EvalClsArgs ca;
  auto* ec = app.add_subcommand("eval-cls", "Logistic-regression probe with k-fold cross-validation");
  config_flag(ec);
  ec->add_option("--checkpoint", ca.checkpoint, "Checkpoint")->required();
  ec->add_option("--data", ca.files, "label<TAB>sentence files")->required();
  ec->add_option("--folds", ca.probe.folds, "Cross-validation folds")->capture_default_str();
  ec->add_option("--seed", ca.probe.seed, "Fold shuffle seed")->capture_default_str();
  ec->add_option("--iterations", ca.probe.iterations, "Gradient steps per fold")->capture_default_str();
  ec->add_option("--out", ca.out, "Directory for the JSON and text report");
  ca.pooling.add(ec, false);

  EncodeArgs na;
  auto* en = app.add_subcommand("encode", "Sentence embeddings as JSON lines");
  config_flag(en);
  en->add_option("--checkpoint", na.checkpoint, "Checkpoint")->required();
  en->add_option("--input", na.input, "Sentences, one per line (- for stdin)")->capture_default_str();
  en->add_option("--output", na.output, "Destination (- for stdout)")->capture_default_str();
  na.pooling.add(en, false);

  PredictArgs pw;
  auto* pr = app.add_subcommand("predict-word", "Most probable words for a sentence embedding");
  config_flag(pr);
  pr->add_option("--checkpoint", pw.checkpoint, "Checkpoint")->required();
  pr->add_option("--sentence", pw.sentence, "Input sentence")->required();
  pr->add_option("--top", pw.top, "Number of words")->capture_default_str();
  pr->add_flag("--json", pw.as_json, "JSON output");
  pw.pooling.add(pr, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << "\n";
    return kSuccess;
  } catch (const CLI::FileError& e) {
    return report_error(err, kMissingInput, e.what());
  } catch (const CLI::ParseError& e) {
    return report_error(err, kConfigError, e.what());
  }

  try {
    if (pre->parsed()) return cmd_pretrain(*pre, pa, out);
    if (ft->parsed()) return cmd_finetune(*ft, fa, out);
    if (ew->parsed()) return cmd_eval_wordpred(*ew, wa, out);
    if (es->parsed()) return cmd_eval_sts(*es, sa, out);
    if (ec->parsed()) return cmd_eval_cls(*ec, ca, out);
    if (en->parsed()) return cmd_encode(na, out);
    if (pr->parsed()) return cmd_predict_word(pw, out, err);
  } catch (const MissingInput& e) {
    return report_error(err, kMissingInput, e.what());
  } catch (const ConfigError& e) {
    return report_error(err, kConfigError, e.what());
  } catch (const BadCheckpoint& e) {
    return report_error(err, kBadCheckpoint, e.what());
  } catch (const InsufficientData& e) {
    return report_error(err, kInsufficientData, e.what());
  } catch (const ParseError& e) {
    return report_error(err, kMalformedTask, e.what());
  } catch (const CheckpointError& e) {
    return report_error(err, kBadCheckpoint, e.what());
  } catch (const InvalidArgument& e) {
    return report_error(err, kConfigError, e.what());
  } catch (const IoError& e) {
    return report_error(err, kMissingInput, e.what());
  } catch (const std::exception& e) {
    return report_error(err, kInternalError, e.what());
  }
  return report_error(err, kConfigError, "no command given");
}

}  // namespace defsent::cli
