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


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <sstream>

#include "defsent/checkpoint.hpp"
#include "defsent/cli.hpp"
#include "defsent/evaluation.hpp"

namespace py = pybind11;
using namespace defsent;

namespace {

Pooling pooling_arg(const Checkpoint& ckpt, const std::string& name, std::optional<bool> include_specials) {
  Pooling p = ckpt.pooling();
  if (!name.empty()) p.strategy = parse_pooling(name);
  if (include_specials) p.include_specials = *include_specials;
  return p;
}

class Encoder {
 public:
  explicit Encoder(const std::string& path) : ckpt_(load_checkpoint(path)), model_(ckpt_.to_model()) {}

  py::array_t<float> encode(const std::vector<std::string>& sentences, const std::string& pooling,
                            std::optional<bool> include_specials) const {
    const Pooling p = pooling_arg(ckpt_, pooling, include_specials);
    const std::size_t d = ckpt_.config.d_model;
    py::array_t<float> out({sentences.size(), d});
    auto view = out.mutable_unchecked<2>();
    {
      py::gil_scoped_release release;
      for (std::size_t i = 0; i < sentences.size(); ++i) {
        const auto v = embed_sentence(model_, ckpt_.vocab, sentences[i], p);
        for (std::size_t j = 0; j < d; ++j) view(i, j) = v[j];
      }
    }
    return out;
  }

  std::vector<std::pair<std::string, double>> predict_word(const std::string& sentence, std::size_t top,
                                                           const std::string& pooling) const {
    const Pooling p = pooling_arg(ckpt_, pooling, std::nullopt);
    const auto v = embed_sentence(model_, ckpt_.vocab, sentence, p);
    const auto pred = defsent::predict_word(model_, Tensor<float>({1, v.size()}, v));
    const auto& probs = pred.probabilities.storage();
    std::vector<std::size_t> order(probs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    top = std::min(top, order.size());
    std::partial_sort(order.begin(), order.begin() + top, order.end(),
                      [&](std::size_t a, std::size_t b) { return probs[a] > probs[b] || (probs[a] == probs[b] && a < b); });
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < top; ++i) {
      out.emplace_back(ckpt_.vocab.token(static_cast<TokenId>(order[i])), probs[order[i]]);
    }
    return out;
  }

  py::dict info() const {
    py::dict d;
    d["vocab_size"] = ckpt_.config.vocab_size;
    d["d_model"] = ckpt_.config.d_model;
    d["num_layers"] = ckpt_.config.num_layers;
    d["phase"] = ckpt_.provenance.phase;
    d["pooling"] = ckpt_.provenance.pooling;
    return d;
  }

 private:
  Checkpoint ckpt_;
  EncoderModel<float> model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "DefSent sentence encoder bindings";

  py::register_exception<CheckpointError>(m, "CheckpointError");
  py::register_exception<InsufficientData>(m, "InsufficientData");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  py::class_<Encoder>(m, "Encoder")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("encode", &Encoder::encode, py::arg("sentences"), py::arg("pooling") = "",
           py::arg("include_specials") = py::none())
      .def("predict_word", &Encoder::predict_word, py::arg("sentence"), py::arg("top") = 10,
           py::arg("pooling") = "")
      .def_property_readonly("info", &Encoder::info);

  m.def("spearman_rho", [](std::vector<double> x, std::vector<double> y) { return spearman_rho(x, y); });
  m.def("cosine_similarity",
        [](std::vector<double> u, std::vector<double> v) { return cosine_similarity(std::span<const double>(u), std::span<const double>(v)); });
  m.def("rank_of_target",
        [](std::vector<double> scores, std::size_t target) { return rank_of_target(std::span<const double>(scores), target); });
  m.def("rank_metrics", [](std::vector<std::size_t> ranks) {
    const RankReport r = rank_metrics(ranks);
    return py::dict(py::arg("mrr") = r.mrr, py::arg("top1") = r.top1, py::arg("top3") = r.top3,
                    py::arg("top10") = r.top10, py::arg("n") = r.n_examples);
  });
  m.def("random_ranking_mrr", &random_ranking_mrr);
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a defsent subcommand in process; returns (exit_code, stdout, stderr).");
}
