// Copyright 2026 The OpenQA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "openqa/selector.hpp"

#include <algorithm>
#include <cmath>

#include "jsonl.hpp"
#include "openqa/error.hpp"
#include "openqa/nn/layers.hpp"

namespace openqa::selector {

using nn::Gradients;
using nn::ModelParameters;
using nn::Tensor;

namespace {

std::string layer_prefix(std::size_t i) { return "enc" + std::to_string(i) + "."; }

std::size_t layer_count(const ModelParameters& p) {
  std::size_t n = 0;
  while (p.contains(layer_prefix(n) + "Wq")) ++n;
  return n;
}

std::size_t head_count(const ModelParameters& p) {
  return p.arch.value("heads", std::size_t{1});
}

struct Trace {
  std::vector<std::uint32_t> ids;
  std::vector<std::uint32_t> positions;
  std::vector<nn::EncoderTrace> layers;
  Tensor cls;
  double score = 0.0;
};

Trace forward(const SelectorModel& m, const std::vector<text::TokenId>& ids) {
  const auto& p = m.params;
  if (ids.empty()) throw EmptyInput("empty selector sequence");
  const std::size_t max_len = p.at("P").dim(0);
  if (ids.size() > max_len)
    throw SequenceTooLong(std::to_string(ids.size()) + " ids exceed " + std::to_string(max_len));
  Trace t;
  t.ids = ids;
  t.positions.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) t.positions[i] = static_cast<std::uint32_t>(i);
  Tensor x = nn::embedding_lookup(p.at("E"), t.ids);
  x += nn::embedding_lookup(p.at("P"), t.positions);
  const std::size_t heads = head_count(p);
  for (std::size_t l = 0, n = layer_count(p); l < n; ++l) {
    t.layers.push_back(nn::transformer_trace(nn::encoder_weights(p, layer_prefix(l)), x, heads));
    x = t.layers.back().ln2.output;
  }
  auto row = x.row(0);
  t.cls = Tensor::vector(std::vector<double>(row.begin(), row.end()));
  t.score = nn::linear_forward(p.at("head.W"), p.at("head.b"), t.cls)[0];
  return t;
}

// Accumulates dscore * d score / d params into g.
void backward(const SelectorModel& m, const Trace& t, double dscore, Gradients& g) {
  const auto& p = m.params;
  auto head = nn::linear_backward(p.at("head.W"), t.cls, Tensor::vector({dscore}));
  g.at("head.W") += head.W;
  g.at("head.b") += head.b;
  const std::size_t d = t.cls.size();
  Tensor dy({t.ids.size(), d});
  for (std::size_t c = 0; c < d; ++c) dy.at(0, c) = head.x[c];
  for (std::size_t l = t.layers.size(); l-- > 0;)
    dy = nn::transformer_backward(nn::encoder_weights(p, layer_prefix(l)), t.layers[l], dy,
                                  nn::encoder_grads(g, layer_prefix(l)));
  nn::embedding_backward(g.at("E"), t.ids, dy);
  nn::embedding_backward(g.at("P"), t.positions, dy);
}

std::vector<double> softmax_of(const std::vector<double>& scores) {
  return nn::softmax(Tensor::vector(scores)).values();
}

}  // namespace

ModelParameters init_selector(std::size_t vocab_size, const nn::TrainOptions& o) {
  nn::Rng rng(o.seed);
  ModelParameters p;
  p.rng_seed = o.seed;
  p.arch = {{"model", "selector"}, {"vocab_size", vocab_size}, {"dim", o.dim},
            {"heads", o.heads},      {"layers", o.layers},     {"ffn", o.ffn},
            {"max_len", o.max_len}};
  if (o.heads == 0 || o.dim % o.heads != 0)
    throw ShapeMismatch("model dim must be divisible by the head count");
  p.add_xavier("E", {vocab_size, o.dim}, o.dim, o.dim, rng);
  p.add_xavier("P", {o.max_len, o.dim}, o.dim, o.dim, rng);
  for (std::size_t l = 0; l < o.layers; ++l) nn::add_encoder_params(p, layer_prefix(l), o.dim, o.ffn, rng);
  p.add_xavier("head.W", {1, o.dim}, o.dim, 1, rng);
  p.add_constant("head.b", {1}, 0.0);
  return p;
}

void validate_selector(const SelectorModel& model) {
  const auto& p = model.params;
  for (const char* name : {"E", "P", "head.W", "head.b"})
    if (!p.contains(name)) throw ShapeMismatch(std::string("selector model lacks '") + name + "'");
  const std::size_t d = p.at("E").dim(1);
  auto expect = [&](const std::string& name, const Tensor::Shape& shape) {
    if (!p.contains(name)) throw ShapeMismatch("selector model lacks '" + name + "'");
    if (p.at(name).shape() != shape)
      throw ShapeMismatch("selector tensor '" + name + "' has shape " +
                          nn::shape_string(p.at(name).shape()) + ", expected " +
                          nn::shape_string(shape));
  };
  expect("E", {model.vocab.size(), d});
  expect("P", {p.at("P").dim(0), d});
  expect("head.W", {1, d});
  expect("head.b", {1});
  const std::size_t layers = layer_count(p);
  if (layers == 0) throw ShapeMismatch("selector model has no encoder layers");
  if (d % head_count(p) != 0) throw ShapeMismatch("model dim not divisible by heads");
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string pre = layer_prefix(l);
    const std::size_t ffn = p.at(pre + "W1").dim(0);
    for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) expect(pre + w, {d, d});
    for (const char* v : {"bo", "ln1_gain", "ln1_bias", "b2", "ln2_gain", "ln2_bias"})
      expect(pre + v, {d});
    expect(pre + "W1", {ffn, d});
    expect(pre + "b1", {ffn});
    expect(pre + "W2", {d, ffn});
  }
}

std::vector<text::TokenId> build_sequence(const std::string& question, const std::string& answer,
                                          const text::Vocabulary& vocab, std::size_t max_len) {
  auto q = text::tokenize(question).tokens;
  auto a = text::tokenize(answer).tokens;
  if (q.empty()) throw EmptyInput("question has no tokens");
  if (a.empty()) throw EmptyInput("answer has no tokens");
  if (max_len < 3) throw SequenceTooLong("max_len below the three marker ids");
  std::size_t budget = max_len - 3;
  std::size_t keep_a = std::min(a.size(), budget);
  std::size_t keep_q = std::min(q.size(), budget - keep_a);
  q.resize(keep_q);
  a.resize(keep_a);
  std::vector<text::TokenId> ids{text::Vocabulary::kCls};
  for (auto id : vocab.encode(q)) ids.push_back(id);
  ids.push_back(text::Vocabulary::kSep);
  for (auto id : vocab.encode(a)) ids.push_back(id);
  ids.push_back(text::Vocabulary::kSep);
  return ids;
}

double score_sequence(const SelectorModel& model, const std::vector<text::TokenId>& ids) {
  return forward(model, ids).score;
}

Gradients score_gradients(const SelectorModel& model, const std::vector<text::TokenId>& ids) {
  Gradients g = nn::zero_gradients(model.params);
  backward(model, forward(model, ids), 1.0, g);
  return g;
}

SelectionResult select_from_scores(const std::vector<double>& scores,
                                   const std::vector<AnswerCandidate>& candidates) {
  if (candidates.empty()) throw NoCandidates("nothing to select from");
  SelectionResult r;
  r.probabilities = softmax_of(scores);
  // max_element keeps the first of equal maxima.
  r.chosen = static_cast<std::size_t>(
      std::max_element(r.probabilities.begin(), r.probabilities.end()) - r.probabilities.begin());
  r.answer = candidates[r.chosen];
  return r;
}

SelectionResult select(const SelectorModel& model, const std::string& question,
                       const std::vector<AnswerCandidate>& candidates) {
  if (candidates.empty()) throw NoCandidates("nothing to select from");
  const std::size_t max_len = model.params.at("P").dim(0);
  std::vector<double> scores;
  for (const auto& c : candidates)
    scores.push_back(score_sequence(model, build_sequence(question, c.answer, model.vocab, max_len)));
  return select_from_scores(scores, candidates);
}

std::vector<SelectorExample> parse_selector_data(const std::string& jsonl) {
  return detail::parse_jsonl<SelectorExample>(jsonl, [](const nlohmann::json& j) {
    return SelectorExample{j.at("question").get<std::string>(),
                           j.at("candidates").get<std::vector<std::string>>(),
                           j.at("gold").get<std::size_t>()};
  });
}

std::vector<SelectorExample> load_selector_data(const std::string& path) {
  return parse_selector_data(detail::read_file(path));
}

nn::TrainResult train_selector(const std::vector<SelectorExample>& data,
                               const text::Vocabulary& vocab, const nn::TrainOptions& options) {
  if (data.empty()) throw EmptyDataset("selector dataset is empty");
  std::vector<std::vector<std::vector<text::TokenId>>> sequences;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    if (ex.candidates.size() < 2)
      throw ExampleError("TooFewCandidates", i, "needs at least two candidates");
    if (ex.gold >= ex.candidates.size())
      throw ExampleError("GoldOutOfRange", i,
                         "gold " + std::to_string(ex.gold) + " with " +
                             std::to_string(ex.candidates.size()) + " candidates");
    auto& seqs = sequences.emplace_back();
    try {
      for (const auto& c : ex.candidates)
        seqs.push_back(build_sequence(ex.question, c, vocab, options.max_len));
    } catch (const EmptyInput& e) {
      throw ExampleError("EmptyInput", i, e.what());
    }
  }
  SelectorModel model{init_selector(vocab.size(), options), vocab};
  nn::Rng rng = nn::shuffle_rng(options.seed);
  nn::TrainResult result;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double total = 0;
    for (std::size_t i : nn::shuffled_order(data.size(), rng)) {
      std::vector<Trace> traces;
      std::vector<double> scores;
      for (const auto& s : sequences[i]) {
        traces.push_back(forward(model, s));
        scores.push_back(traces.back().score);
      }
      auto probs = softmax_of(scores);
      const std::size_t gold = data[i].gold;
      total += -std::log(std::max(probs[gold], 1e-12));
      Gradients g = nn::zero_gradients(model.params);
      for (std::size_t c = 0; c < traces.size(); ++c)
        backward(model, traces[c], probs[c] - (c == gold ? 1.0 : 0.0), g);
      nn::sgd_step(model.params, g, options.lr);
    }
    result.epoch_losses.push_back(total / static_cast<double>(data.size()));
  }
  result.params = std::move(model.params);
  return result;
}

}  // namespace openqa::selector
