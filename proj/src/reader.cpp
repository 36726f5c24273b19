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

#include "openqa/reader.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jsonl.hpp"
#include "openqa/error.hpp"
#include "openqa/nn/layers.hpp"

namespace openqa::reader {

using nn::CellKind;
using nn::Gradients;
using nn::ModelParameters;
using nn::Tensor;

nn::ModelParameters init_reader(std::size_t vocab_size, const nn::TrainOptions& o) {
  nn::Rng rng(o.seed);
  ModelParameters p;
  p.rng_seed = o.seed;
  p.arch = {{"model", "reader"}, {"vocab_size", vocab_size}, {"dim", o.dim}, {"hidden", o.hidden}};
  const std::size_t h2 = 2 * o.hidden;
  p.add_xavier("E", {vocab_size, o.dim}, o.dim, o.dim, rng);
  nn::add_cell_params(p, "q_gru_f.", CellKind::kGru, o.dim, o.hidden, rng);
  nn::add_cell_params(p, "q_gru_b.", CellKind::kGru, o.dim, o.hidden, rng);
  p.add_xavier("q.u", {h2}, h2, 1, rng);
  nn::add_cell_params(p, "p_gru_f.", CellKind::kGru, o.dim, o.hidden, rng);
  nn::add_cell_params(p, "p_gru_b.", CellKind::kGru, o.dim, o.hidden, rng);
  p.add_xavier("W_s", {h2, h2}, h2, h2, rng);
  p.add_xavier("W_e", {h2, h2}, h2, h2, rng);
  return p;
}

void validate_reader(const ReaderModel& model) {
  const auto& p = model.params;
  auto need = [&](const std::string& name, const nn::Tensor::Shape& shape) {
    if (!p.contains(name)) throw ShapeMismatch("reader model lacks '" + name + "'");
    if (p.at(name).shape() != shape)
      throw ShapeMismatch("reader tensor '" + name + "' has shape " +
                          nn::shape_string(p.at(name).shape()) + ", expected " +
                          nn::shape_string(shape));
  };
  if (!p.contains("E") || p.at("E").rank() != 2 || !p.contains("q_gru_f.U"))
    throw ShapeMismatch("reader model lacks embeddings or encoders");
  const std::size_t d = p.at("E").dim(1);
  const std::size_t h = p.at("q_gru_f.U").dim(1);
  const std::size_t gates = nn::gate_count(CellKind::kGru);
  need("E", {model.vocab.size(), d});
  for (const char* prefix : {"q_gru_f.", "q_gru_b.", "p_gru_f.", "p_gru_b."}) {
    need(std::string(prefix) + "W", {gates * h, d});
    need(std::string(prefix) + "U", {gates * h, h});
    need(std::string(prefix) + "b", {gates * h});
  }
  need("q.u", {2 * h});
  need("W_s", {2 * h, 2 * h});
  need("W_e", {2 * h, 2 * h});
  if (model.max_span_len == 0) throw ShapeMismatch("max_span_len must be positive");
}

namespace {

Tensor matvec(const Tensor& W, const Tensor& v) {
  Tensor out({W.rows()});
  for (std::size_t r = 0; r < W.rows(); ++r) {
    auto row = W.row(r);
    double s = 0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * v[c];
    out[r] = s;
  }
  return out;
}

struct Trace {
  std::vector<std::uint32_t> q_ids;
  Tensor q_x;
  nn::BiTrace q_enc;
  nn::AttentionResult q_pool;
  std::vector<std::uint32_t> p_ids;
  Tensor p_x;
  nn::BiTrace p_enc;
  Tensor v_start;  // W_s q
  Tensor v_end;    // W_e q
  Logits logits;
};

Trace forward(const ReaderModel& m, const std::string& question,
              const std::vector<std::string>& passage_tokens) {
  if (passage_tokens.empty()) throw EmptyPassage("passage has no tokens");
  auto q_tokens = text::tokenize(question).tokens;
  if (q_tokens.empty()) throw EmptyQuestion("question has no tokens");
  const auto& p = m.params;
  Trace t;
  t.q_ids = m.vocab.encode(q_tokens);
  t.q_x = nn::embedding_lookup(p.at("E"), t.q_ids);
  t.q_enc = nn::bidirectional_trace(CellKind::kGru, nn::cell_weights(p, "q_gru_f."),
                                    nn::cell_weights(p, "q_gru_b."), t.q_x);
  t.q_pool = nn::attention(p.at("q.u"), t.q_enc.output, t.q_enc.output);
  t.p_ids = m.vocab.encode(passage_tokens);
  t.p_x = nn::embedding_lookup(p.at("E"), t.p_ids);
  t.p_enc = nn::bidirectional_trace(CellKind::kGru, nn::cell_weights(p, "p_gru_f."),
                                    nn::cell_weights(p, "p_gru_b."), t.p_x);
  t.v_start = matvec(p.at("W_s"), t.q_pool.context);
  t.v_end = matvec(p.at("W_e"), t.q_pool.context);
  t.logits.start = matvec(t.p_enc.output, t.v_start);
  t.logits.end = matvec(t.p_enc.output, t.v_end);
  return t;
}

void backward(const ReaderModel& m, const Trace& t, const Tensor& dstart, const Tensor& dend,
              Gradients& g) {
  const auto& p = m.params;
  const Tensor& H = t.p_enc.output;
  const std::size_t len = H.rows(), width = H.cols();
  Tensor dH(H.shape());
  Tensor dvs({width}), dve({width});
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t c = 0; c < width; ++c) {
      dH.at(i, c) = dstart[i] * t.v_start[c] + dend[i] * t.v_end[c];
      dvs[c] += dstart[i] * H.at(i, c);
      dve[c] += dend[i] * H.at(i, c);
    }
  }
  const Tensor& q = t.q_pool.context;
  Tensor dq(q.shape());
  auto bilinear = [&](const Tensor& W, const Tensor& dv, Tensor& dW) {
    for (std::size_t r = 0; r < W.rows(); ++r) {
      for (std::size_t c = 0; c < W.cols(); ++c) {
        dW.at(r, c) += dv[r] * q[c];
        dq[c] += W.at(r, c) * dv[r];
      }
    }
  };
  bilinear(p.at("W_s"), dvs, g.at("W_s"));
  bilinear(p.at("W_e"), dve, g.at("W_e"));

  Tensor dp_x = nn::bidirectional_backward(t.p_enc, nn::cell_weights(p, "p_gru_f."),
                                           nn::cell_weights(p, "p_gru_b."),
                                           nn::cell_grads(g, "p_gru_f."),
                                           nn::cell_grads(g, "p_gru_b."), dH);
  nn::embedding_backward(g.at("E"), t.p_ids, dp_x);

  auto a = nn::attention_backward(p.at("q.u"), t.q_enc.output, t.q_enc.output, t.q_pool, dq);
  g.at("q.u") += a.query;
  Tensor dq_states = a.keys;
  dq_states += a.values;
  Tensor dq_x = nn::bidirectional_backward(t.q_enc, nn::cell_weights(p, "q_gru_f."),
                                           nn::cell_weights(p, "q_gru_b."),
                                           nn::cell_grads(g, "q_gru_f."),
                                           nn::cell_grads(g, "q_gru_b."), dq_states);
  nn::embedding_backward(g.at("E"), t.q_ids, dq_x);
}

}  // namespace

Logits predict_logits(const ReaderModel& model, const std::string& question,
                      const std::vector<std::string>& passage_tokens) {
  return forward(model, question, passage_tokens).logits;
}

std::vector<SpanPrediction> enumerate_spans(const Tensor& start_logits, const Tensor& end_logits,
                                            std::size_t max_span_len, std::size_t doc_id,
                                            const std::vector<std::string>& tokens) {
  const std::size_t len = tokens.size();
  if (start_logits.size() != len || end_logits.size() != len)
    throw ShapeMismatch("logits are not aligned with the passage tokens");
  std::vector<SpanPrediction> spans;
  for (std::size_t i = 0; i < len; ++i) {
    std::string text;
    for (std::size_t j = i; j < len && j < i + max_span_len; ++j) {
      text += (j > i ? " " : "") + tokens[j];
      spans.push_back({doc_id, i, j, start_logits[i] + end_logits[j], text});
    }
  }
  std::stable_sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) {
    return a.raw_score > b.raw_score;
  });
  return spans;
}

std::vector<SpanPrediction> best_spans(const ReaderModel& model, const std::string& question,
                                       const std::vector<retrieval::RetrievalResult>& results,
                                       std::size_t top_k_passages) {
  std::vector<SpanPrediction> best;
  std::size_t used = 0;
  for (const auto& r : results) {
    if (used == top_k_passages) break;
    if (r.doc == nullptr || r.doc->kind != retrieval::DocKind::kPassage) continue;
    ++used;
    auto tokens = text::tokenize(r.doc->value_field).tokens;
    if (tokens.empty()) continue;
    auto logits = predict_logits(model, question, tokens);
    best.push_back(
        enumerate_spans(logits.start, logits.end, model.max_span_len, r.doc->doc_id, tokens)
            .front());
  }
  return best;
}

std::vector<AnswerCandidate> rank_spans(const std::vector<SpanPrediction>& spans) {
  if (spans.empty()) return {};
  double top = spans.front().raw_score;
  for (const auto& s : spans) top = std::max(top, s.raw_score);
  double z = 0;
  for (const auto& s : spans) z += std::exp(s.raw_score - top);
  std::vector<AnswerCandidate> out;
  for (const auto& s : spans) {
    std::ostringstream trace;
    trace << "doc=" << s.passage_doc_id << " span=[" << s.start << "," << s.end
          << "] raw=" << s.raw_score;
    out.push_back({s.text, std::exp(s.raw_score - top) / z, SolverKind::kRr, trace.str()});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.confidence > b.confidence;
  });
  return out;
}

std::vector<AnswerCandidate> read(const ReaderModel& model, const std::string& question,
                                  const std::vector<retrieval::RetrievalResult>& results,
                                  std::size_t top_k_passages) {
  if (text::tokenize(question).empty()) return {};
  return rank_spans(best_spans(model, question, results, top_k_passages));
}

std::pair<double, Gradients> loss_and_gradients(const ReaderModel& model,
                                                const ReaderExample& ex) {
  auto tokens = text::tokenize(ex.passage).tokens;
  auto t = forward(model, ex.question, tokens);
  Tensor ps = nn::softmax(t.logits.start);
  Tensor pe = nn::softmax(t.logits.end);
  const double loss = nn::cross_entropy(ps, ex.start) + nn::cross_entropy(pe, ex.end);
  ps[ex.start] -= 1.0;
  pe[ex.end] -= 1.0;
  Gradients g = nn::zero_gradients(model.params);
  backward(model, t, ps, pe, g);
  return {loss, std::move(g)};
}

std::vector<ReaderExample> parse_reader_data(const std::string& jsonl) {
  return detail::parse_jsonl<ReaderExample>(jsonl, [](const nlohmann::json& j) {
    return ReaderExample{j.at("question").get<std::string>(), j.at("passage").get<std::string>(),
                         j.at("answer_start_token").get<std::size_t>(),
                         j.at("answer_end_token").get<std::size_t>()};
  });
}

std::vector<ReaderExample> load_reader_data(const std::string& path) {
  return parse_reader_data(detail::read_file(path));
}

nn::TrainResult train_reader(const std::vector<ReaderExample>& data,
                             const text::Vocabulary& vocab, const nn::TrainOptions& options) {
  if (data.empty()) throw EmptyDataset("reader dataset is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t len = text::tokenize(data[i].passage).size();
    if (data[i].start > data[i].end || data[i].end >= len)
      throw ExampleError("SpanOutOfRange", i,
                         "span [" + std::to_string(data[i].start) + "," +
                             std::to_string(data[i].end) + "] outside " + std::to_string(len) +
                             " passage tokens");
    if (text::tokenize(data[i].question).empty())
      throw ExampleError("EmptyQuestion", i, "question has no tokens");
  }
  ReaderModel model{init_reader(vocab.size(), options), vocab, kMaxSpanLen};
  nn::Rng rng = nn::shuffle_rng(options.seed);
  nn::TrainResult result;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double total = 0;
    for (std::size_t i : nn::shuffled_order(data.size(), rng)) {
      auto [loss, g] = loss_and_gradients(model, data[i]);
      total += loss;
      nn::sgd_step(model.params, g, options.lr);
    }
    result.epoch_losses.push_back(total / static_cast<double>(data.size()));
  }
  result.params = std::move(model.params);
  return result;
}

}  // namespace openqa::reader
