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

#include "openqa/ld_solver.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "jsonl.hpp"
#include "openqa/error.hpp"
#include "openqa/nn/layers.hpp"
#include "openqa/sp_solver.hpp"

namespace openqa::ld {

using nn::CellKind;
using nn::Gradients;
using nn::ModelParameters;
using nn::Tensor;

Tag parse_tag(std::string_view name) {
  if (name == "B") return Tag::kB;
  if (name == "I") return Tag::kI;
  if (name == "O") return Tag::kO;
  throw Error("UnknownTag", "unknown tag '" + std::string(name) + "'");
}

const char* tag_name(Tag tag) {
  switch (tag) {
    case Tag::kB: return "B";
    case Tag::kI: return "I";
    case Tag::kO: return "O";
  }
  return "?";
}

namespace {

void add_embeddings(ModelParameters& p, std::size_t vocab_size, std::size_t dim, nn::Rng& rng) {
  p.add_xavier("E", {vocab_size, dim}, dim, dim, rng);
}

std::vector<std::uint32_t> encode(const text::Vocabulary& vocab,
                                  const std::vector<std::string>& tokens) {
  return vocab.encode(tokens);
}

Tensor tanh_of(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = std::tanh(v);
  return y;
}

// Tagger -------------------------------------------------------------------------

struct TaggerTrace {
  std::vector<std::uint32_t> ids;
  Tensor x;
  nn::BiTrace bi;
  Tensor probs;
};

TaggerTrace tagger_forward(const ModelParameters& p, std::vector<std::uint32_t> ids) {
  TaggerTrace t;
  t.ids = std::move(ids);
  t.x = nn::embedding_lookup(p.at("E"), t.ids);
  t.bi = nn::bidirectional_trace(CellKind::kLstm, nn::cell_weights(p, "lstm_f."),
                                 nn::cell_weights(p, "lstm_b."), t.x);
  t.probs = nn::softmax(nn::linear_forward(p.at("out.W"), p.at("out.b"), t.bi.output));
  return t;
}

}  // namespace

ModelParameters init_tagger(std::size_t vocab_size, const nn::TrainOptions& o) {
  nn::Rng rng(o.seed);
  ModelParameters p;
  p.rng_seed = o.seed;
  p.arch = {{"model", "tagger"}, {"vocab_size", vocab_size}, {"dim", o.dim}, {"hidden", o.hidden}};
  add_embeddings(p, vocab_size, o.dim, rng);
  nn::add_cell_params(p, "lstm_f.", CellKind::kLstm, o.dim, o.hidden, rng);
  nn::add_cell_params(p, "lstm_b.", CellKind::kLstm, o.dim, o.hidden, rng);
  p.add_xavier("out.W", {kTagCount, 2 * o.hidden}, 2 * o.hidden, kTagCount, rng);
  p.add_constant("out.b", {kTagCount}, 0.0);
  return p;
}

TagSequence repair_bio(TagSequence tags) {
  Tag prev = Tag::kO;
  for (auto& t : tags) {
    if (t == Tag::kI && prev == Tag::kO) t = Tag::kB;
    prev = t;
  }
  return tags;
}

TagSequence tag_entities(const ModelParameters& tagger, const text::Vocabulary& vocab,
                         const std::string& question) {
  auto tokens = text::tokenize(question);
  if (tokens.empty()) throw EmptyQuestion("question has no tokens");
  auto trace = tagger_forward(tagger, encode(vocab, tokens.tokens));
  TagSequence tags;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto row = trace.probs.row(i);
    tags.push_back(static_cast<Tag>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return repair_bio(std::move(tags));
}

std::optional<std::pair<std::size_t, std::size_t>> mention_range(const TagSequence& raw) {
  const TagSequence tags = repair_bio(raw);
  std::optional<std::pair<std::size_t, std::size_t>> best;
  std::size_t i = 0;
  while (i < tags.size()) {
    if (tags[i] != Tag::kB) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tags.size() && tags[j] == Tag::kI) ++j;
    if (!best || j - i > best->second - best->first) best = {i, j};
    i = j;
  }
  return best;
}

std::string extract_mention(const TagSequence& tags, const text::TokenSequence& tokens) {
  if (tags.size() != tokens.size())
    throw ShapeMismatch("tag count differs from token count");
  auto range = mention_range(tags);
  if (!range) return "";
  return text::join(std::span(tokens.tokens).subspan(range->first, range->second - range->first));
}

std::vector<EntityCandidate> link_entity(const std::string& mention, const EntityDictionary& dict,
                                         std::size_t max_distance) {
  const std::string key = text::normalize(mention);
  if (key.empty()) return {};
  std::vector<EntityCandidate> out;
  for (const auto& [entry, entity] : dict.entries()) {
    // Length difference bounds the distance from below.
    std::size_t gap = entry.size() > key.size() ? entry.size() - key.size() : key.size() - entry.size();
    if (gap > max_distance) continue;
    std::size_t d = text::levenshtein(key, entry);
    if (d <= max_distance) out.push_back({entity, d, mention});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.entity.size() != b.entity.size()) return a.entity.size() > b.entity.size();
    return a.entity < b.entity;
  });
  return out;
}

std::vector<std::string> question_pattern(const std::vector<std::string>& tokens,
                                          std::size_t begin, std::size_t end) {
  std::vector<std::string> out(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(begin));
  out.emplace_back(text::kEntityPlaceholder);
  out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(end), tokens.end());
  return out;
}

// Relation scorer ------------------------------------------------------------------

namespace {

constexpr std::size_t kConvWidth = 3;

struct SideTrace {
  std::vector<std::uint32_t> ids;
  Tensor x;
  Tensor conv;  // tanh(conv1d(x))
  nn::AttentionResult cnn;
  nn::BiTrace gru;
  nn::AttentionResult gru_pool;
};

SideTrace encode_side(const ModelParameters& p, std::vector<std::uint32_t> ids) {
  SideTrace s;
  s.ids = std::move(ids);
  s.x = nn::embedding_lookup(p.at("E"), s.ids);
  s.conv = tanh_of(nn::conv1d_forward(p.at("cnn.F"), s.x));
  s.cnn = nn::attention(p.at("cnn.u"), s.conv, s.conv);
  s.gru = nn::bidirectional_trace(CellKind::kGru, nn::cell_weights(p, "gru_f."),
                                  nn::cell_weights(p, "gru_b."), s.x);
  s.gru_pool = nn::attention(p.at("gru.u"), s.gru.output, s.gru.output);
  return s;
}

void side_backward(const ModelParameters& p, const SideTrace& s, const Tensor& dcnn,
                   const Tensor& dgru, Gradients& g) {
  auto a = nn::attention_backward(p.at("cnn.u"), s.conv, s.conv, s.cnn, dcnn);
  g.at("cnn.u") += a.query;
  Tensor dz = a.keys;
  dz += a.values;
  for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= 1.0 - s.conv[i] * s.conv[i];
  auto c = nn::conv1d_backward(p.at("cnn.F"), s.x, dz);
  g.at("cnn.F") += c.filters;

  auto b = nn::attention_backward(p.at("gru.u"), s.gru.output, s.gru.output, s.gru_pool, dgru);
  g.at("gru.u") += b.query;
  Tensor dstates = b.keys;
  dstates += b.values;
  Tensor dx = nn::bidirectional_backward(s.gru, nn::cell_weights(p, "gru_f."),
                                         nn::cell_weights(p, "gru_b."), nn::cell_grads(g, "gru_f."),
                                         nn::cell_grads(g, "gru_b."), dstates);
  dx += c.x;
  nn::embedding_backward(g.at("E"), s.ids, dx);
}

SideTrace encode_pattern(const ModelParameters& p, const text::Vocabulary& vocab,
                         const std::vector<std::string>& pattern) {
  if (pattern.empty()) throw EmptyPattern("question pattern has no tokens");
  return encode_side(p, encode(vocab, pattern));
}

SideTrace encode_relation(const ModelParameters& p, const text::Vocabulary& vocab,
                          const std::string& relation) {
  auto tokens = text::relation_tokens(relation);
  if (tokens.empty()) throw EmptyRelation("relation has no tokens");
  return encode_side(p, encode(vocab, tokens));
}

RelationScore combine(const SideTrace& pattern, const SideTrace& rel, std::string relation) {
  RelationScore r{std::move(relation), 0, 0, 0};
  r.cnn_score = nn::cosine(pattern.cnn.context.data(), rel.cnn.context.data());
  r.gru_score = nn::cosine(pattern.gru_pool.context.data(), rel.gru_pool.context.data());
  r.combined = 0.5 * r.cnn_score + 0.5 * r.gru_score;
  return r;
}

// Pooled-vector gradients for one side of a pair.
struct PooledGrads {
  Tensor cnn;
  Tensor gru;
};

PooledGrads zero_pooled(const SideTrace& s) {
  return {Tensor(s.cnn.context.shape()), Tensor(s.gru_pool.context.shape())};
}

// d(weight * combined) into both sides' pooled gradients.
void pair_backward(const SideTrace& pattern, const SideTrace& rel, double weight,
                   PooledGrads& dpattern, PooledGrads& drel) {
  nn::cosine_backward(pattern.cnn.context.data(), rel.cnn.context.data(), 0.5 * weight,
                      dpattern.cnn.data(), drel.cnn.data());
  nn::cosine_backward(pattern.gru_pool.context.data(), rel.gru_pool.context.data(), 0.5 * weight,
                      dpattern.gru.data(), drel.gru.data());
}

}  // namespace

ModelParameters init_scorer(std::size_t vocab_size, const nn::TrainOptions& o) {
  nn::Rng rng(o.seed);
  ModelParameters p;
  p.rng_seed = o.seed;
  p.arch = {{"model", "relation_scorer"}, {"vocab_size", vocab_size}, {"dim", o.dim},
            {"hidden", o.hidden}};
  add_embeddings(p, vocab_size, o.dim, rng);
  p.add_xavier("cnn.F", {o.hidden, kConvWidth, o.dim}, kConvWidth * o.dim, o.hidden, rng);
  p.add_xavier("cnn.u", {o.hidden}, o.hidden, 1, rng);
  nn::add_cell_params(p, "gru_f.", CellKind::kGru, o.dim, o.hidden, rng);
  nn::add_cell_params(p, "gru_b.", CellKind::kGru, o.dim, o.hidden, rng);
  p.add_xavier("gru.u", {2 * o.hidden}, 2 * o.hidden, 1, rng);
  return p;
}

RelationScore score_relation(const ModelParameters& scorer, const text::Vocabulary& vocab,
                             const std::vector<std::string>& pattern,
                             const std::string& relation) {
  auto rel = encode_relation(scorer, vocab, relation);
  return combine(encode_pattern(scorer, vocab, pattern), rel, relation);
}

RelationScore detect_relation(const ModelParameters& scorer, const text::Vocabulary& vocab,
                              const std::vector<std::string>& pattern,
                              const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw NoCandidates("no candidate relations");
  auto p = encode_pattern(scorer, vocab, pattern);
  std::optional<RelationScore> best;
  for (const auto& c : candidates) {
    auto r = combine(p, encode_relation(scorer, vocab, c), c);
    if (!best || r.combined > best->combined ||
        (r.combined == best->combined && r.relation < best->relation))
      best = std::move(r);
  }
  return *best;
}

Gradients score_gradients(const ModelParameters& scorer, const text::Vocabulary& vocab,
                          const std::vector<std::string>& pattern, const std::string& relation) {
  auto p = encode_pattern(scorer, vocab, pattern);
  auto r = encode_relation(scorer, vocab, relation);
  auto dp = zero_pooled(p), dr = zero_pooled(r);
  pair_backward(p, r, 1.0, dp, dr);
  Gradients g = nn::zero_gradients(scorer);
  side_backward(scorer, p, dp.cnn, dp.gru, g);
  side_backward(scorer, r, dr.cnn, dr.gru, g);
  return g;
}

// Solver ---------------------------------------------------------------------------

std::vector<AnswerCandidate> solve_ld(const std::string& question, const kb::KnowledgeBase& kb,
                                      const EntityDictionary& dict, const ModelParameters& tagger,
                                      const ModelParameters& scorer,
                                      const text::Vocabulary& vocab) {
  auto tokens = text::tokenize(question);
  if (tokens.empty()) return {};
  auto tags = tag_entities(tagger, vocab, question);

  std::size_t begin = 0, end = 0;
  EntityCandidate linked;
  if (auto range = mention_range(tags)) {
    begin = range->first;
    end = range->second;
    auto candidates = link_entity(
        text::join(std::span(tokens.tokens).subspan(begin, end - begin)), dict);
    if (candidates.empty()) return {};
    linked = candidates.front();
  } else {
    // Nothing tagged: take the dictionary match sp would rank first.
    auto subjects = sp::dictionary_subjects(question, dict);
    if (subjects.empty()) return {};
    linked = {subjects.front().entity, 0, text::normalize(subjects.front().surface)};
    auto merged = text::tokenize(question, &dict);
    text::Span where{};
    for (std::size_t i = 0; i < merged.size(); ++i) {
      const auto* e = dict.find(merged.tokens[i]);
      if (e && *e == linked.entity) {
        where = merged.spans[i];
        break;
      }
    }
    begin = tokens.size();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens.spans[i].begin >= where.begin && tokens.spans[i].end <= where.end) {
        if (begin == tokens.size()) begin = i;
        end = i + 1;
      }
    }
    if (begin == tokens.size()) return {};
  }

  auto relations = kb.predicates_of(linked.entity);
  if (relations.empty()) return {};
  auto best = detect_relation(scorer, vocab, question_pattern(tokens.tokens, begin, end), relations);
  const double confidence =
      (1.0 / (1.0 + static_cast<double>(linked.distance))) * (best.combined + 1.0) / 2.0;
  std::ostringstream trace;
  trace << "mention='" << linked.mention << "' entity='" << linked.entity
        << "' distance=" << linked.distance << " relation='" << best.relation
        << "' score=" << best.combined;
  std::vector<AnswerCandidate> out;
  for (const auto& object : kb.objects(linked.entity, best.relation))
    out.push_back({object, confidence, SolverKind::kLd, trace.str()});
  return out;
}

// Training data --------------------------------------------------------------------

namespace {

TaggerExample tagger_row(const nlohmann::json& j) {
  TaggerExample ex{j.at("question").get<std::string>(), {}};
  for (const auto& t : j.at("tags")) ex.tags.push_back(parse_tag(t.get<std::string>()));
  return ex;
}

ScorerExample scorer_row(const nlohmann::json& j) {
  return {j.at("pattern").get<std::vector<std::string>>(), j.at("gold").get<std::string>(),
          j.value("negatives", std::vector<std::string>{})};
}

}  // namespace

std::vector<TaggerExample> parse_tagger_data(const std::string& jsonl) {
  return detail::parse_jsonl<TaggerExample>(jsonl, tagger_row);
}
std::vector<TaggerExample> load_tagger_data(const std::string& path) {
  return parse_tagger_data(detail::read_file(path));
}
std::vector<ScorerExample> parse_scorer_data(const std::string& jsonl) {
  return detail::parse_jsonl<ScorerExample>(jsonl, scorer_row);
}
std::vector<ScorerExample> load_scorer_data(const std::string& path) {
  return parse_scorer_data(detail::read_file(path));
}

// Training -------------------------------------------------------------------------

nn::TrainResult train_tagger(const std::vector<TaggerExample>& data, const text::Vocabulary& vocab,
                             const nn::TrainOptions& options) {
  if (data.empty()) throw EmptyDataset("tagger dataset is empty");
  std::vector<std::vector<std::uint32_t>> ids;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto tokens = text::tokenize(data[i].question);
    if (tokens.empty() || tokens.size() != data[i].tags.size())
      throw ExampleError("MisalignedExample", i,
                         std::to_string(tokens.size()) + " tokens but " +
                             std::to_string(data[i].tags.size()) + " tags");
    ids.push_back(encode(vocab, tokens.tokens));
  }
  nn::TrainResult result{init_tagger(vocab.size(), options), {}};
  ModelParameters& p = result.params;
  nn::Rng rng = nn::shuffle_rng(options.seed);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double total = 0;
    for (std::size_t i : nn::shuffled_order(data.size(), rng)) {
      auto trace = tagger_forward(p, ids[i]);
      const std::size_t len = ids[i].size();
      Tensor dlogits = trace.probs;
      double loss = 0;
      for (std::size_t t = 0; t < len; ++t) {
        const auto gold = static_cast<std::size_t>(data[i].tags[t]);
        loss += -std::log(std::max(trace.probs.at(t, gold), 1e-12));
        dlogits.at(t, gold) -= 1.0;
      }
      for (auto& v : dlogits.values()) v /= static_cast<double>(len);
      total += loss / static_cast<double>(len);

      Gradients g = nn::zero_gradients(p);
      auto lin = nn::linear_backward(p.at("out.W"), trace.bi.output, dlogits);
      g.at("out.W") = lin.W;
      g.at("out.b") = lin.b;
      Tensor dx = nn::bidirectional_backward(trace.bi, nn::cell_weights(p, "lstm_f."),
                                             nn::cell_weights(p, "lstm_b."),
                                             nn::cell_grads(g, "lstm_f."),
                                             nn::cell_grads(g, "lstm_b."), lin.x);
      nn::embedding_backward(g.at("E"), trace.ids, dx);
      nn::sgd_step(p, g, options.lr);
    }
    result.epoch_losses.push_back(total / static_cast<double>(data.size()));
  }
  return result;
}

double hinge_loss(const ModelParameters& scorer, const text::Vocabulary& vocab,
                  const ScorerExample& ex) {
  auto p = encode_pattern(scorer, vocab, ex.pattern);
  const double gold = combine(p, encode_relation(scorer, vocab, ex.gold), ex.gold).combined;
  double loss = 0;
  for (const auto& n : ex.negatives)
    loss += std::max(0.0, kHingeMargin - gold + combine(p, encode_relation(scorer, vocab, n), n).combined);
  return loss;
}

nn::TrainResult train_relation_scorer(const std::vector<ScorerExample>& data,
                                      const text::Vocabulary& vocab,
                                      const nn::TrainOptions& options) {
  if (data.empty()) throw EmptyDataset("scorer dataset is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].negatives.empty()) throw ExampleError("NoNegatives", i, "no negative relations");
    if (data[i].pattern.empty()) throw ExampleError("EmptyPattern", i, "empty pattern");
  }
  nn::TrainResult result{init_scorer(vocab.size(), options), {}};
  ModelParameters& params = result.params;
  nn::Rng rng = nn::shuffle_rng(options.seed);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double total = 0;
    for (std::size_t i : nn::shuffled_order(data.size(), rng)) {
      const auto& ex = data[i];
      auto pattern = encode_pattern(params, vocab, ex.pattern);
      auto gold = encode_relation(params, vocab, ex.gold);
      const double gold_score = combine(pattern, gold, ex.gold).combined;
      auto dpattern = zero_pooled(pattern);
      auto dgold = zero_pooled(gold);
      Gradients g = nn::zero_gradients(params);
      double loss = 0;
      std::size_t active = 0;
      for (const auto& name : ex.negatives) {
        auto neg = encode_relation(params, vocab, name);
        const double margin = kHingeMargin - gold_score + combine(pattern, neg, name).combined;
        if (margin <= 0) continue;
        loss += margin;
        ++active;
        auto dneg = zero_pooled(neg);
        pair_backward(pattern, neg, 1.0, dpattern, dneg);
        side_backward(params, neg, dneg.cnn, dneg.gru, g);
      }
      total += loss;
      if (active == 0) continue;
      pair_backward(pattern, gold, -static_cast<double>(active), dpattern, dgold);
      side_backward(params, gold, dgold.cnn, dgold.gru, g);
      side_backward(params, pattern, dpattern.cnn, dpattern.gru, g);
      nn::sgd_step(params, g, options.lr);
    }
    result.epoch_losses.push_back(total / static_cast<double>(data.size()));
  }
  return result;
}

std::vector<std::string> sample_negatives(const kb::KnowledgeBase& kb, const std::string& entity,
                                          const std::string& gold, nn::Rng& rng,
                                          std::size_t limit) {
  auto pick = [&](std::vector<std::string> pool) {
    pool.erase(std::remove(pool.begin(), pool.end(), gold), pool.end());
    std::vector<std::string> out;
    for (std::size_t i : nn::shuffled_order(pool.size(), rng)) {
      if (out.size() == limit) break;
      out.push_back(pool[i]);
    }
    return out;
  };
  auto own = pick(kb.predicates_of(entity));
  return own.empty() ? pick(kb.all_predicates()) : own;
}

}  // namespace openqa::ld
