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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "openqa/error.hpp"
#include "openqa/nn/layers.hpp"
#include "openqa/nn/params.hpp"

namespace openqa::nn {
namespace {

constexpr double kGradTol = 1e-4;

Tensor random_tensor(Tensor::Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

// Weighted sum of a tensor's entries: a generic scalar readout for checks.
double readout(const Tensor& y, const Tensor& r) {
  return std::inner_product(y.values().begin(), y.values().end(), r.values().begin(), 0.0);
}

TEST(Matmul, Examples) {
  auto a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  auto ones = Tensor::matrix(2, 1, {1, 1});
  EXPECT_EQ(matmul(a, ones).values(), (std::vector<double>{3, 7}));
  auto eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(matmul(a, eye), a);
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({4, 2})), ShapeMismatch);
  EXPECT_EQ(transpose(a).values(), (std::vector<double>{1, 3, 2, 4}));
}

TEST(Softmax, Examples) {
  auto half = softmax(Tensor::vector({0, 0}));
  EXPECT_DOUBLE_EQ(half[0], 0.5);
  EXPECT_DOUBLE_EQ(half[1], 0.5);
  auto q = softmax(Tensor::vector({std::log(1.0), std::log(3.0)}));
  EXPECT_NEAR(q[0], 0.25, 1e-12);
  EXPECT_NEAR(q[1], 0.75, 1e-12);
}

TEST(Softmax, ShiftInvarianceAndNormalization) {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    auto x = random_tensor({3, 5}, rng, 20.0);
    auto shifted = x;
    double c = rng.uniform(-100, 100);
    for (auto& v : shifted.values()) v += c;
    auto a = softmax(x), b = softmax(shifted);
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_NEAR(a[k], b[k], 1e-12);
      EXPECT_GT(a[k], 0.0);
    }
    for (std::size_t r = 0; r < 3; ++r) {
      auto row = a.row(r);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
    }
  }
  auto big = softmax(Tensor::vector({1000, 1000}));
  EXPECT_DOUBLE_EQ(big[0], 0.5);
}

TEST(CrossEntropy, Examples) {
  EXPECT_DOUBLE_EQ(cross_entropy(Tensor::vector({0, 1, 0}), 1), 0.0);
  EXPECT_NEAR(cross_entropy(Tensor::vector({0.25, 0.25, 0.25, 0.25}), 2), std::log(4.0), 1e-12);
  EXPECT_NEAR(std::log(4.0), 1.3863, 1e-4);
  EXPECT_DOUBLE_EQ(cross_entropy(Tensor::vector({1, 0}), 1), -std::log(1e-12));
  EXPECT_THROW(cross_entropy(Tensor::vector({1, 0}), 2), IndexOutOfRange);
}

TEST(Linear, IdentityAndBias) {
  auto eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  auto x = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(linear_forward(eye, Tensor({2}), x), x);
  auto b = Tensor::vector({0.5, -1});
  auto y = linear_forward(Tensor::matrix(2, 2, {3, 4, 5, 6}), b, Tensor({2, 2}));
  EXPECT_EQ(y.values(), (std::vector<double>{0.5, -1, 0.5, -1}));
  EXPECT_THROW(linear_forward(eye, b, Tensor({1, 3})), ShapeMismatch);
}

TEST(Linear, GradCheck) {
  Rng rng(1);
  ModelParameters p;
  p.entries["W"] = random_tensor({3, 4}, rng);
  p.entries["b"] = random_tensor({3}, rng);
  p.entries["x"] = random_tensor({2, 4}, rng);
  auto r = random_tensor({2, 3}, rng);
  auto loss = [&](const ModelParameters& m) {
    return readout(linear_forward(m.at("W"), m.at("b"), m.at("x")), r);
  };
  auto g = linear_backward(p.at("W"), p.at("x"), r);
  Gradients grads{{"W", g.W}, {"b", g.b}, {"x", g.x}};
  EXPECT_LT(grad_check(loss, grads, p), kGradTol);
}

TEST(GradCheck, LinearWithMse) {
  Rng rng(2);
  ModelParameters p;
  p.entries["W"] = random_tensor({3, 4}, rng);
  p.entries["b"] = random_tensor({3}, rng);
  auto x = random_tensor({5, 4}, rng);
  auto target = random_tensor({5, 3}, rng);
  auto loss = [&](const ModelParameters& m) {
    auto y = linear_forward(m.at("W"), m.at("b"), x);
    double l = 0;
    for (std::size_t i = 0; i < y.size(); ++i) l += (y[i] - target[i]) * (y[i] - target[i]);
    return l / static_cast<double>(y.size());
  };
  auto y = linear_forward(p.at("W"), p.at("b"), x);
  Tensor dy(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dy[i] = 2 * (y[i] - target[i]) / static_cast<double>(y.size());
  auto g = linear_backward(p.at("W"), x, dy);
  EXPECT_LT(grad_check(loss, {{"W", g.W}, {"b", g.b}}, p), 1e-6);
}

TEST(GradCheck, ConstantLoss) {
  Rng rng(3);
  ModelParameters p;
  p.entries["w"] = random_tensor({4}, rng);
  auto loss = [](const ModelParameters&) { return 2.5; };
  EXPECT_LT(grad_check(loss, zero_gradients(p), p), kGradTol);
}

TEST(Embedding, LookupAndScatter) {
  Rng rng(4);
  auto table = random_tensor({4, 3}, rng);
  std::vector<std::uint32_t> first{0};
  auto row0 = embedding_lookup(table, first);
  EXPECT_EQ(row0.values(), std::vector<double>(table.row(0).begin(), table.row(0).end()));

  std::vector<std::uint32_t> ids{2, 0};
  auto out = embedding_lookup(table, ids);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(out.at(0, c), table.at(2, c));
    EXPECT_EQ(out.at(1, c), table.at(0, c));
  }

  std::vector<std::uint32_t> dup{1, 1};
  Tensor dtable(table.shape());
  embedding_backward(dtable, dup, Tensor({2, 3}, 1.0));
  EXPECT_EQ(dtable.at(1, 0), 2.0);
  EXPECT_EQ(dtable.at(0, 0), 0.0);

  std::vector<std::uint32_t> bad{4};
  EXPECT_THROW(embedding_lookup(table, bad), IndexOutOfRange);
}

TEST(Embedding, GradCheck) {
  Rng rng(5);
  ModelParameters p;
  p.entries["E"] = random_tensor({5, 3}, rng);
  std::vector<std::uint32_t> ids{3, 1, 3, 0};
  auto r = random_tensor({4, 3}, rng);
  auto loss = [&](const ModelParameters& m) { return readout(embedding_lookup(m.at("E"), ids), r); };
  Gradients g = zero_gradients(p);
  embedding_backward(g.at("E"), ids, r);
  EXPECT_LT(grad_check(loss, g, p), kGradTol);
}

// Direct sliding window with explicit zero padding.
Tensor conv_oracle(const Tensor& f, const Tensor& x) {
  std::size_t c_out = f.dim(0), width = f.dim(1), d = f.dim(2), len = x.dim(0);
  std::size_t pad = width / 2;
  Tensor padded({len + 2 * pad, d});
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t j = 0; j < d; ++j) padded.at(t + pad, j) = x.at(t, j);
  Tensor y({len, c_out});
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t c = 0; c < c_out; ++c)
      for (std::size_t k = 0; k < width; ++k)
        for (std::size_t j = 0; j < d; ++j)
          y.at(t, c) += f[(c * width + k) * d + j] * padded.at(t + k, j);
  return y;
}

TEST(Conv1d, Examples) {
  auto x = Tensor::matrix(4, 1, {1, -2, 3, 5});
  EXPECT_EQ(conv1d_forward(Tensor({1, 1, 1}, 1.0), x).values(), x.values());
  Rng rng(6);
  auto f = random_tensor({2, 3, 2}, rng);
  auto zero = conv1d_forward(f, Tensor({5, 2}));
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
  auto xr = random_tensor({5, 2}, rng);
  auto y = conv1d_forward(f, xr);
  auto expect = conv_oracle(f, xr);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expect[i], 1e-12);
  EXPECT_THROW(conv1d_forward(Tensor({1, 2, 2}), xr), EvenWidth);
}

TEST(Conv1d, GradCheck) {
  Rng rng(7);
  ModelParameters p;
  p.entries["F"] = random_tensor({3, 3, 2}, rng);
  p.entries["x"] = random_tensor({5, 2}, rng);
  auto r = random_tensor({5, 3}, rng);
  auto loss = [&](const ModelParameters& m) { return readout(conv1d_forward(m.at("F"), m.at("x")), r); };
  auto g = conv1d_backward(p.at("F"), p.at("x"), r);
  EXPECT_LT(grad_check(loss, {{"F", g.filters}, {"x", g.x}}, p), kGradTol);
}

ModelParameters cell_params(CellKind kind, std::size_t d, std::size_t h, std::uint64_t seed,
                            const std::string& prefix = "") {
  Rng rng(seed);
  ModelParameters p;
  add_cell_params(p, prefix, kind, d, h, rng);
  for (auto& v : p.at(prefix + "b").values()) v = rng.uniform(-0.5, 0.5);
  return p;
}

TEST(Gru, SaturatedUpdateGateKeepsState) {
  auto p = cell_params(CellKind::kGru, 3, 2, 8);
  auto& b = p.at("b");
  b[0] = 50;
  b[1] = 50;
  Rng rng(9);
  auto x = random_tensor({3}, rng);
  auto h = random_tensor({2}, rng, 0.9);
  auto out = gru_step(cell_weights(p, ""), x, h);
  EXPECT_NEAR(out[0], h[0], 1e-12);
  EXPECT_NEAR(out[1], h[1], 1e-12);
}

TEST(Recurrent, ZeroWeightsGiveZeroState) {
  for (auto kind : {CellKind::kGru, CellKind::kLstm}) {
    ModelParameters p;
    p.add_constant("W", {gate_count(kind) * 2, 3}, 0.0);
    p.add_constant("U", {gate_count(kind) * 2, 2}, 0.0);
    p.add_constant("b", {gate_count(kind) * 2}, 0.0);
    auto w = cell_weights(p, "");
    if (kind == CellKind::kGru) {
      auto h = gru_step(w, Tensor({3}), Tensor({2}));
      EXPECT_EQ(h.values(), (std::vector<double>{0, 0}));
    } else {
      auto s = lstm_step(w, Tensor({3}), Tensor({2}), Tensor({2}));
      EXPECT_EQ(s.h.values(), (std::vector<double>{0, 0}));
      EXPECT_EQ(s.c.values(), (std::vector<double>{0, 0}));
    }
  }
  auto p = cell_params(CellKind::kGru, 3, 2, 1);
  EXPECT_THROW(gru_step(cell_weights(p, ""), Tensor({4}), Tensor({2})), ShapeMismatch);
}

class CellGradCheck : public ::testing::TestWithParam<CellKind> {};

TEST_P(CellGradCheck, SingleStep) {
  const CellKind kind = GetParam();
  auto p = cell_params(kind, 3, 4, 10);
  Rng rng(11);
  p.entries["x"] = random_tensor({3}, rng);
  p.entries["h"] = random_tensor({4}, rng);
  p.entries["c"] = random_tensor({4}, rng);
  auto rh = random_tensor({4}, rng);
  auto rc = random_tensor({4}, rng);
  auto loss = [&](const ModelParameters& m) {
    auto s = cell_step(kind, cell_weights(m, ""), m.at("x").data(), m.at("h").data(), m.at("c").data());
    double l = readout(Tensor::vector(s.h), rh);
    if (kind == CellKind::kLstm) l += readout(Tensor::vector(s.c), rc);
    return l;
  };
  Gradients g = zero_gradients(p);
  auto w = cell_weights(p, "");
  auto cache = cell_step(kind, w, p.at("x").data(), p.at("h").data(), p.at("c").data());
  auto sg = cell_step_backward(kind, w, cache, rh.data(),
                               kind == CellKind::kLstm ? rc.data() : std::span<const double>{},
                               cell_grads(g, ""));
  g.at("x") = Tensor::vector(sg.x);
  g.at("h") = Tensor::vector(sg.h_prev);
  if (kind == CellKind::kLstm) g.at("c") = Tensor::vector(sg.c_prev);
  EXPECT_LT(grad_check(loss, g, p), kGradTol);
}

TEST_P(CellGradCheck, Bidirectional) {
  const CellKind kind = GetParam();
  ModelParameters p = cell_params(kind, 3, 4, 12, "f.");
  for (auto& [name, t] : cell_params(kind, 3, 2, 13, "b.").entries) p.entries[name] = t;
  Rng rng(14);
  p.entries["x"] = random_tensor({4, 3}, rng);
  auto r = random_tensor({4, 6}, rng);
  auto loss = [&](const ModelParameters& m) {
    return readout(bidirectional_encode(kind, cell_weights(m, "f."), cell_weights(m, "b."), m.at("x")), r);
  };
  Gradients g = zero_gradients(p);
  auto wf = cell_weights(p, "f."), wb = cell_weights(p, "b.");
  auto trace = bidirectional_trace(kind, wf, wb, p.at("x"));
  g.at("x") = bidirectional_backward(trace, wf, wb, cell_grads(g, "f."), cell_grads(g, "b."), r);
  EXPECT_LT(grad_check(loss, g, p), kGradTol);
}

TEST_P(CellGradCheck, BidirectionalComposition) {
  const CellKind kind = GetParam();
  ModelParameters p = cell_params(kind, 3, 4, 15, "f.");
  for (auto& [name, t] : cell_params(kind, 3, 4, 16, "b.").entries) p.entries[name] = t;
  Rng rng(17);
  auto x = random_tensor({3, 3}, rng);
  auto wf = cell_weights(p, "f."), wb = cell_weights(p, "b.");
  auto out = bidirectional_encode(kind, wf, wb, x);
  ASSERT_EQ(out.shape(), (Tensor::Shape{3, 8}));

  auto run = [&](const CellWeights& w, std::vector<std::size_t> order) {
    std::vector<Tensor> states(3);
    Tensor h({4}), c({4});
    for (std::size_t t : order) {
      Tensor xt = Tensor::vector({x.at(t, 0), x.at(t, 1), x.at(t, 2)});
      if (kind == CellKind::kGru) {
        h = gru_step(w, xt, h);
      } else {
        auto s = lstm_step(w, xt, h, c);
        h = s.h;
        c = s.c;
      }
      states[t] = h;
    }
    return states;
  };
  auto fwd = run(wf, {0, 1, 2});
  auto bwd = run(wb, {2, 1, 0});
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_DOUBLE_EQ(out.at(t, j), fwd[t][j]);
      EXPECT_DOUBLE_EQ(out.at(t, 4 + j), bwd[t][j]);
    }
  }

  // Single position: forward half equals one forward step, backward half one backward step.
  auto one = Tensor::matrix(1, 3, {x.at(0, 0), x.at(0, 1), x.at(0, 2)});
  auto single = bidirectional_encode(kind, wf, wb, one);
  auto f0 = run(wf, {0})[0];
  auto b0 = run(wb, {0})[0];
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_DOUBLE_EQ(single.at(0, j), f0[j]);
    EXPECT_DOUBLE_EQ(single.at(0, 4 + j), b0[j]);
  }

  // Reversal with swapped direction weights swaps and reverses the halves.
  Tensor reversed({3, 3});
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t j = 0; j < 3; ++j) reversed.at(t, j) = x.at(2 - t, j);
  auto rev = bidirectional_encode(kind, wb, wf, reversed);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_DOUBLE_EQ(rev.at(t, j), out.at(2 - t, 4 + j));
      EXPECT_DOUBLE_EQ(rev.at(t, 4 + j), out.at(2 - t, j));
    }
  }
  EXPECT_THROW(bidirectional_encode(kind, wf, wb, Tensor({0, 3})), EmptySequence);
}

INSTANTIATE_TEST_SUITE_P(Cells, CellGradCheck,
                         ::testing::Values(CellKind::kGru, CellKind::kLstm),
                         [](const auto& info) {
                           return info.param == CellKind::kGru ? std::string("Gru")
                                                               : std::string("Lstm");
                         });

TEST(Attention, Examples) {
  Rng rng(18);
  auto q = random_tensor({3}, rng);
  auto k1 = random_tensor({1, 3}, rng);
  auto v1 = random_tensor({1, 2}, rng);
  auto single = attention(q, k1, v1);
  EXPECT_DOUBLE_EQ(single.weights[0], 1.0);
  EXPECT_DOUBLE_EQ(single.context[0], v1[0]);
  EXPECT_DOUBLE_EQ(single.context[1], v1[1]);

  auto same = Tensor::matrix(3, 3, {1, 2, 3, 1, 2, 3, 1, 2, 3});
  auto values = Tensor::matrix(3, 2, {1, 0, 2, 4, 6, 8});
  auto uniform = attention(q, same, values);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(uniform.weights[j], 1.0 / 3, 1e-15);
  EXPECT_NEAR(uniform.context[0], 3.0, 1e-12);
  EXPECT_NEAR(uniform.context[1], 4.0, 1e-12);

  // Closed form for len 3.
  auto keys = random_tensor({3, 3}, rng);
  auto vals = random_tensor({3, 2}, rng);
  auto res = attention(q, keys, vals);
  double e[3], z = 0;
  for (int j = 0; j < 3; ++j) {
    double s = 0;
    for (int c = 0; c < 3; ++c) s += keys.at(j, c) * q[c];
    e[j] = std::exp(s / std::sqrt(3.0));
    z += e[j];
  }
  double wsum = 0;
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(res.weights[j], e[j] / z, 1e-12);
    wsum += res.weights[j];
  }
  EXPECT_NEAR(wsum, 1.0, 1e-12);
  for (int c = 0; c < 2; ++c) {
    double expect = 0;
    for (int j = 0; j < 3; ++j) expect += e[j] / z * vals.at(j, c);
    EXPECT_NEAR(res.context[c], expect, 1e-12);
  }
  EXPECT_THROW(attention(q, Tensor({0, 3}), Tensor({0, 2})), EmptySequence);
}

TEST(Attention, GradCheck) {
  Rng rng(19);
  ModelParameters p;
  p.entries["q"] = random_tensor({4}, rng);
  p.entries["K"] = random_tensor({5, 4}, rng);
  p.entries["V"] = random_tensor({5, 3}, rng);
  auto r = random_tensor({3}, rng);
  auto loss = [&](const ModelParameters& m) {
    return readout(attention(m.at("q"), m.at("K"), m.at("V")).context, r);
  };
  auto fwd = attention(p.at("q"), p.at("K"), p.at("V"));
  auto g = attention_backward(p.at("q"), p.at("K"), p.at("V"), fwd, r);
  EXPECT_LT(grad_check(loss, {{"q", g.query}, {"K", g.keys}, {"V", g.values}}, p), kGradTol);
}

ModelParameters encoder_params(std::size_t d, std::size_t ffn, std::uint64_t seed) {
  Rng rng(seed);
  ModelParameters p;
  add_encoder_params(p, "enc.", d, ffn, rng);
  // Non-trivial norm and bias parameters so their gradients are exercised.
  for (auto& [name, t] : p.entries) {
    if (name.find("gain") != std::string::npos) {
      for (auto& v : t.values()) v = rng.uniform(0.5, 1.5);
    } else if (t.rank() == 1) {
      for (auto& v : t.values()) v = rng.uniform(-0.3, 0.3);
    }
  }
  return p;
}

TEST(Transformer, ShapeAndNormStatistics) {
  auto p = encoder_params(8, 16, 20);
  Rng rng(21);
  for (std::size_t len : {1u, 3u, 7u}) {
    auto x = random_tensor({len, 8}, rng);
    auto trace = transformer_trace(encoder_weights(p, "enc."), x, 2);
    EXPECT_EQ(trace.ln2.output.shape(), x.shape());
    for (const auto* ln : {&trace.ln1, &trace.ln2}) {
      for (std::size_t r = 0; r < len; ++r) {
        auto row = ln->normalized.row(r);
        double mean = std::accumulate(row.begin(), row.end(), 0.0) / 8;
        double var = 0;
        for (double v : row) var += (v - mean) * (v - mean);
        EXPECT_NEAR(mean, 0.0, 1e-9);
        EXPECT_NEAR(var / 8, 1.0, 1e-9);
      }
    }
  }
  EXPECT_THROW(transformer_encoder_layer(encoder_weights(p, "enc."), random_tensor({2, 8}, rng), 3),
               ShapeMismatch);
}

TEST(Transformer, GradCheckWithCrossEntropy) {
  auto p = encoder_params(8, 16, 22);
  Rng rng(23);
  p.entries["x"] = random_tensor({5, 8}, rng);
  const std::size_t gold = 3;
  auto loss = [&](const ModelParameters& m) {
    auto y = transformer_encoder_layer(encoder_weights(m, "enc."), m.at("x"), 2);
    Tensor first = Tensor::vector(std::vector<double>(y.row(0).begin(), y.row(0).end()));
    double l = cross_entropy(softmax(first), gold);
    // Later positions feed the loss too, so every attention path is covered.
    for (std::size_t r = 1; r < 5; ++r) l += 0.1 * y.at(r, r);
    return l;
  };
  auto w = encoder_weights(p, "enc.");
  auto trace = transformer_trace(w, p.at("x"), 2);
  const Tensor& y = trace.ln2.output;
  Tensor first = Tensor::vector(std::vector<double>(y.row(0).begin(), y.row(0).end()));
  Tensor probs = softmax(first);
  Tensor dy(y.shape());
  for (std::size_t c = 0; c < 8; ++c) dy.at(0, c) = probs[c] - (c == gold ? 1.0 : 0.0);
  for (std::size_t r = 1; r < 5; ++r) dy.at(r, r) += 0.1;
  Gradients g = zero_gradients(p);
  g.at("x") = transformer_backward(w, trace, dy, encoder_grads(g, "enc."));
  EXPECT_LT(grad_check(loss, g, p), kGradTol);
}

TEST(Cosine, GradCheckAndSelfSimilarity) {
  Rng rng(24);
  ModelParameters p;
  p.entries["a"] = random_tensor({5}, rng);
  p.entries["b"] = random_tensor({5}, rng);
  EXPECT_NEAR(cosine(p.at("a").data(), p.at("a").data()), 1.0, 1e-12);
  auto loss = [](const ModelParameters& m) { return cosine(m.at("a").data(), m.at("b").data()); };
  Gradients g = zero_gradients(p);
  cosine_backward(p.at("a").data(), p.at("b").data(), 1.0, g.at("a").data(), g.at("b").data());
  EXPECT_LT(grad_check(loss, g, p), kGradTol);
}

TEST(Sgd, Examples) {
  ModelParameters p;
  p.add_constant("w", {1}, 1.0);
  auto before = p;
  sgd_step(p, {{"w", Tensor({1}, 0.5)}}, 0.0);
  EXPECT_EQ(p, before);
  sgd_step(p, {{"w", Tensor({1}, 0.5)}}, 0.1);
  EXPECT_DOUBLE_EQ(p.at("w")[0], 0.95);
  EXPECT_THROW(sgd_step(p, {{"w", Tensor({2})}}, 0.1), ShapeMismatch);
  EXPECT_THROW(sgd_step(p, {{"v", Tensor({1})}}, 0.1), ShapeMismatch);
}

TEST(Sgd, ConvergesOnQuadratic) {
  ModelParameters p;
  p.add_constant("w", {1}, 0.0);
  for (int i = 0; i < 100; ++i) {
    double w = p.at("w")[0];
    sgd_step(p, {{"w", Tensor({1}, 2.0 * (w - 3.0))}}, 0.1);
  }
  // w_n - 3 = -3 * 0.8^n
  EXPECT_LT(std::abs(p.at("w")[0] - 3.0), 1e-6);
  EXPECT_NEAR(p.at("w")[0] - 3.0, -3.0 * std::pow(0.8, 100), 1e-12);
}

TEST(ModelParameters, SeededInitAndFileRoundTrip) {
  auto a = cell_params(CellKind::kLstm, 3, 4, 99);
  auto b = cell_params(CellKind::kLstm, 3, 4, 99);
  EXPECT_EQ(a, b);
  Rng rng(25);
  a.entries["odd"] = Tensor::vector({0.1, 1.0 / 3.0, -2.5e-300, 1e300, rng.uniform()});
  a.rng_seed = 0xfedcba9876543210ULL;
  a.arch = {{"kind", "test"}, {"d", 3}};
  auto path = (std::filesystem::temp_directory_path() / "openqa_model_test.json").string();
  save_model(a, path);
  auto loaded = load_model(path);
  EXPECT_EQ(loaded, a);
  EXPECT_THROW(load_model("/nonexistent/model.json"), IoError);
}

TEST(Rng, Uniform) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(-0.5, 0.5);
    EXPECT_GE(u, -0.5);
    EXPECT_LT(u, 0.5);
  }
  Rng a(5), b(5);
  EXPECT_EQ(a.next(), b.next());
}

}  // namespace
}  // namespace openqa::nn
