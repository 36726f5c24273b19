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

#include "openqa/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "openqa/error.hpp"

namespace openqa::nn {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeMismatch(message);
}

// y[rows] (+)= M[rows, cols] x[cols]
void gemv(const Tensor& m, std::span<const double> x, std::span<double> y) {
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.data().data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// y[cols] += M^T[cols, rows] x[rows]
void gemv_t(const Tensor& m, std::span<const double> x, std::span<double> y) {
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.data().data() + r * cols;
    double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) y[c] += row[c] * xr;
  }
}

// G[rows, cols] += a[rows] b[cols]^T
void outer_add(Tensor& g, std::span<const double> a, std::span<const double> b) {
  const std::size_t cols = g.cols();
  for (std::size_t r = 0; r < a.size(); ++r) {
    double ar = a[r];
    if (ar == 0.0) continue;
    double* row = g.data().data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += ar * b[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Row-major [rows, cols] product helpers on whole tensors.
// out = a b^T, a [n, k], b [m, k]
Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  Tensor out({a.rows(), b.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out.at(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

// out += a^T b, a [n, m], b [n, k] -> [m, k]
void matmul_at_add(Tensor& out, const Tensor& a, const Tensor& b) {
  for (std::size_t n = 0; n < a.rows(); ++n) outer_add(out, a.row(n), b.row(n));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul expects rank-2 tensors");
  require(a.dim(1) == b.dim(0), "matmul inner dimensions " + shape_string(a.shape()) +
                                    " x " + shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double aip = a.at(i, p);
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += aip * b.at(p, j);
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose expects a rank-2 tensor");
  Tensor out({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

Tensor softmax(const Tensor& x) {
  require(x.size() > 0 && x.cols() > 0, "softmax over an empty axis");
  Tensor y = x;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    double max = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (auto& v : row) {
      v = std::exp(v - max);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
  return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& dy) {
  require(y.same_shape(dy), "softmax_backward shape mismatch");
  Tensor dx(y.shape());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double inner = dot(y.row(r), dy.row(r));
    auto yr = y.row(r);
    auto dyr = dy.row(r);
    auto dxr = dx.row(r);
    for (std::size_t i = 0; i < yr.size(); ++i) dxr[i] = yr[i] * (dyr[i] - inner);
  }
  return dx;
}

double cross_entropy(const Tensor& probabilities, std::size_t gold) {
  if (gold >= probabilities.size()) {
    throw IndexOutOfRange("gold index " + std::to_string(gold) + " out of range " +
                          std::to_string(probabilities.size()));
  }
  return -std::log(std::max(probabilities[gold], 1e-12));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Linear ----------------------------------------------------------------------

Tensor linear_forward(const Tensor& W, const Tensor& b, const Tensor& x) {
  require(W.rank() == 2 && b.size() == W.dim(0), "linear: bias does not match weight rows");
  require(x.cols() == W.dim(1), "linear: input width " + std::to_string(x.cols()) +
                                    " vs weight " + shape_string(W.shape()));
  const std::size_t batch = x.rows();
  Tensor y = x.rank() == 1 ? Tensor({W.dim(0)}) : Tensor({batch, W.dim(0)});
  for (std::size_t n = 0; n < batch; ++n) {
    auto out = y.row(n);
    std::copy(b.data().begin(), b.data().end(), out.begin());
    gemv(W, x.row(n), out);
  }
  return y;
}

LinearGrads linear_backward(const Tensor& W, const Tensor& x, const Tensor& dy) {
  require(dy.cols() == W.dim(0) && dy.rows() == x.rows(), "linear_backward shape mismatch");
  LinearGrads g{Tensor(W.shape()), Tensor({W.dim(0)}), Tensor(x.shape())};
  for (std::size_t n = 0; n < x.rows(); ++n) {
    outer_add(g.W, dy.row(n), x.row(n));
    auto dyn = dy.row(n);
    for (std::size_t o = 0; o < dyn.size(); ++o) g.b[o] += dyn[o];
    gemv_t(W, dyn, g.x.row(n));
  }
  return g;
}

// Embedding ---------------------------------------------------------------------

Tensor embedding_lookup(const Tensor& table, Ids ids) {
  require(table.rank() == 2, "embedding table must be rank 2");
  Tensor out({ids.size(), table.dim(1)});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.dim(0)) {
      throw IndexOutOfRange("token id " + std::to_string(ids[i]) + " >= vocabulary size " +
                            std::to_string(table.dim(0)));
    }
    auto src = table.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void embedding_backward(Tensor& dtable, Ids ids, const Tensor& dy) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= dtable.dim(0)) throw IndexOutOfRange("token id out of range");
    auto dst = dtable.row(ids[i]);
    auto src = dy.row(i);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
}

// Convolution -------------------------------------------------------------------

Tensor conv1d_forward(const Tensor& filters, const Tensor& x) {
  require(filters.rank() == 3, "conv1d filters must be [c_out, width, d]");
  const std::size_t c_out = filters.dim(0), width = filters.dim(1), d = filters.dim(2);
  if (width % 2 == 0) throw EvenWidth("conv1d width " + std::to_string(width) + " is even");
  require(x.rank() == 2 && x.dim(1) == d, "conv1d input width mismatch");
  const std::size_t len = x.dim(0);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width / 2);
  Tensor y({len, c_out});
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t c = 0; c < c_out; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < width; ++k) {
        std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        const double* f = filters.data().data() + (c * width + k) * d;
        acc += dot({f, d}, x.row(static_cast<std::size_t>(src)));
      }
      y.at(t, c) = acc;
    }
  }
  return y;
}

Conv1dGrads conv1d_backward(const Tensor& filters, const Tensor& x, const Tensor& dy) {
  const std::size_t c_out = filters.dim(0), width = filters.dim(1), d = filters.dim(2);
  const std::size_t len = x.dim(0);
  require(dy.rank() == 2 && dy.dim(0) == len && dy.dim(1) == c_out, "conv1d_backward shape");
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width / 2);
  Conv1dGrads g{Tensor(filters.shape()), Tensor(x.shape())};
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t c = 0; c < c_out; ++c) {
      double grad = dy.at(t, c);
      if (grad == 0.0) continue;
      for (std::size_t k = 0; k < width; ++k) {
        std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        std::size_t offset = (c * width + k) * d;
        auto xs = x.row(static_cast<std::size_t>(src));
        auto dxs = g.x.row(static_cast<std::size_t>(src));
        for (std::size_t j = 0; j < d; ++j) {
          g.filters[offset + j] += grad * xs[j];
          dxs[j] += grad * filters[offset + j];
        }
      }
    }
  }
  return g;
}

// Recurrent cells ---------------------------------------------------------------

std::size_t gate_count(CellKind kind) { return kind == CellKind::kLstm ? 4 : 3; }

void add_cell_params(ModelParameters& params, const std::string& prefix, CellKind kind,
                     std::size_t input, std::size_t hidden, Rng& rng) {
  std::size_t rows = gate_count(kind) * hidden;
  params.add_xavier(prefix + "W", {rows, input}, input, hidden, rng);
  params.add_xavier(prefix + "U", {rows, hidden}, hidden, hidden, rng);
  params.add_constant(prefix + "b", {rows}, 0.0);
}

CellWeights cell_weights(const ModelParameters& params, std::string_view prefix) {
  std::string p(prefix);
  return {params.at(p + "W"), params.at(p + "U"), params.at(p + "b")};
}

CellGrads cell_grads(Gradients& grads, std::string_view prefix) {
  std::string p(prefix);
  return {grads.at(p + "W"), grads.at(p + "U"), grads.at(p + "b")};
}

namespace {

std::size_t check_cell(CellKind kind, const CellWeights& w, std::size_t input_size) {
  const std::size_t gates = gate_count(kind);
  require(w.W.rank() == 2 && w.U.rank() == 2, "cell weights must be rank 2");
  const std::size_t hidden = w.U.dim(1);
  require(w.W.dim(0) == gates * hidden && w.U.dim(0) == gates * hidden &&
              w.b.size() == gates * hidden,
          "cell weight blocks do not match hidden size " + std::to_string(hidden));
  require(w.W.dim(1) == input_size, "cell input size " + std::to_string(input_size) +
                                        " vs weights " + shape_string(w.W.shape()));
  return hidden;
}

}  // namespace

StepCache cell_step(CellKind kind, const CellWeights& w, std::span<const double> x,
                    std::span<const double> h_prev, std::span<const double> c_prev) {
  const std::size_t h = check_cell(kind, w, x.size());
  require(h_prev.size() == h, "cell hidden state size mismatch");
  StepCache s;
  s.x.assign(x.begin(), x.end());
  s.h_prev.assign(h_prev.begin(), h_prev.end());

  std::vector<double> input(w.b.data().begin(), w.b.data().end());
  gemv(w.W, x, input);
  std::vector<double> rec(gate_count(kind) * h, 0.0);
  gemv(w.U, h_prev, rec);
  s.gates.resize(input.size());
  s.h.resize(h);

  if (kind == CellKind::kGru) {
    s.recurrent.assign(rec.begin() + 2 * h, rec.end());
    for (std::size_t j = 0; j < h; ++j) {
      double z = sigmoid(input[j] + rec[j]);
      double r = sigmoid(input[h + j] + rec[h + j]);
      double n = std::tanh(input[2 * h + j] + r * rec[2 * h + j]);
      s.gates[j] = z;
      s.gates[h + j] = r;
      s.gates[2 * h + j] = n;
      s.h[j] = (1.0 - z) * n + z * h_prev[j];
    }
  } else {
    require(c_prev.size() == h, "LSTM cell state size mismatch");
    s.c_prev.assign(c_prev.begin(), c_prev.end());
    s.c.resize(h);
    for (std::size_t j = 0; j < h; ++j) {
      double i = sigmoid(input[j] + rec[j]);
      double f = sigmoid(input[h + j] + rec[h + j]);
      double g = std::tanh(input[2 * h + j] + rec[2 * h + j]);
      double o = sigmoid(input[3 * h + j] + rec[3 * h + j]);
      s.gates[j] = i;
      s.gates[h + j] = f;
      s.gates[2 * h + j] = g;
      s.gates[3 * h + j] = o;
      s.c[j] = f * c_prev[j] + i * g;
      s.h[j] = o * std::tanh(s.c[j]);
    }
  }
  return s;
}

StepGrads cell_step_backward(CellKind kind, const CellWeights& w, const StepCache& s,
                             std::span<const double> dh, std::span<const double> dc,
                             CellGrads grads) {
  const std::size_t h = s.h.size();
  StepGrads out;
  out.x.assign(s.x.size(), 0.0);
  out.h_prev.assign(h, 0.0);
  std::vector<double> d_input(gate_count(kind) * h);  // w.r.t. W x + b
  std::vector<double> d_rec(gate_count(kind) * h);    // w.r.t. U h_prev

  if (kind == CellKind::kGru) {
    for (std::size_t j = 0; j < h; ++j) {
      double z = s.gates[j], r = s.gates[h + j], n = s.gates[2 * h + j];
      double dn = dh[j] * (1.0 - z);
      double dz = dh[j] * (s.h_prev[j] - n);
      out.h_prev[j] = dh[j] * z;
      double da_n = dn * (1.0 - n * n);
      double dr = da_n * s.recurrent[j];
      double da_z = dz * z * (1.0 - z);
      double da_r = dr * r * (1.0 - r);
      d_input[j] = da_z;
      d_input[h + j] = da_r;
      d_input[2 * h + j] = da_n;
      d_rec[j] = da_z;
      d_rec[h + j] = da_r;
      d_rec[2 * h + j] = da_n * r;
    }
  } else {
    out.c_prev.assign(h, 0.0);
    for (std::size_t j = 0; j < h; ++j) {
      double i = s.gates[j], f = s.gates[h + j], g = s.gates[2 * h + j], o = s.gates[3 * h + j];
      double tc = std::tanh(s.c[j]);
      double dcj = (dc.empty() ? 0.0 : dc[j]) + dh[j] * o * (1.0 - tc * tc);
      double d_o = dh[j] * tc;
      out.c_prev[j] = dcj * f;
      d_input[j] = dcj * g * i * (1.0 - i);
      d_input[h + j] = dcj * s.c_prev[j] * f * (1.0 - f);
      d_input[2 * h + j] = dcj * i * (1.0 - g * g);
      d_input[3 * h + j] = d_o * o * (1.0 - o);
    }
    d_rec = d_input;
  }

  outer_add(grads.W, d_input, s.x);
  outer_add(grads.U, d_rec, s.h_prev);
  for (std::size_t k = 0; k < d_input.size(); ++k) grads.b[k] += d_input[k];
  gemv_t(w.W, d_input, out.x);
  gemv_t(w.U, d_rec, out.h_prev);
  return out;
}

Tensor gru_step(const CellWeights& w, const Tensor& x, const Tensor& h_prev) {
  auto s = cell_step(CellKind::kGru, w, x.data(), h_prev.data(), {});
  return Tensor::vector(std::move(s.h));
}

LstmState lstm_step(const CellWeights& w, const Tensor& x, const Tensor& h_prev,
                    const Tensor& c_prev) {
  auto s = cell_step(CellKind::kLstm, w, x.data(), h_prev.data(), c_prev.data());
  return {Tensor::vector(std::move(s.h)), Tensor::vector(std::move(s.c))};
}

BiTrace bidirectional_trace(CellKind kind, const CellWeights& fwd, const CellWeights& bwd,
                            const Tensor& x) {
  require(x.rank() == 2, "bidirectional_encode expects [len, d]");
  const std::size_t len = x.dim(0);
  if (len == 0) throw EmptySequence("bidirectional_encode over an empty sequence");
  const std::size_t hf = check_cell(kind, fwd, x.dim(1));
  const std::size_t hb = check_cell(kind, bwd, x.dim(1));

  BiTrace trace;
  trace.kind = kind;
  trace.forward.resize(len);
  trace.backward.resize(len);
  trace.output = Tensor({len, hf + hb});

  std::vector<double> h(hf, 0.0), c(hf, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    trace.forward[t] = cell_step(kind, fwd, x.row(t), h, c);
    h = trace.forward[t].h;
    if (kind == CellKind::kLstm) c = trace.forward[t].c;
    std::copy(h.begin(), h.end(), trace.output.row(t).begin());
  }
  h.assign(hb, 0.0);
  c.assign(hb, 0.0);
  for (std::size_t t = len; t-- > 0;) {
    trace.backward[t] = cell_step(kind, bwd, x.row(t), h, c);
    h = trace.backward[t].h;
    if (kind == CellKind::kLstm) c = trace.backward[t].c;
    std::copy(h.begin(), h.end(), trace.output.row(t).begin() + static_cast<std::ptrdiff_t>(hf));
  }
  return trace;
}

Tensor bidirectional_encode(CellKind kind, const CellWeights& fwd, const CellWeights& bwd,
                            const Tensor& x) {
  return bidirectional_trace(kind, fwd, bwd, x).output;
}

Tensor bidirectional_backward(const BiTrace& trace, const CellWeights& fwd,
                              const CellWeights& bwd, CellGrads fwd_grads,
                              CellGrads bwd_grads, const Tensor& dout) {
  const std::size_t len = trace.forward.size();
  const std::size_t hf = trace.forward.front().h.size();
  const std::size_t hb = trace.backward.front().h.size();
  const std::size_t d = trace.forward.front().x.size();
  require(dout.rank() == 2 && dout.dim(0) == len && dout.dim(1) == hf + hb,
          "bidirectional_backward gradient shape");
  Tensor dx({len, d});

  std::vector<double> dh(hf, 0.0), dc(hf, 0.0);
  for (std::size_t t = len; t-- > 0;) {
    auto row = dout.row(t);
    for (std::size_t j = 0; j < hf; ++j) dh[j] += row[j];
    auto g = cell_step_backward(trace.kind, fwd, trace.forward[t], dh, dc, fwd_grads);
    auto dxt = dx.row(t);
    for (std::size_t j = 0; j < d; ++j) dxt[j] += g.x[j];
    dh = std::move(g.h_prev);
    if (trace.kind == CellKind::kLstm) dc = std::move(g.c_prev);
  }
  dh.assign(hb, 0.0);
  dc.assign(hb, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    auto row = dout.row(t);
    for (std::size_t j = 0; j < hb; ++j) dh[j] += row[hf + j];
    auto g = cell_step_backward(trace.kind, bwd, trace.backward[t], dh, dc, bwd_grads);
    auto dxt = dx.row(t);
    for (std::size_t j = 0; j < d; ++j) dxt[j] += g.x[j];
    dh = std::move(g.h_prev);
    if (trace.kind == CellKind::kLstm) dc = std::move(g.c_prev);
  }
  return dx;
}

// Attention ---------------------------------------------------------------------

AttentionResult attention(const Tensor& query, const Tensor& keys, const Tensor& values) {
  require(keys.rank() == 2 && values.rank() == 2, "attention keys/values must be rank 2");
  const std::size_t len = keys.dim(0);
  if (len == 0) throw EmptySequence("attention over an empty sequence");
  require(values.dim(0) == len, "attention keys and values differ in length");
  require(query.size() == keys.dim(1), "attention query width mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.size()));

  Tensor scores({len});
  for (std::size_t j = 0; j < len; ++j) scores[j] = dot(keys.row(j), query.data()) * scale;
  AttentionResult out{Tensor({values.dim(1)}), softmax(scores)};
  for (std::size_t j = 0; j < len; ++j) {
    auto v = values.row(j);
    for (std::size_t c = 0; c < v.size(); ++c) out.context[c] += out.weights[j] * v[c];
  }
  return out;
}

AttentionGrads attention_backward(const Tensor& query, const Tensor& keys,
                                  const Tensor& values, const AttentionResult& fwd,
                                  const Tensor& dcontext) {
  const std::size_t len = keys.dim(0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.size()));
  AttentionGrads g{Tensor(query.shape()), Tensor(keys.shape()), Tensor(values.shape())};
  Tensor dweights({len});
  for (std::size_t j = 0; j < len; ++j) {
    dweights[j] = dot(dcontext.data(), values.row(j));
    auto dv = g.values.row(j);
    for (std::size_t c = 0; c < dv.size(); ++c) dv[c] = fwd.weights[j] * dcontext[c];
  }
  Tensor dscores = softmax_backward(fwd.weights, dweights);
  for (std::size_t j = 0; j < len; ++j) {
    double ds = dscores[j] * scale;
    auto k = keys.row(j);
    auto dk = g.keys.row(j);
    for (std::size_t c = 0; c < k.size(); ++c) {
      g.query[c] += ds * k[c];
      dk[c] = ds * query[c];
    }
  }
  return g;
}

// Layer normalization -------------------------------------------------------------

LayerNormTrace layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const std::size_t d = x.cols();
  require(gain.size() == d && bias.size() == d, "layer_norm parameter width mismatch");
  LayerNormTrace t{Tensor(x.shape()), std::vector<double>(x.rows()), Tensor(x.shape())};
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    t.inv_std[r] = inv;
    auto nr = t.normalized.row(r);
    auto yr = t.output.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      nr[c] = (xr[c] - mean) * inv;
      yr[c] = gain[c] * nr[c] + bias[c];
    }
  }
  return t;
}

Tensor layer_norm_backward(const LayerNormTrace& t, const Tensor& gain, const Tensor& dy,
                           Tensor& dgain, Tensor& dbias) {
  const std::size_t d = dy.cols();
  Tensor dx(dy.shape());
  std::vector<double> dn(d);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto dyr = dy.row(r);
    auto nr = t.normalized.row(r);
    double mean_dn = 0.0, mean_dn_n = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dgain[c] += dyr[c] * nr[c];
      dbias[c] += dyr[c];
      dn[c] = dyr[c] * gain[c];
      mean_dn += dn[c];
      mean_dn_n += dn[c] * nr[c];
    }
    mean_dn /= static_cast<double>(d);
    mean_dn_n /= static_cast<double>(d);
    auto dxr = dx.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      dxr[c] = t.inv_std[r] * (dn[c] - mean_dn - nr[c] * mean_dn_n);
    }
  }
  return dx;
}

// Transformer encoder layer ----------------------------------------------------------

void add_encoder_params(ModelParameters& params, const std::string& prefix,
                        std::size_t model_dim, std::size_t ffn_dim, Rng& rng) {
  const std::size_t d = model_dim;
  for (const char* name : {"Wq", "Wk", "Wv", "Wo"}) {
    params.add_xavier(prefix + name, {d, d}, d, d, rng);
  }
  params.add_constant(prefix + "bo", {d}, 0.0);
  params.add_constant(prefix + "ln1_gain", {d}, 1.0);
  params.add_constant(prefix + "ln1_bias", {d}, 0.0);
  params.add_xavier(prefix + "W1", {ffn_dim, d}, d, ffn_dim, rng);
  params.add_constant(prefix + "b1", {ffn_dim}, 0.0);
  params.add_xavier(prefix + "W2", {d, ffn_dim}, ffn_dim, d, rng);
  params.add_constant(prefix + "b2", {d}, 0.0);
  params.add_constant(prefix + "ln2_gain", {d}, 1.0);
  params.add_constant(prefix + "ln2_bias", {d}, 0.0);
}

EncoderWeights encoder_weights(const ModelParameters& p, std::string_view prefix) {
  std::string s(prefix);
  return {p.at(s + "Wq"),       p.at(s + "Wk"),       p.at(s + "Wv"), p.at(s + "Wo"),
          p.at(s + "bo"),       p.at(s + "ln1_gain"), p.at(s + "ln1_bias"),
          p.at(s + "W1"),       p.at(s + "b1"),       p.at(s + "W2"), p.at(s + "b2"),
          p.at(s + "ln2_gain"), p.at(s + "ln2_bias")};
}

EncoderGrads encoder_grads(Gradients& g, std::string_view prefix) {
  std::string s(prefix);
  return {g.at(s + "Wq"),       g.at(s + "Wk"),       g.at(s + "Wv"), g.at(s + "Wo"),
          g.at(s + "bo"),       g.at(s + "ln1_gain"), g.at(s + "ln1_bias"),
          g.at(s + "W1"),       g.at(s + "b1"),       g.at(s + "W2"), g.at(s + "b2"),
          g.at(s + "ln2_gain"), g.at(s + "ln2_bias")};
}

namespace {

Tensor project(const Tensor& W, const Tensor& x) {  // x W^T, no bias
  return matmul_bt(x, W);
}

}  // namespace

EncoderTrace transformer_trace(const EncoderWeights& w, const Tensor& x, std::size_t heads) {
  require(x.rank() == 2 && x.dim(0) > 0, "transformer input must be [len, d] with len >= 1");
  const std::size_t len = x.dim(0), d = x.dim(1);
  require(heads > 0 && d % heads == 0, "model width " + std::to_string(d) +
                                           " not divisible by " + std::to_string(heads) +
                                           " heads");
  require(w.Wq.rank() == 2 && w.Wq.dim(0) == d && w.Wq.dim(1) == d,
          "attention projections must be [d, d]");
  require(w.W1.dim(1) == d && w.W2.dim(0) == d, "feed-forward weights do not match d");
  const std::size_t hd = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  EncoderTrace t;
  t.heads = heads;
  t.x = x;
  t.q = project(w.Wq, x);
  t.k = project(w.Wk, x);
  t.v = project(w.Wv, x);
  t.mixed = Tensor({len, d});
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    Tensor scores({len, len});
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        scores.at(i, j) = dot(t.q.row(i).subspan(off, hd), t.k.row(j).subspan(off, hd)) * scale;
      }
    }
    Tensor a = softmax(scores);
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        double aij = a.at(i, j);
        auto vj = t.v.row(j);
        for (std::size_t c = 0; c < hd; ++c) t.mixed.at(i, off + c) += aij * vj[off + c];
      }
    }
    t.attn.push_back(std::move(a));
  }
  Tensor residual1 = linear_forward(w.Wo, w.bo, t.mixed);
  residual1 += x;
  t.ln1 = layer_norm(residual1, w.ln1_gain, w.ln1_bias);

  t.ffn_pre = linear_forward(w.W1, w.b1, t.ln1.output);
  t.ffn_hidden = t.ffn_pre;
  for (auto& v : t.ffn_hidden.values()) v = std::max(v, 0.0);
  Tensor residual2 = linear_forward(w.W2, w.b2, t.ffn_hidden);
  residual2 += t.ln1.output;
  t.ln2 = layer_norm(residual2, w.ln2_gain, w.ln2_bias);
  return t;
}

Tensor transformer_encoder_layer(const EncoderWeights& w, const Tensor& x, std::size_t heads) {
  return transformer_trace(w, x, heads).ln2.output;
}

Tensor transformer_backward(const EncoderWeights& w, const EncoderTrace& t, const Tensor& dy,
                            EncoderGrads g) {
  const std::size_t len = t.x.dim(0), d = t.x.dim(1);
  const std::size_t hd = d / t.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  // Feed-forward block.
  Tensor dres2 = layer_norm_backward(t.ln2, w.ln2_gain, dy, g.ln2_gain, g.ln2_bias);
  auto ff2 = linear_backward(w.W2, t.ffn_hidden, dres2);
  g.W2 += ff2.W;
  g.b2 += ff2.b;
  Tensor dpre = ff2.x;
  for (std::size_t i = 0; i < dpre.size(); ++i) {
    if (t.ffn_pre[i] <= 0.0) dpre[i] = 0.0;
  }
  auto ff1 = linear_backward(w.W1, t.ln1.output, dpre);
  g.W1 += ff1.W;
  g.b1 += ff1.b;
  Tensor dln1 = ff1.x;
  dln1 += dres2;

  // Attention block.
  Tensor dres1 = layer_norm_backward(t.ln1, w.ln1_gain, dln1, g.ln1_gain, g.ln1_bias);
  auto out = linear_backward(w.Wo, t.mixed, dres1);
  g.Wo += out.W;
  g.bo += out.b;
  const Tensor& dmixed = out.x;

  Tensor dq({len, d}), dk({len, d}), dv({len, d});
  for (std::size_t h = 0; h < t.heads; ++h) {
    const std::size_t off = h * hd;
    const Tensor& a = t.attn[h];
    Tensor da({len, len});
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        da.at(i, j) = dot(dmixed.row(i).subspan(off, hd), t.v.row(j).subspan(off, hd));
        double aij = a.at(i, j);
        for (std::size_t c = 0; c < hd; ++c) dv.at(j, off + c) += aij * dmixed.at(i, off + c);
      }
    }
    Tensor ds = softmax_backward(a, da);
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        double s = ds.at(i, j) * scale;
        if (s == 0.0) continue;
        for (std::size_t c = 0; c < hd; ++c) {
          dq.at(i, off + c) += s * t.k.at(j, off + c);
          dk.at(j, off + c) += s * t.q.at(i, off + c);
        }
      }
    }
  }

  Tensor dx = dres1;
  auto backprop_projection = [&](const Tensor& W, const Tensor& dproj, Tensor& dW) {
    matmul_at_add(dW, dproj, t.x);
    for (std::size_t n = 0; n < len; ++n) gemv_t(W, dproj.row(n), dx.row(n));
  };
  backprop_projection(w.Wq, dq, g.Wq);
  backprop_projection(w.Wk, dk, g.Wk);
  backprop_projection(w.Wv, dv, g.Wv);
  return dx;
}

// Similarity ---------------------------------------------------------------------

double cosine(std::span<const double> a, std::span<const double> b) {
  double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  return dot(a, b) / std::max(na * nb, 1e-12);
}

void cosine_backward(std::span<const double> a, std::span<const double> b, double dout,
                     std::span<double> da, std::span<double> db) {
  double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  double denom = na * nb;
  if (denom < 1e-12) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      da[i] += dout * b[i] / 1e-12;
      db[i] += dout * a[i] / 1e-12;
    }
    return;
  }
  double cos = dot(a, b) / denom;
  for (std::size_t i = 0; i < a.size(); ++i) {
    da[i] += dout * (b[i] / denom - cos * a[i] / (na * na));
    db[i] += dout * (a[i] / denom - cos * b[i] / (nb * nb));
  }
}

}  // namespace openqa::nn
