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

#pragma once

// Layer kernels with hand-written backward passes. Forward functions are pure;
// the *_trace variants additionally keep what the matching backward needs.
// Backward functions accumulate parameter gradients into caller-owned
// tensors and return the gradient with respect to the layer input.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "openqa/nn/params.hpp"
#include "openqa/nn/tensor.hpp"

namespace openqa::nn {

using Ids = std::span<const std::uint32_t>;

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Along the last axis, max-subtracted.
Tensor softmax(const Tensor& x);
// dL/dx for y = softmax(x) along the last axis.
Tensor softmax_backward(const Tensor& y, const Tensor& dy);

// -log(max(p[gold], 1e-12)).
double cross_entropy(const Tensor& probabilities, std::size_t gold);

double sigmoid(double x);

// Linear: y = x W^T + b, x is [batch, in] (or a rank-1 [in]).
Tensor linear_forward(const Tensor& W, const Tensor& b, const Tensor& x);
struct LinearGrads {
  Tensor W;
  Tensor b;
  Tensor x;
};
LinearGrads linear_backward(const Tensor& W, const Tensor& x, const Tensor& dy);

// Embedding ---------------------------------------------------------------------

Tensor embedding_lookup(const Tensor& table, Ids ids);
// Scatter-add of dy rows into dtable; repeated ids accumulate.
void embedding_backward(Tensor& dtable, Ids ids, const Tensor& dy);

// Convolution -------------------------------------------------------------------

// filters [c_out, width, d], x [len, d] -> [len, c_out], zero "same" padding.
Tensor conv1d_forward(const Tensor& filters, const Tensor& x);
struct Conv1dGrads {
  Tensor filters;
  Tensor x;
};
Conv1dGrads conv1d_backward(const Tensor& filters, const Tensor& x, const Tensor& dy);

// Recurrent cells ---------------------------------------------------------------

enum class CellKind { kLstm, kGru };

// Gate blocks are stacked row-wise: GRU [z; r; n], LSTM [i; f; g; o].
// W is [gates*h, d], U is [gates*h, h], b is [gates*h].
struct CellWeights {
  const Tensor& W;
  const Tensor& U;
  const Tensor& b;
};

struct CellGrads {
  Tensor& W;
  Tensor& U;
  Tensor& b;
};

std::size_t gate_count(CellKind kind);
void add_cell_params(ModelParameters& params, const std::string& prefix, CellKind kind,
                     std::size_t input, std::size_t hidden, Rng& rng);
CellWeights cell_weights(const ModelParameters& params, std::string_view prefix);
CellGrads cell_grads(Gradients& grads, std::string_view prefix);

struct StepCache {
  std::vector<double> x;
  std::vector<double> h_prev;
  std::vector<double> c_prev;
  std::vector<double> gates;      // post-activation gate values
  std::vector<double> recurrent;  // GRU: U_n h_prev, before the reset gate
  std::vector<double> c;
  std::vector<double> h;
};

StepCache cell_step(CellKind kind, const CellWeights& w, std::span<const double> x,
                    std::span<const double> h_prev, std::span<const double> c_prev);

struct StepGrads {
  std::vector<double> x;
  std::vector<double> h_prev;
  std::vector<double> c_prev;
};

// dc is ignored for GRU.
StepGrads cell_step_backward(CellKind kind, const CellWeights& w, const StepCache& cache,
                             std::span<const double> dh, std::span<const double> dc,
                             CellGrads grads);

// z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
// n = tanh(Wn x + bn + r * (Un h)), h' = (1 - z) * n + z * h.
Tensor gru_step(const CellWeights& w, const Tensor& x, const Tensor& h_prev);

struct LstmState {
  Tensor h;
  Tensor c;
};
LstmState lstm_step(const CellWeights& w, const Tensor& x, const Tensor& h_prev,
                    const Tensor& c_prev);

struct BiTrace {
  CellKind kind = CellKind::kGru;
  std::vector<StepCache> forward;   // by position
  std::vector<StepCache> backward;  // by position
  Tensor output;                    // [len, 2h]: forward half, then backward half
};

BiTrace bidirectional_trace(CellKind kind, const CellWeights& fwd, const CellWeights& bwd,
                            const Tensor& x);
Tensor bidirectional_encode(CellKind kind, const CellWeights& fwd, const CellWeights& bwd,
                            const Tensor& x);
Tensor bidirectional_backward(const BiTrace& trace, const CellWeights& fwd,
                              const CellWeights& bwd, CellGrads fwd_grads,
                              CellGrads bwd_grads, const Tensor& dout);

// Attention ---------------------------------------------------------------------

struct AttentionResult {
  Tensor context;  // [v]
  Tensor weights;  // [len]
};

// weights = softmax(keys . query / sqrt(d)), context = weights^T values.
AttentionResult attention(const Tensor& query, const Tensor& keys, const Tensor& values);

struct AttentionGrads {
  Tensor query;
  Tensor keys;
  Tensor values;
};
AttentionGrads attention_backward(const Tensor& query, const Tensor& keys,
                                  const Tensor& values, const AttentionResult& forward,
                                  const Tensor& dcontext);

// Layer normalization -------------------------------------------------------------

inline constexpr double kLayerNormEps = 1e-12;

struct LayerNormTrace {
  Tensor normalized;  // before the affine scale and shift
  std::vector<double> inv_std;
  Tensor output;
};

LayerNormTrace layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor layer_norm_backward(const LayerNormTrace& trace, const Tensor& gain,
                           const Tensor& dy, Tensor& dgain, Tensor& dbias);

// Transformer encoder layer (post-norm) --------------------------------------------

struct EncoderWeights {
  const Tensor& Wq;
  const Tensor& Wk;
  const Tensor& Wv;
  const Tensor& Wo;
  const Tensor& bo;
  const Tensor& ln1_gain;
  const Tensor& ln1_bias;
  const Tensor& W1;
  const Tensor& b1;
  const Tensor& W2;
  const Tensor& b2;
  const Tensor& ln2_gain;
  const Tensor& ln2_bias;
};

struct EncoderGrads {
  Tensor& Wq;
  Tensor& Wk;
  Tensor& Wv;
  Tensor& Wo;
  Tensor& bo;
  Tensor& ln1_gain;
  Tensor& ln1_bias;
  Tensor& W1;
  Tensor& b1;
  Tensor& W2;
  Tensor& b2;
  Tensor& ln2_gain;
  Tensor& ln2_bias;
};

void add_encoder_params(ModelParameters& params, const std::string& prefix,
                        std::size_t model_dim, std::size_t ffn_dim, Rng& rng);
EncoderWeights encoder_weights(const ModelParameters& params, std::string_view prefix);
EncoderGrads encoder_grads(Gradients& grads, std::string_view prefix);

struct EncoderTrace {
  std::size_t heads = 1;
  Tensor x;
  Tensor q, k, v;                  // [len, d] projections
  std::vector<Tensor> attn;        // per head [len, len] softmax weights
  Tensor mixed;                    // concatenated head outputs [len, d]
  LayerNormTrace ln1;
  Tensor ffn_pre;                  // [len, ffn] before ReLU
  Tensor ffn_hidden;               // after ReLU
  LayerNormTrace ln2;
};

// Self-attention + residual + norm, then ReLU feed-forward + residual + norm.
EncoderTrace transformer_trace(const EncoderWeights& w, const Tensor& x, std::size_t heads);
Tensor transformer_encoder_layer(const EncoderWeights& w, const Tensor& x, std::size_t heads);
Tensor transformer_backward(const EncoderWeights& w, const EncoderTrace& trace,
                            const Tensor& dy, EncoderGrads grads);

// Cosine similarity with a 1e-12 floor on the norm product.
double cosine(std::span<const double> a, std::span<const double> b);
// Gradients of cosine(a, b) with respect to a and b.
void cosine_backward(std::span<const double> a, std::span<const double> b, double dout,
                     std::span<double> da, std::span<double> db);

}  // namespace openqa::nn
