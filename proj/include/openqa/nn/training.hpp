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

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "openqa/nn/params.hpp"
#include "openqa/nn/tensor.hpp"

namespace openqa::nn {

// Hyperparameters shared by every trainer. Fields a model does not use are
// ignored by it.
struct TrainOptions {
  std::size_t epochs = 30;
  double lr = 0.05;
  std::uint64_t seed = 7;
  std::size_t dim = 32;
  std::size_t hidden = 32;
  std::size_t heads = 2;
  std::size_t layers = 1;
  std::size_t ffn = 64;
  std::size_t max_len = 64;
};

struct TrainResult {
  ModelParameters params;
  // Mean per-example loss accumulated over each epoch.
  std::vector<double> epoch_losses;
};

// Example-order stream, kept apart from the initialization stream so the
// same seed gives the same weights regardless of epoch count.
inline Rng shuffle_rng(std::uint64_t seed) { return Rng(seed ^ 0x9e3779b97f4a7c15ULL); }

// Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

}  // namespace openqa::nn
