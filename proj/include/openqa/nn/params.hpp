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

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"
#include "openqa/nn/tensor.hpp"

namespace openqa::nn {

using Gradients = std::map<std::string, Tensor>;

// Named parameter tensors plus the seed and architecture record they were
// initialized from.
struct ModelParameters {
  std::map<std::string, Tensor> entries;
  std::uint64_t rng_seed = 0;
  nlohmann::json arch = nlohmann::json::object();

  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);
  bool contains(std::string_view name) const;

  // Uniform(-r, r), r = sqrt(6 / (fan_in + fan_out)).
  void add_xavier(const std::string& name, Tensor::Shape shape, std::size_t fan_in,
                  std::size_t fan_out, Rng& rng);
  void add_constant(const std::string& name, Tensor::Shape shape, double value);

  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

Gradients zero_gradients(const ModelParameters& params);
void accumulate(Gradients& into, const Gradients& from);

// p <- p - lr * g. Entries absent from `grads` are left untouched.
void sgd_step(ModelParameters& params, const Gradients& grads, double lr);

/// Central finite differences against an analytic gradient. Returns the
/// largest |a - n| / max(|a|, |n|, 1e-8) over all coordinates. Parameters
/// missing from `analytic` are treated as having zero analytic gradient.
double grad_check(const std::function<double(const ModelParameters&)>& loss,
                  const Gradients& analytic, ModelParameters params,
                  double step = 1e-5);

// {"<name>": {"shape": [...], "data": [...]}, ..., "rng_seed": n, "arch": {...}}
nlohmann::json to_json(const ModelParameters& params);
ModelParameters model_from_json(const nlohmann::json& doc);
void save_model(const ModelParameters& params, const std::string& path);
ModelParameters load_model(const std::string& path);

}  // namespace openqa::nn
