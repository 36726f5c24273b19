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

#include "openqa/nn/params.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "openqa/error.hpp"

namespace openqa::nn {

namespace {

constexpr const char* kSeedKey = "rng_seed";
constexpr const char* kArchKey = "arch";

}  // namespace

const Tensor& ModelParameters::at(std::string_view name) const {
  auto it = entries.find(std::string(name));
  if (it == entries.end()) throw IndexOutOfRange("no parameter named " + std::string(name));
  return it->second;
}

Tensor& ModelParameters::at(std::string_view name) {
  auto it = entries.find(std::string(name));
  if (it == entries.end()) throw IndexOutOfRange("no parameter named " + std::string(name));
  return it->second;
}

bool ModelParameters::contains(std::string_view name) const {
  return entries.count(std::string(name)) > 0;
}

void ModelParameters::add_xavier(const std::string& name, Tensor::Shape shape,
                                 std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values()) v = rng.uniform(-r, r);
  entries[name] = std::move(t);
}

void ModelParameters::add_constant(const std::string& name, Tensor::Shape shape,
                                   double value) {
  entries[name] = Tensor(std::move(shape), value);
}

Gradients zero_gradients(const ModelParameters& params) {
  Gradients grads;
  for (const auto& [name, tensor] : params.entries) grads.emplace(name, Tensor(tensor.shape()));
  return grads;
}

void accumulate(Gradients& into, const Gradients& from) {
  for (const auto& [name, g] : from) {
    auto it = into.find(name);
    if (it == into.end()) {
      into.emplace(name, g);
    } else {
      it->second += g;
    }
  }
}

void sgd_step(ModelParameters& params, const Gradients& grads, double lr) {
  for (const auto& [name, g] : grads) {
    auto it = params.entries.find(name);
    if (it == params.entries.end()) {
      throw ShapeMismatch("gradient for unknown parameter " + name);
    }
    Tensor& p = it->second;
    if (!p.same_shape(g)) {
      throw ShapeMismatch("gradient " + name + " has shape " + shape_string(g.shape()) +
                          ", parameter has " + shape_string(p.shape()));
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  }
}

double grad_check(const std::function<double(const ModelParameters&)>& loss,
                  const Gradients& analytic, ModelParameters params, double step) {
  double worst = 0.0;
  for (auto& [name, tensor] : params.entries) {
    auto it = analytic.find(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      double original = tensor[i];
      tensor[i] = original + step;
      double plus = loss(params);
      tensor[i] = original - step;
      double minus = loss(params);
      tensor[i] = original;
      double numeric = (plus - minus) / (2.0 * step);
      double a = it == analytic.end() ? 0.0 : it->second[i];
      double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

nlohmann::json to_json(const ModelParameters& params) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, tensor] : params.entries) {
    doc[name] = {{"shape", tensor.shape()}, {"data", tensor.values()}};
  }
  doc[kSeedKey] = params.rng_seed;
  doc[kArchKey] = params.arch;
  return doc;
}

ModelParameters model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("model document must be a JSON object");
  ModelParameters params;
  for (const auto& [name, value] : doc.items()) {
    if (name == kSeedKey) {
      params.rng_seed = value.get<std::uint64_t>();
    } else if (name == kArchKey) {
      params.arch = value;
    } else {
      params.entries[name] = Tensor(value.at("shape").get<Tensor::Shape>(),
                                    value.at("data").get<std::vector<double>>());
    }
  }
  return params;
}

void save_model(const ModelParameters& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file " + path);
  out << to_json(params).dump() << '\n';
  if (!out) throw IoError("error writing model file " + path);
}

ModelParameters load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file " + path + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace openqa::nn
