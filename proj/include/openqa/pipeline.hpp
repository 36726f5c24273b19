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

#include <array>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "openqa/answer.hpp"
#include "openqa/nn/training.hpp"
#include "openqa/selector.hpp"

namespace openqa::pipeline {

inline constexpr std::size_t kSolverCount = 3;
inline constexpr std::array<SolverKind, kSolverCount> kSolvers{SolverKind::kSp, SolverKind::kLd,
                                                                SolverKind::kRr};

struct ModelPaths {
  std::optional<std::string> tagger;
  std::optional<std::string> scorer;
  std::optional<std::string> reader;
  std::optional<std::string> selector;
};

// Paths are stored resolved against the directory of the config file.
struct SystemConfig {
  std::string kb_path;
  std::optional<std::string> passages_path;
  std::optional<std::string> templates_path;
  std::optional<std::string> vocab_path;
  std::optional<std::string> index_path;
  ModelPaths models;
  std::size_t retrieval_k = 10;
  nn::TrainOptions hyper;
  std::string http_addr = "127.0.0.1:8080";
  std::chrono::milliseconds solver_timeout{5000};
  bool concurrent = true;
};

// Throws ConfigError on unknown keys, bad values or a missing kb_path.
SystemConfig config_from_json(const nlohmann::json& doc, const std::string& base_dir);
SystemConfig load_config(const std::string& path);
// `--config` value if given, else $OPENQA_CONFIG. Throws ConfigError if neither.
std::string resolve_config_path(const std::optional<std::string>& flag);

struct LoadOptions {
  // Model files that are configured must exist; otherwise they are skipped.
  bool require_models = true;
  bool load_selector = true;
};

struct AskResponse {
  std::optional<std::string> answer;
  double confidence = 0.0;
  // "sp", "ld", "rr", "selector", or empty when there is no answer.
  std::string solver;
  std::array<std::vector<AnswerCandidate>, kSolverCount> candidates;
  std::array<double, kSolverCount> timings_ms{};
};

nlohmann::json to_json(const AnswerCandidate& candidate);
nlohmann::json to_json(const AskResponse& response);

struct QaPair {
  std::string question;
  std::string answer;
  friend bool operator==(const QaPair&, const QaPair&) = default;
};

// {"question": str, "answer": str}
std::vector<QaPair> parse_qa(const std::string& jsonl);
std::vector<QaPair> load_qa(const std::string& path);

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::map<std::string, double> per_solver_hit_rate;
};

nlohmann::json to_json(const EvalReport& report);

struct SelectorDataReport {
  std::vector<selector::SelectorExample> examples;
  std::size_t skipped_too_few = 0;
  std::size_t skipped_no_match = 0;
};

// Immutable after construction; ask may be called from many threads.
class System {
 public:
  explicit System(SystemConfig config, LoadOptions options = {});

  // Throws EmptyQuestion. Solver errors and timeouts leave that solver's list
  // empty and are logged to stderr.
  AskResponse ask(const std::string& question) const;

  const SystemConfig& config() const noexcept { return config_; }
  bool has_selector() const;

  struct Resources;

 private:
  SystemConfig config_;
  std::shared_ptr<const Resources> resources_;
};

// Exact match after normalize on both sides.
bool answers_match(const std::string& predicted, const std::string& gold);

// Throws EmptyDataset.
EvalReport evaluate(const System& system, const std::vector<QaPair>& dataset);

// Each solver's top candidate, in solver order.
std::vector<AnswerCandidate> top_candidates(const AskResponse& response);

// Throws EmptyDataset.
SelectorDataReport make_selector_data(const System& system, const std::vector<QaPair>& dataset);
void write_selector_data(const std::vector<selector::SelectorExample>& examples,
                         const std::string& path);

// Seeded Fisher-Yates shuffle; the first round(fraction * n) go to train.
// Throws ConfigError unless 0 < fraction < 1.
std::pair<std::vector<QaPair>, std::vector<QaPair>> split_dataset(const std::vector<QaPair>& pairs,
                                                                  double train_fraction,
                                                                  std::uint64_t seed);

}  // namespace openqa::pipeline
