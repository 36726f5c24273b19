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
#include <string>
#include <vector>

#include "openqa/answer.hpp"
#include "openqa/nn/params.hpp"
#include "openqa/nn/training.hpp"
#include "openqa/text.hpp"

namespace openqa::selector {

inline constexpr std::size_t kMaxLen = 64;

struct SelectorModel {
  nn::ModelParameters params;
  text::Vocabulary vocab;
};

struct SelectionResult {
  std::vector<double> probabilities;
  std::size_t chosen = 0;
  AnswerCandidate answer;
};

struct SelectorExample {
  std::string question;
  std::vector<std::string> candidates;
  std::size_t gold = 0;
};

// Token embeddings, learned positions up to options.max_len, options.layers
// encoder layers of options.heads heads, and a [1, d] scoring head.
nn::ModelParameters init_selector(std::size_t vocab_size, const nn::TrainOptions& options);

// Throws ShapeMismatch for inconsistent or missing tensors.
void validate_selector(const SelectorModel& model);

// [CLS] question [SEP] answer [SEP], cut to max_len by dropping question
// tail tokens first and answer tail tokens after that. Throws EmptyInput.
std::vector<text::TokenId> build_sequence(const std::string& question, const std::string& answer,
                                          const text::Vocabulary& vocab,
                                          std::size_t max_len = kMaxLen);

// Scalar score from the [CLS] position. Throws SequenceTooLong / EmptyInput.
double score_sequence(const SelectorModel& model, const std::vector<text::TokenId>& ids);

// d score / d params.
nn::Gradients score_gradients(const SelectorModel& model, const std::vector<text::TokenId>& ids);

// Each candidate is scored on its own; probabilities are the softmax of the
// scores. Throws NoCandidates.
SelectionResult select(const SelectorModel& model, const std::string& question,
                       const std::vector<AnswerCandidate>& candidates);

// Softmax of scores with the lowest index winning ties.
SelectionResult select_from_scores(const std::vector<double>& scores,
                                   const std::vector<AnswerCandidate>& candidates);

// {"question": str, "candidates": [str], "gold": int}
std::vector<SelectorExample> parse_selector_data(const std::string& jsonl);
std::vector<SelectorExample> load_selector_data(const std::string& path);

// Cross-entropy of the gold candidate. Throws EmptyDataset,
// GoldOutOfRange(index) and TooFewCandidates(index).
nn::TrainResult train_selector(const std::vector<SelectorExample>& data,
                               const text::Vocabulary& vocab, const nn::TrainOptions& options);

}  // namespace openqa::selector
