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
#include <utility>
#include <vector>

#include "openqa/answer.hpp"
#include "openqa/nn/params.hpp"
#include "openqa/nn/tensor.hpp"
#include "openqa/nn/training.hpp"
#include "openqa/retrieval.hpp"
#include "openqa/text.hpp"

namespace openqa::reader {

inline constexpr std::size_t kMaxSpanLen = 15;
inline constexpr std::size_t kTopPassages = 10;

struct SpanPrediction {
  std::size_t passage_doc_id = 0;
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  double raw_score = 0.0;
  std::string text;
};

struct ReaderModel {
  nn::ModelParameters params;
  text::Vocabulary vocab;
  std::size_t max_span_len = kMaxSpanLen;
};

struct Logits {
  nn::Tensor start;
  nn::Tensor end;
};

struct ReaderExample {
  std::string question;
  std::string passage;
  std::size_t start = 0;
  std::size_t end = 0;
};

nn::ModelParameters init_reader(std::size_t vocab_size, const nn::TrainOptions& options);

// Throws ShapeMismatch unless every tensor the reader needs is present with
// shapes that agree with each other and with the vocabulary.
void validate_reader(const ReaderModel& model);

// Raw (unnormalized) logits, one per passage token. Throws EmptyPassage and
// EmptyQuestion.
Logits predict_logits(const ReaderModel& model, const std::string& question,
                      const std::vector<std::string>& passage_tokens);

// Every span up to max_span_len tokens, by raw score desc, then start, end.
std::vector<SpanPrediction> enumerate_spans(const nn::Tensor& start_logits,
                                            const nn::Tensor& end_logits,
                                            std::size_t max_span_len, std::size_t doc_id,
                                            const std::vector<std::string>& tokens);

// Best span per passage among the first kTopPassages passage-kind results,
// with confidence softmax over their raw scores.
std::vector<AnswerCandidate> read(const ReaderModel& model, const std::string& question,
                                  const std::vector<retrieval::RetrievalResult>& results,
                                  std::size_t top_k_passages = kTopPassages);

// One answer per span with confidence softmax over the raw scores, highest
// first; earlier spans win ties. The top answer is the argmax over the union
// of all passages' spans when given each passage's best span.
std::vector<AnswerCandidate> rank_spans(const std::vector<SpanPrediction>& spans);

// Per-passage best spans in result order (the input to read's softmax).
std::vector<SpanPrediction> best_spans(const ReaderModel& model, const std::string& question,
                                       const std::vector<retrieval::RetrievalResult>& results,
                                       std::size_t top_k_passages = kTopPassages);

// Start + end cross-entropy for one example, with its gradient.
std::pair<double, nn::Gradients> loss_and_gradients(const ReaderModel& model,
                                                    const ReaderExample& example);

// {"question", "passage", "answer_start_token", "answer_end_token"}
std::vector<ReaderExample> parse_reader_data(const std::string& jsonl);
std::vector<ReaderExample> load_reader_data(const std::string& path);

// Throws EmptyDataset and SpanOutOfRange(index).
nn::TrainResult train_reader(const std::vector<ReaderExample>& data,
                             const text::Vocabulary& vocab, const nn::TrainOptions& options);

}  // namespace openqa::reader
