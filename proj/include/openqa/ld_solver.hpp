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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "openqa/answer.hpp"
#include "openqa/dictionary.hpp"
#include "openqa/kb.hpp"
#include "openqa/nn/params.hpp"
#include "openqa/nn/training.hpp"
#include "openqa/text.hpp"

namespace openqa::ld {

// Enumerator order doubles as the argmax tie-break: B beats I beats O.
enum class Tag : std::uint8_t { kB = 0, kI = 1, kO = 2 };
inline constexpr std::size_t kTagCount = 3;
using TagSequence = std::vector<Tag>;

Tag parse_tag(std::string_view name);
const char* tag_name(Tag tag);

struct EntityCandidate {
  std::string entity;
  std::size_t distance = 0;
  std::string mention;
};

struct RelationScore {
  std::string relation;
  double cnn_score = 0.0;
  double gru_score = 0.0;
  double combined = 0.0;
};

inline constexpr std::size_t kDefaultMaxDistance = 2;
inline constexpr double kHingeMargin = 0.2;
inline constexpr std::size_t kMaxNegatives = 5;

// Tagger -----------------------------------------------------------------------

// Embeddings -> BiLSTM -> linear over {B, I, O}.
nn::ModelParameters init_tagger(std::size_t vocab_size, const nn::TrainOptions& options);

// Throws EmptyQuestion when the question has no tokens. The result is BIO
// repaired.
TagSequence tag_entities(const nn::ModelParameters& tagger, const text::Vocabulary& vocab,
                         const std::string& question);

// An I at the start or after an O becomes a B.
TagSequence repair_bio(TagSequence tags);

// Token range [first, second) of the longest entity (a B followed by I's);
// the earliest wins ties.
std::optional<std::pair<std::size_t, std::size_t>> mention_range(const TagSequence& tags);

// Tokens of mention_range joined by single spaces; "" when all O.
std::string extract_mention(const TagSequence& tags, const text::TokenSequence& tokens);

// Sorted by distance asc, entity length desc, entity asc.
std::vector<EntityCandidate> link_entity(const std::string& mention,
                                         const EntityDictionary& dict,
                                         std::size_t max_distance = kDefaultMaxDistance);

// Question tokens with [begin, end) replaced by the placeholder token.
std::vector<std::string> question_pattern(const std::vector<std::string>& tokens,
                                          std::size_t begin, std::size_t end);

// Relation scorer --------------------------------------------------------------

// Siamese encoder shared by patterns and relation names: embeddings feed an
// attention-pooled conv1d+tanh branch and an attention-pooled BiGRU branch.
nn::ModelParameters init_scorer(std::size_t vocab_size, const nn::TrainOptions& options);

// Throws EmptyPattern / EmptyRelation.
RelationScore score_relation(const nn::ModelParameters& scorer, const text::Vocabulary& vocab,
                             const std::vector<std::string>& pattern,
                             const std::string& relation);

// Best combined score, smallest relation on ties. Throws NoCandidates.
RelationScore detect_relation(const nn::ModelParameters& scorer, const text::Vocabulary& vocab,
                              const std::vector<std::string>& pattern,
                              const std::vector<std::string>& candidates);

// Gradient of `combined` for (pattern, relation), for verification.
nn::Gradients score_gradients(const nn::ModelParameters& scorer, const text::Vocabulary& vocab,
                              const std::vector<std::string>& pattern,
                              const std::string& relation);

// Solver -----------------------------------------------------------------------

std::vector<AnswerCandidate> solve_ld(const std::string& question, const kb::KnowledgeBase& kb,
                                      const EntityDictionary& dict,
                                      const nn::ModelParameters& tagger,
                                      const nn::ModelParameters& scorer,
                                      const text::Vocabulary& vocab);

// Training ---------------------------------------------------------------------

struct TaggerExample {
  std::string question;
  TagSequence tags;
};

struct ScorerExample {
  std::vector<std::string> pattern;
  std::string gold;
  std::vector<std::string> negatives;
};

// {"question": str, "tags": ["O", "B", ...]}
std::vector<TaggerExample> parse_tagger_data(const std::string& jsonl);
std::vector<TaggerExample> load_tagger_data(const std::string& path);
// {"pattern": [str], "gold": str, "negatives": [str]}
std::vector<ScorerExample> parse_scorer_data(const std::string& jsonl);
std::vector<ScorerExample> load_scorer_data(const std::string& path);

// Per-token cross-entropy, one SGD step per example. Throws EmptyDataset and
// MisalignedExample.
nn::TrainResult train_tagger(const std::vector<TaggerExample>& data,
                             const text::Vocabulary& vocab, const nn::TrainOptions& options);

// Sum over negatives of max(0, margin - combined(gold) + combined(neg)).
double hinge_loss(const nn::ModelParameters& scorer, const text::Vocabulary& vocab,
                  const ScorerExample& example);

// Throws EmptyDataset and NoNegatives.
nn::TrainResult train_relation_scorer(const std::vector<ScorerExample>& data,
                                      const text::Vocabulary& vocab,
                                      const nn::TrainOptions& options);

// Up to `limit` distinct predicates other than `gold`, drawn uniformly from
// the entity's own predicates, or from all predicates if it has no others.
std::vector<std::string> sample_negatives(const kb::KnowledgeBase& kb, const std::string& entity,
                                          const std::string& gold, nn::Rng& rng,
                                          std::size_t limit = kMaxNegatives);

}  // namespace openqa::ld
