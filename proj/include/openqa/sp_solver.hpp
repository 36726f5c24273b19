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

#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "openqa/answer.hpp"
#include "openqa/dictionary.hpp"
#include "openqa/kb.hpp"

namespace openqa::sp {

inline constexpr double kDictionaryConfidence = 1.0;
inline constexpr double kTemplateSubjectConfidence = 0.8;
inline constexpr double kDefaultTemplateConfidence = 0.9;

// Regular-expression question template. Patterns are matched (search, not
// full match) against the normalized question.
class QuestionTemplate {
 public:
  // Throws InvalidTemplate if the pattern does not compile, has fewer
  // capture groups than `subject_group`, or confidence is outside (0,1].
  QuestionTemplate(std::string pattern, std::string predicate,
                   std::optional<std::size_t> subject_group = std::nullopt,
                   double confidence = kDefaultTemplateConfidence);

  const std::string& pattern() const noexcept { return pattern_; }
  const std::string& predicate() const noexcept { return predicate_; }
  std::optional<std::size_t> subject_group() const noexcept { return subject_group_; }
  double confidence() const noexcept { return confidence_; }
  const std::regex& regex() const noexcept { return regex_; }

 private:
  std::string pattern_;
  std::string predicate_;
  std::optional<std::size_t> subject_group_;
  double confidence_;
  std::regex regex_;
};

// JSON Lines: {"pattern", "predicate", "subject_group" (int|null),
// "confidence" (optional)}. Blank lines are skipped.
std::vector<QuestionTemplate> load_templates(const std::string& path);
std::vector<QuestionTemplate> parse_templates(const std::string& jsonl);

enum class SubjectSource { kDictionary, kTemplate };

struct SubjectCandidate {
  std::string surface;
  std::string entity;
  double confidence = 0.0;
  SubjectSource source = SubjectSource::kDictionary;
};

struct PredicateCandidate {
  std::string predicate;
  double confidence = 0.0;
  std::size_t template_id = 0;
};

struct GeneratedQuery {
  std::string sparql;
  double confidence = 0.0;
};

std::vector<SubjectCandidate> recognize_subjects(
    const std::string& question, const EntityDictionary& dict,
    const std::vector<QuestionTemplate>& templates);

// Dictionary-source candidates only.
std::vector<SubjectCandidate> dictionary_subjects(const std::string& question,
                                                  const EntityDictionary& dict);

std::vector<PredicateCandidate> recognize_predicates(
    const std::string& question, const std::vector<QuestionTemplate>& templates);

// Subjects-major cross product; confidence is the product of both sides.
std::vector<GeneratedQuery> generate_queries(
    const std::vector<SubjectCandidate>& subjects,
    const std::vector<PredicateCandidate>& predicates);

// Each query's k bindings receive confidence/k. Provenance is the query text.
std::vector<AnswerCandidate> solve_sp(const std::string& question,
                                      const kb::KnowledgeBase& kb,
                                      const EntityDictionary& dict,
                                      const std::vector<QuestionTemplate>& templates);

// Max-confidence dedup by answer, then confidence desc, answer asc.
std::vector<AnswerCandidate> merge_answers(std::vector<AnswerCandidate> answers);

}  // namespace openqa::sp
