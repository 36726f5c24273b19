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

#include "openqa/sp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "jsonl.hpp"
#include "openqa/error.hpp"
#include "openqa/text.hpp"

namespace openqa {

const char* solver_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::kSp: return "sp";
    case SolverKind::kLd: return "ld";
    case SolverKind::kRr: return "rr";
  }
  return "?";
}

namespace sp {

QuestionTemplate::QuestionTemplate(std::string pattern, std::string predicate,
                                   std::optional<std::size_t> subject_group,
                                   double confidence)
    : pattern_(std::move(pattern)),
      predicate_(std::move(predicate)),
      subject_group_(subject_group),
      confidence_(confidence) {
  if (predicate_.empty()) throw InvalidTemplate("empty predicate");
  if (!(confidence_ > 0.0 && confidence_ <= 1.0))
    throw InvalidTemplate("confidence must lie in (0,1]");
  try {
    regex_ = std::regex(pattern_, std::regex::ECMAScript | std::regex::optimize);
  } catch (const std::regex_error& e) {
    throw InvalidTemplate("pattern '" + pattern_ + "': " + e.what());
  }
  if (subject_group_ && (*subject_group_ == 0 || *subject_group_ > regex_.mark_count()))
    throw InvalidTemplate("pattern '" + pattern_ + "' has no capture group " +
                          std::to_string(*subject_group_));
}

std::vector<QuestionTemplate> parse_templates(const std::string& jsonl) {
  return detail::parse_jsonl<QuestionTemplate>(jsonl, [](const nlohmann::json& j) {
    std::optional<std::size_t> group;
    if (j.contains("subject_group") && !j["subject_group"].is_null())
      group = j["subject_group"].get<std::size_t>();
    return QuestionTemplate(j.at("pattern").get<std::string>(),
                            j.at("predicate").get<std::string>(), group,
                            j.value("confidence", kDefaultTemplateConfidence));
  });
}

std::vector<QuestionTemplate> load_templates(const std::string& path) {
  return parse_templates(detail::read_file(path));
}

namespace {

std::vector<SubjectCandidate> sort_subjects(std::vector<SubjectCandidate> all) {
  std::map<std::string, SubjectCandidate> best;
  for (auto& c : all) {
    auto [it, inserted] = best.try_emplace(c.entity, c);
    if (!inserted && c.confidence > it->second.confidence) it->second = std::move(c);
  }
  std::vector<SubjectCandidate> out;
  for (auto& [_, c] : best) out.push_back(std::move(c));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.entity < b.entity;
  });
  return out;
}

}  // namespace

std::vector<SubjectCandidate> dictionary_subjects(const std::string& question,
                                                  const EntityDictionary& dict) {
  std::vector<SubjectCandidate> found;
  auto tokens = text::tokenize(question, &dict);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (const auto* entity = dict.find(tokens.tokens[i])) {
      auto span = tokens.spans[i];
      found.push_back({question.substr(span.begin, span.end - span.begin), *entity,
                       kDictionaryConfidence, SubjectSource::kDictionary});
    }
  }
  return sort_subjects(std::move(found));
}

std::vector<SubjectCandidate> recognize_subjects(
    const std::string& question, const EntityDictionary& dict,
    const std::vector<QuestionTemplate>& templates) {
  auto found = dictionary_subjects(question, dict);
  const std::string normalized = text::normalize(question);
  for (const auto& t : templates) {
    if (!t.subject_group()) continue;
    std::smatch m;
    if (!std::regex_search(normalized, m, t.regex())) continue;
    if (!m[*t.subject_group()].matched) continue;
    std::string surface = m[*t.subject_group()].str();
    if (const auto* entity = dict.find(text::normalize(surface)))
      found.push_back({surface, *entity, kTemplateSubjectConfidence, SubjectSource::kTemplate});
  }
  return sort_subjects(std::move(found));
}

std::vector<PredicateCandidate> recognize_predicates(
    const std::string& question, const std::vector<QuestionTemplate>& templates) {
  const std::string normalized = text::normalize(question);
  std::vector<PredicateCandidate> out;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto& t = templates[i];
    if (!std::regex_search(normalized, t.regex())) continue;
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const auto& c) { return c.predicate == t.predicate(); });
    if (it == out.end()) {
      out.push_back({t.predicate(), t.confidence(), i});
    } else if (t.confidence() > it->confidence) {
      it->confidence = t.confidence();
      it->template_id = i;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.predicate < b.predicate;
  });
  return out;
}

std::vector<GeneratedQuery> generate_queries(
    const std::vector<SubjectCandidate>& subjects,
    const std::vector<PredicateCandidate>& predicates) {
  std::vector<GeneratedQuery> out;
  out.reserve(subjects.size() * predicates.size());
  for (const auto& s : subjects)
    for (const auto& p : predicates)
      out.push_back({kb::generate_sparql(s.entity, p.predicate), s.confidence * p.confidence});
  return out;
}

std::vector<AnswerCandidate> merge_answers(std::vector<AnswerCandidate> answers) {
  std::map<std::string, AnswerCandidate> best;
  for (auto& a : answers) {
    auto [it, inserted] = best.try_emplace(a.answer, a);
    if (!inserted && a.confidence > it->second.confidence) it->second = std::move(a);
  }
  std::vector<AnswerCandidate> out;
  for (auto& [_, a] : best) out.push_back(std::move(a));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.confidence > b.confidence;
  });
  return out;
}

std::vector<AnswerCandidate> solve_sp(const std::string& question,
                                      const kb::KnowledgeBase& kb,
                                      const EntityDictionary& dict,
                                      const std::vector<QuestionTemplate>& templates) {
  auto subjects = recognize_subjects(question, dict, templates);
  if (subjects.empty()) return {};
  auto predicates = recognize_predicates(question, templates);
  std::vector<AnswerCandidate> answers;
  for (const auto& q : generate_queries(subjects, predicates)) {
    std::vector<std::string> bindings;
    try {
      bindings = kb::execute_sparql(kb, kb::parse_sparql(q.sparql));
    } catch (const Error&) {
      continue;
    }
    if (bindings.empty()) continue;
    const double share = q.confidence / static_cast<double>(bindings.size());
    for (auto& b : bindings)
      if (!b.empty()) answers.push_back({std::move(b), share, SolverKind::kSp, q.sparql});
  }
  return merge_answers(std::move(answers));
}

}  // namespace sp
}  // namespace openqa
