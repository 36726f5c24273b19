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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "openqa/dictionary.hpp"

namespace openqa::kb {

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Immutable triple store with (s,p)->objects and (p,o)->subjects indices.
class KnowledgeBase {
 public:
  using Key = std::pair<std::string, std::string>;
  using Index = std::map<Key, std::vector<std::string>>;

  KnowledgeBase() = default;
  // Validates every triple; duplicates collapse, first occurrence wins.
  explicit KnowledgeBase(std::vector<Triple> triples);

  const std::vector<Triple>& triples() const noexcept { return triples_; }
  std::size_t size() const noexcept { return triples_.size(); }

  // Empty span-like reference when the key is absent.
  const std::vector<std::string>& objects(std::string_view subject,
                                          std::string_view predicate) const;
  const std::vector<std::string>& subjects(std::string_view predicate,
                                           std::string_view object) const;
  // Distinct predicates leaving `subject`, first-insertion order.
  std::vector<std::string> predicates_of(std::string_view subject) const;
  std::vector<std::string> all_predicates() const;

  const Index& by_subject_predicate() const noexcept { return by_subject_predicate_; }
  const Index& by_predicate_object() const noexcept { return by_predicate_object_; }
  const std::set<std::string>& entities() const noexcept { return entities_; }

 private:
  std::vector<Triple> triples_;
  Index by_subject_predicate_;
  Index by_predicate_object_;
  std::set<std::string> entities_;
};

// TSV loader. '#' lines and blank lines are skipped.
KnowledgeBase load_triples(const std::string& path);
KnowledgeBase parse_triples(std::string_view tsv);

// SPARQL subset ---------------------------------------------------------------

enum class Comparator { kEq, kNe, kLt, kGt, kLe, kGe };

std::string_view to_string(Comparator op);
bool is_numeric(Comparator op);

struct ObjectUnknown {
  std::string subject;
  std::string predicate;
  friend bool operator==(const ObjectUnknown&, const ObjectUnknown&) = default;
};

struct SubjectUnknown {
  std::string predicate;
  std::string object;
  friend bool operator==(const SubjectUnknown&, const SubjectUnknown&) = default;
};

struct Filter {
  Comparator op = Comparator::kEq;
  std::string literal;
  friend bool operator==(const Filter&, const Filter&) = default;
};

struct SparqlQuery {
  std::string variable;
  std::variant<ObjectUnknown, SubjectUnknown> pattern;
  std::optional<Filter> filter;

  friend bool operator==(const SparqlQuery&, const SparqlQuery&) = default;
};

/// Grammar (keywords case-insensitive, whitespace free between tokens):
///
///   SELECT ?v WHERE { term <pred> term [.] [FILTER ( ?v op literal )] }
///
/// Exactly one of the two terms is ?v, the other an <iri>. IRIs carry raw
/// strings up to the closing '>'. Literals are bare decimals, "quoted"
/// strings (backslash escapes) or <iri>. Numeric comparators require a
/// decimal literal.
SparqlQuery parse_sparql(std::string_view text);

// Canonical text form; parse_sparql(serialize(q)) == q.
std::string serialize(const SparqlQuery& query);

// Brute-force-equivalent evaluation through the indices. Throws
// FilterTypeError when a numeric comparator meets a non-numeric binding.
std::vector<std::string> execute_sparql(const KnowledgeBase& kb,
                                        const SparqlQuery& query);

// "SELECT ?x WHERE { <subject> <predicate> ?x . }"
std::string generate_sparql(std::string_view subject, std::string_view predicate);

// One entry per entity keyed by its normalized form; on collisions the
// lexicographically smallest canonical string wins.
EntityDictionary build_entity_dictionary(const KnowledgeBase& kb);

}  // namespace openqa::kb
