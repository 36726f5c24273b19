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
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "openqa/dictionary.hpp"
#include "openqa/kb.hpp"

namespace openqa::retrieval {

enum class DocKind { kTriple, kPassage };

struct IndexedDocument {
  std::size_t doc_id = 0;
  std::vector<std::string> subject_field;
  std::string value_field;
  DocKind kind = DocKind::kPassage;
  // Passage id, or the tab-joined triple.
  std::string origin;

  friend bool operator==(const IndexedDocument&, const IndexedDocument&) = default;
};

struct Posting {
  std::size_t doc_id = 0;
  std::size_t tf = 0;
  friend bool operator==(const Posting&, const Posting&) = default;
};

// Built once by build_index and never mutated afterwards, so any number of
// threads may search it concurrently.
struct InvertedIndex {
  std::map<std::size_t, IndexedDocument> documents;
  std::map<std::string, std::vector<Posting>> postings;
  std::map<std::size_t, std::size_t> doc_lengths;
  std::map<std::string, std::set<std::size_t>> subject_terms;
  double avg_doc_length = 0.0;
  std::size_t doc_count = 0;

  friend bool operator==(const InvertedIndex&, const InvertedIndex&) = default;
};

struct RetrievalResult {
  const IndexedDocument* doc = nullptr;
  double score = 0.0;
};

struct Passage {
  std::string id;
  std::string text;
};

inline constexpr double kK1 = 1.2;
inline constexpr double kB = 0.75;
inline constexpr double kSubjectBoost = 2.0;
inline constexpr std::size_t kDefaultTopK = 10;

// value "s p o", subject [s]. The split back into fields is only unambiguous
// when none of the three contains a space.
IndexedDocument splice_triple(const kb::Triple& triple, std::size_t doc_id);

// Entities found by dictionary-augmented tokenization, first occurrence
// order. Throws EmptyPassage on blank text.
IndexedDocument tag_passage(std::size_t doc_id, const std::string& passage_id,
                            const std::string& text, const EntityDictionary& dict);

// Triples take ids 0..n-1 in KB order; passages follow in file order.
std::vector<IndexedDocument> build_corpus(const kb::KnowledgeBase& kb,
                                          const std::vector<Passage>& passages,
                                          const EntityDictionary& dict);

// Throws DuplicateDocId.
InvertedIndex build_index(const std::vector<IndexedDocument>& docs);

// Query terms are tokenized like value fields.
std::vector<std::string> query_terms(const std::string& query);

// Throws UnknownDoc.
double bm25_score(const InvertedIndex& idx, const std::vector<std::string>& terms,
                  std::size_t doc_id);

// Score desc, doc_id asc. Results point into `idx`.
std::vector<RetrievalResult> search(const InvertedIndex& idx, const std::string& query,
                                    std::size_t k = kDefaultTopK);

// JSON Lines {"id": str, "text": str}.
std::vector<Passage> load_passages(const std::string& path);
std::vector<Passage> parse_passages(const std::string& jsonl);

void save_index(const InvertedIndex& idx, const std::string& path);
InvertedIndex load_index(const std::string& path);

}  // namespace openqa::retrieval
