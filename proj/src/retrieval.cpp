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

#include "openqa/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "jsonl.hpp"
#include "openqa/error.hpp"
#include "openqa/text.hpp"

namespace openqa::retrieval {

using nlohmann::json;

IndexedDocument splice_triple(const kb::Triple& t, std::size_t doc_id) {
  return {doc_id, {t.subject}, t.subject + " " + t.predicate + " " + t.object, DocKind::kTriple,
          t.subject + "\t" + t.predicate + "\t" + t.object};
}

IndexedDocument tag_passage(std::size_t doc_id, const std::string& passage_id,
                            const std::string& text, const EntityDictionary& dict) {
  if (text::normalize(text).empty()) throw EmptyPassage("passage '" + passage_id + "' is empty");
  IndexedDocument doc{doc_id, {}, text, DocKind::kPassage, passage_id};
  for (const auto& token : text::tokenize(text, &dict).tokens) {
    const auto* entity = dict.find(token);
    if (entity && std::find(doc.subject_field.begin(), doc.subject_field.end(), *entity) ==
                      doc.subject_field.end())
      doc.subject_field.push_back(*entity);
  }
  return doc;
}

std::vector<IndexedDocument> build_corpus(const kb::KnowledgeBase& kb,
                                          const std::vector<Passage>& passages,
                                          const EntityDictionary& dict) {
  std::vector<IndexedDocument> docs;
  docs.reserve(kb.size() + passages.size());
  for (const auto& t : kb.triples()) docs.push_back(splice_triple(t, docs.size()));
  for (const auto& p : passages) docs.push_back(tag_passage(docs.size(), p.id, p.text, dict));
  return docs;
}

std::vector<std::string> query_terms(const std::string& query) {
  return text::tokenize(query).tokens;
}

InvertedIndex build_index(const std::vector<IndexedDocument>& docs) {
  InvertedIndex idx;
  std::size_t total = 0;
  for (const auto& doc : docs) {
    if (!idx.documents.emplace(doc.doc_id, doc).second)
      throw DuplicateDocId("doc id " + std::to_string(doc.doc_id) + " appears twice");
  }
  // Walk in id order so posting lists come out sorted.
  for (const auto& [id, doc] : idx.documents) {
    auto terms = query_terms(doc.value_field);
    idx.doc_lengths[id] = terms.size();
    total += terms.size();
    std::map<std::string, std::size_t> counts;
    for (const auto& t : terms) ++counts[t];
    for (const auto& [term, tf] : counts) idx.postings[term].push_back({id, tf});
    for (const auto& subject : doc.subject_field)
      for (const auto& t : query_terms(subject)) idx.subject_terms[t].insert(id);
  }
  idx.doc_count = docs.size();
  idx.avg_doc_length =
      docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
  return idx;
}

namespace {

std::size_t term_frequency(const std::vector<Posting>& list, std::size_t doc_id) {
  auto it = std::lower_bound(list.begin(), list.end(), doc_id,
                             [](const Posting& p, std::size_t id) { return p.doc_id < id; });
  return it != list.end() && it->doc_id == doc_id ? it->tf : 0;
}

}  // namespace

double bm25_score(const InvertedIndex& idx, const std::vector<std::string>& terms,
                  std::size_t doc_id) {
  auto len_it = idx.doc_lengths.find(doc_id);
  if (len_it == idx.doc_lengths.end())
    throw UnknownDoc("doc id " + std::to_string(doc_id) + " is not indexed");
  const double n = static_cast<double>(idx.doc_count);
  const double len = static_cast<double>(len_it->second);
  const std::set<std::string> distinct(terms.begin(), terms.end());
  double score = 0.0;
  for (const auto& term : distinct) {
    auto p = idx.postings.find(term);
    if (p == idx.postings.end()) continue;
    const double tf = static_cast<double>(term_frequency(p->second, doc_id));
    if (tf == 0) continue;
    const double df = static_cast<double>(p->second.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    double part = idf * tf * (kK1 + 1.0) /
                  (tf + kK1 * (1.0 - kB + kB * len / idx.avg_doc_length));
    auto s = idx.subject_terms.find(term);
    if (s != idx.subject_terms.end() && s->second.count(doc_id)) part *= kSubjectBoost;
    score += part;
  }
  return score;
}

std::vector<RetrievalResult> search(const InvertedIndex& idx, const std::string& query,
                                    std::size_t k) {
  const auto terms = query_terms(query);
  std::set<std::size_t> matching;
  for (const auto& term : terms) {
    auto p = idx.postings.find(term);
    if (p == idx.postings.end()) continue;
    for (const auto& posting : p->second) matching.insert(posting.doc_id);
  }
  std::vector<RetrievalResult> results;
  for (std::size_t id : matching) {
    double s = bm25_score(idx, terms, id);
    if (s > 0.0) results.push_back({&idx.documents.at(id), s});
  }
  auto order = [](const RetrievalResult& a, const RetrievalResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc->doc_id < b.doc->doc_id;
  };
  const std::size_t keep = std::min(k, results.size());
  std::partial_sort(results.begin(), results.begin() + static_cast<std::ptrdiff_t>(keep),
                    results.end(), order);
  results.resize(keep);
  return results;
}

std::vector<Passage> parse_passages(const std::string& jsonl) {
  return detail::parse_jsonl<Passage>(jsonl, [](const json& j) {
    return Passage{j.at("id").get<std::string>(), j.at("text").get<std::string>()};
  });
}

std::vector<Passage> load_passages(const std::string& path) {
  return parse_passages(detail::read_file(path));
}

namespace {

const char* kind_name(DocKind kind) { return kind == DocKind::kTriple ? "triple" : "passage"; }

DocKind parse_kind(const std::string& name) {
  if (name == "triple") return DocKind::kTriple;
  if (name == "passage") return DocKind::kPassage;
  throw ConfigError("unknown document kind '" + name + "'");
}

}  // namespace

void save_index(const InvertedIndex& idx, const std::string& path) {
  json docs = json::array();
  for (const auto& [id, d] : idx.documents)
    docs.push_back({{"doc_id", id}, {"subject_field", d.subject_field},
                    {"value_field", d.value_field}, {"kind", kind_name(d.kind)},
                    {"origin", d.origin}});
  json postings = json::object();
  for (const auto& [term, list] : idx.postings) {
    json entries = json::array();
    for (const auto& p : list) entries.push_back({p.doc_id, p.tf});
    postings[term] = std::move(entries);
  }
  json lengths = json::array();
  for (const auto& [id, len] : idx.doc_lengths) lengths.push_back({id, len});
  json subjects = json::object();
  for (const auto& [term, ids] : idx.subject_terms) subjects[term] = ids;
  json doc = {{"format", 1},
              {"documents", std::move(docs)},
              {"postings", std::move(postings)},
              {"doc_lengths", std::move(lengths)},
              {"subject_terms", std::move(subjects)},
              {"avg_doc_length", idx.avg_doc_length},
              {"doc_count", idx.doc_count}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump();
  if (!out) throw IoError("failed writing " + path);
}

InvertedIndex load_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  InvertedIndex idx;
  try {
    json doc = json::parse(in);
    if (doc.at("format").get<int>() != 1) throw ConfigError(path + ": unsupported index format");
    for (const auto& d : doc.at("documents")) {
      IndexedDocument entry{d.at("doc_id").get<std::size_t>(),
                            d.at("subject_field").get<std::vector<std::string>>(),
                            d.at("value_field").get<std::string>(),
                            parse_kind(d.at("kind").get<std::string>()),
                            d.at("origin").get<std::string>()};
      idx.documents.emplace(entry.doc_id, std::move(entry));
    }
    for (const auto& [term, list] : doc.at("postings").items())
      for (const auto& p : list)
        idx.postings[term].push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()});
    for (const auto& p : doc.at("doc_lengths"))
      idx.doc_lengths[p.at(0).get<std::size_t>()] = p.at(1).get<std::size_t>();
    for (const auto& [term, ids] : doc.at("subject_terms").items())
      idx.subject_terms[term] = ids.get<std::set<std::size_t>>();
    idx.avg_doc_length = doc.at("avg_doc_length").get<double>();
    idx.doc_count = doc.at("doc_count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return idx;
}

}  // namespace openqa::retrieval
