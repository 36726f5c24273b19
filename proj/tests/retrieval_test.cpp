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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "openqa/error.hpp"
#include "openqa/nn/tensor.hpp"
#include "openqa/retrieval.hpp"

namespace openqa::retrieval {
namespace {

IndexedDocument make_doc(std::size_t id, std::string value, std::vector<std::string> subjects = {}) {
  return {id, std::move(subjects), std::move(value), DocKind::kPassage, "p" + std::to_string(id)};
}

oracle::Bm25Doc to_oracle(const IndexedDocument& d) {
  // Oracle tokenization: every test corpus is lowercase words separated by single spaces.
  oracle::Bm25Doc out{d.doc_id, {}, {}};
  std::istringstream in(d.value_field);
  for (std::string w; in >> w;) out.value_terms.push_back(w);
  for (const auto& s : d.subject_field) {
    std::istringstream sin(s);
    for (std::string w; sin >> w;) out.subject_terms.insert(w);
  }
  return out;
}

std::vector<IndexedDocument> random_corpus(std::uint64_t seed, std::size_t n) {
  static const std::vector<std::string> words{"alpha", "beta", "gamma", "delta",
                                              "eps", "zeta", "eta", "theta"};
  nn::Rng rng(seed);
  std::vector<IndexedDocument> docs;
  for (std::size_t i = 0; i < n; ++i) {
    std::string value;
    std::size_t len = 2 + rng.below(9);
    for (std::size_t k = 0; k < len; ++k) value += (k ? " " : "") + words[rng.below(words.size())];
    std::vector<std::string> subjects;
    if (rng.below(2)) subjects.push_back(words[rng.below(words.size())]);
    docs.push_back(make_doc(i * 3 + 1, value, subjects));
  }
  return docs;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

TEST(SpliceTriple, Format) {
  auto d = splice_triple({"hamlet", "author", "shakespeare"}, 4);
  EXPECT_EQ(d.value_field, "hamlet author shakespeare");
  EXPECT_EQ(d.subject_field, std::vector<std::string>{"hamlet"});
  EXPECT_EQ(d.kind, DocKind::kTriple);
  EXPECT_EQ(d.doc_id, 4u);
  auto verbatim = splice_triple({"New York", "population", "8000000"}, 0);
  EXPECT_EQ(verbatim.subject_field, std::vector<std::string>{"New York"});
  auto parts = split(d.value_field);
  EXPECT_EQ(parts, (std::vector<std::string>{"hamlet", "author", "shakespeare"}));
}

TEST(TagPassage, Examples) {
  EntityDictionary dict({{"new york", "New York"}, {"york", "York"}, {"paris", "Paris"}}, 2);
  auto d = tag_passage(0, "p", "She moved to New York last year.", dict);
  EXPECT_EQ(d.subject_field, std::vector<std::string>{"New York"});
  EXPECT_EQ(d.kind, DocKind::kPassage);

  // Same answer as forward maximum matching over the words.
  auto words = split("she moved to new york last year");
  std::set<std::string> entries{"new york", "york", "paris"};
  auto pieces = oracle::max_match(words, entries, 2);
  std::vector<std::string> hits;
  for (const auto& p : pieces) if (entries.count(p)) hits.push_back(p);
  EXPECT_EQ(hits, std::vector<std::string>{"new york"});

  EXPECT_TRUE(tag_passage(1, "q", "nothing to see here", dict).subject_field.empty());
  auto twice = tag_passage(2, "r", "Paris, york and paris again", dict);
  EXPECT_EQ(twice.subject_field, (std::vector<std::string>{"Paris", "York"}));
  EXPECT_THROW(tag_passage(3, "s", "  \n", dict), EmptyPassage);
}

TEST(BuildIndex, Examples) {
  auto empty = build_index({});
  EXPECT_EQ(empty.doc_count, 0u);
  EXPECT_TRUE(empty.postings.empty());

  auto one = build_index({make_doc(7, "a b a")});
  EXPECT_EQ(one.postings.at("a"), (std::vector<Posting>{{7, 2}}));
  EXPECT_EQ(one.postings.at("b"), (std::vector<Posting>{{7, 1}}));
  EXPECT_EQ(one.doc_lengths.at(7), 3u);

  auto two = build_index({make_doc(0, "a b"), make_doc(1, "c d e f", {"Cee"})});
  EXPECT_DOUBLE_EQ(two.avg_doc_length, 3.0);
  EXPECT_EQ(two.subject_terms.at("cee"), std::set<std::size_t>{1});

  EXPECT_THROW(build_index({make_doc(1, "a"), make_doc(1, "b")}), DuplicateDocId);
}

TEST(BuildIndex, InvariantsAndOrderIndependence) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto docs = random_corpus(seed, 12);
    auto idx = build_index(docs);
    EXPECT_EQ(idx.doc_count, docs.size());
    double total = 0;
    for (const auto& [id, len] : idx.doc_lengths) total += static_cast<double>(len);
    EXPECT_NEAR(idx.avg_doc_length, total / static_cast<double>(docs.size()), 1e-9);
    for (const auto& [term, list] : idx.postings) {
      EXPECT_TRUE(std::is_sorted(list.begin(), list.end(),
                                 [](auto& a, auto& b) { return a.doc_id < b.doc_id; }));
      for (const auto& p : list) EXPECT_GE(p.tf, 1u);
    }
    auto shuffled = docs;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + 5, shuffled.end());
    EXPECT_EQ(build_index(shuffled), idx);
  }
}

TEST(Bm25, Examples) {
  auto idx = build_index({make_doc(0, "x y z")});
  EXPECT_EQ(bm25_score(idx, {"q"}, 0), 0.0);
  auto doc = make_doc(0, "x y z");
  EXPECT_NEAR(bm25_score(idx, {"x", "y"}, 0), oracle::bm25({to_oracle(doc)}, {"x", "y"}, to_oracle(doc)),
              1e-12);
  EXPECT_THROW(bm25_score(idx, {"x"}, 5), UnknownDoc);
}

TEST(Bm25, SubjectBoostDoublesOneTerm) {
  auto plain = build_index({make_doc(0, "hamlet author shakespeare"), make_doc(1, "other text")});
  auto boosted = build_index({make_doc(0, "hamlet author shakespeare", {"hamlet"}),
                              make_doc(1, "other text")});
  EXPECT_NEAR(bm25_score(boosted, {"hamlet"}, 0), 2.0 * bm25_score(plain, {"hamlet"}, 0), 1e-12);
  const double gain = bm25_score(boosted, {"hamlet", "author"}, 0) -
                      bm25_score(plain, {"hamlet", "author"}, 0);
  EXPECT_NEAR(gain, bm25_score(plain, {"hamlet"}, 0), 1e-12);
}

TEST(Search, Examples) {
  auto idx = build_index({make_doc(0, "a b"), make_doc(1, "a b c"), make_doc(2, "c d")});
  EXPECT_TRUE(search(idx, "").empty());
  EXPECT_TRUE(search(idx, "?!").empty());
  auto r = search(idx, "a b c");
  ASSERT_FALSE(r.empty());
  EXPECT_EQ(r[0].doc->doc_id, 1u);
  EXPECT_EQ(search(idx, "zzz").size(), 0u);
  EXPECT_EQ(search(idx, "d", 10).size(), 1u);
}

TEST(Search, MatchesExhaustiveOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto docs = random_corpus(seed, 10);
    auto idx = build_index(docs);
    std::vector<oracle::Bm25Doc> corpus;
    for (const auto& d : docs) corpus.push_back(to_oracle(d));
    const std::vector<std::string> queries{"alpha", "beta gamma", "zeta eta theta alpha",
                                           "delta delta eps", "unknown alpha"};
    for (const auto& q : queries) {
      auto terms = split(q);
      std::vector<std::pair<double, std::size_t>> brute;
      for (const auto& d : corpus) {
        double s = oracle::bm25(corpus, terms, d);
        if (s > 0) brute.push_back({-s, d.id});
      }
      std::sort(brute.begin(), brute.end());
      for (std::size_t k : {1u, 3u, 10u}) {
        auto got = search(idx, q, k);
        ASSERT_EQ(got.size(), std::min(k, brute.size()));
        for (std::size_t i = 0; i < got.size(); ++i) {
          EXPECT_EQ(got[i].doc->doc_id, brute[i].second);
          EXPECT_NEAR(got[i].score, -brute[i].first, 1e-9);
          EXPECT_GT(got[i].score, 0.0);
        }
      }
      for (std::size_t k = 1; k < 10; ++k) {
        auto shorter = search(idx, q, k);
        auto longer = search(idx, q, k + 1);
        ASSERT_LE(shorter.size(), longer.size());
        for (std::size_t i = 0; i < shorter.size(); ++i) EXPECT_EQ(shorter[i].doc, longer[i].doc);
      }
    }
  }
}

TEST(Search, InsertionKeepsOracleAgreement) {
  auto docs = random_corpus(99, 8);
  auto before = build_index(docs);
  docs.push_back(make_doc(1000, "alpha alpha beta", {"alpha"}));
  auto after = build_index(docs);
  std::vector<oracle::Bm25Doc> corpus;
  for (const auto& d : docs) corpus.push_back(to_oracle(d));
  for (const auto& d : corpus) {
    EXPECT_NEAR(bm25_score(after, {"alpha", "gamma"}, d.id),
                oracle::bm25(corpus, {"alpha", "gamma"}, d), 1e-9);
    if (d.id == 1000) continue;
    // Local term frequencies are untouched by the insertion.
    for (const auto& [term, list] : before.postings)
      for (const auto& p : list)
        if (p.doc_id == d.id) {
          const auto& now = after.postings.at(term);
          auto it = std::find_if(now.begin(), now.end(), [&](auto& x) { return x.doc_id == d.id; });
          ASSERT_NE(it, now.end());
          EXPECT_EQ(it->tf, p.tf);
        }
  }
}

TEST(Persistence, RoundTrip) {
  auto docs = random_corpus(5, 10);
  docs.push_back(splice_triple({"New York", "mayor", "someone"}, 500));
  auto idx = build_index(docs);
  auto path = (std::filesystem::temp_directory_path() / "openqa_index_test.json").string();
  save_index(idx, path);
  auto loaded = load_index(path);
  EXPECT_EQ(loaded, idx);
  EXPECT_EQ(loaded.avg_doc_length, idx.avg_doc_length);
  {
    std::ofstream out(path);
    out << "{\"format\": 2}";
  }
  EXPECT_THROW(load_index(path), ConfigError);
  EXPECT_THROW(load_index("/nonexistent/index.json"), IoError);
}

TEST(Passages, JsonLines) {
  auto ps = parse_passages("{\"id\": \"p1\", \"text\": \"Hello there.\"}\n\n{\"id\": \"p2\", \"text\": \"x\"}\n");
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps[1].id, "p2");
  try {
    parse_passages("{\"id\": \"p1\"}\n");
    FAIL();
  } catch (const MalformedLine& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Corpus, TriplesThenPassages) {
  auto kb = kb::parse_triples("hamlet\tauthor\tshakespeare\nmacbeth\tauthor\tshakespeare\n");
  auto dict = kb::build_entity_dictionary(kb);
  auto docs = build_corpus(kb, {{"p1", "Hamlet is long."}}, dict);
  ASSERT_EQ(docs.size(), 3u);
  EXPECT_EQ(docs[0].kind, DocKind::kTriple);
  EXPECT_EQ(docs[2].doc_id, 2u);
  EXPECT_EQ(docs[2].subject_field, std::vector<std::string>{"hamlet"});
  EXPECT_EQ(docs[2].origin, "p1");
}

}  // namespace
}  // namespace openqa::retrieval
