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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "openqa/error.hpp"
#include "openqa/text.hpp"
#include "oracles.hpp"

namespace openqa::text {
namespace {

EntityDictionary dict_of(std::initializer_list<std::pair<std::string, std::string>> items,
                         std::size_t max_tokens) {
  EntityDictionary::Map map;
  for (const auto& [k, v] : items) map.emplace(k, v);
  return EntityDictionary(std::move(map), max_tokens);
}

std::string random_string(std::mt19937& rng, std::size_t max_len, std::string_view alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(len(rng), ' ');
  for (auto& c : s) c = alphabet[pick(rng)];
  return s;
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize("  New   York? "), "new york");
  EXPECT_EQ(normalize(""), "");
  EXPECT_EQ(normalize("a.b"), "a.b");
  EXPECT_EQ(normalize("Hello, world!?"), "hello, world");
  EXPECT_EQ(normalize("a\t\n b"), "a b");
}

TEST(Normalize, Idempotent) {
  std::mt19937 rng(7);
  for (int i = 0; i < 500; ++i) {
    std::string s = random_string(rng, 12, "aB .?!,;:\t-x");
    EXPECT_EQ(normalize(normalize(s)), normalize(s)) << '"' << s << '"';
  }
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("who wrote hamlet").tokens,
            (std::vector<std::string>{"who", "wrote", "hamlet"}));
  EXPECT_TRUE(tokenize("", nullptr).empty());
  auto dict = dict_of({{"new york", "New York"}}, 2);
  EXPECT_TRUE(tokenize("", &dict).empty());
}

TEST(Tokenize, PunctuationAndConnectors) {
  auto seq = tokenize("Who wrote Hamlet? It's 3.5 well-known.");
  EXPECT_EQ(seq.tokens,
            (std::vector<std::string>{"who", "wrote", "hamlet", "it's", "3.5", "well-known"}));
  ASSERT_EQ(seq.spans.size(), seq.tokens.size());
  EXPECT_EQ(seq.spans[2], (Span{10, 16}));
}

TEST(Tokenize, DictionaryMaxMatchAgreesWithOracle) {
  auto dict = dict_of({{"new york", "New York"}, {"new york city", "New York City"},
                       {"york", "York"}},
                      3);
  std::set<std::string> keys{"new york", "new york city", "york"};
  for (std::string q : {"new york population", "population of new york city today",
                        "york new york", "new new york"}) {
    std::vector<std::string> words = tokenize(q).tokens;
    EXPECT_EQ(tokenize(q, &dict).tokens, oracle::max_match(words, keys, 3)) << q;
  }
  EXPECT_EQ(tokenize("new york population", &dict).tokens,
            (std::vector<std::string>{"new york", "population"}));
}

TEST(Tokenize, DoesNotMergeAcrossPunctuation) {
  auto dict = dict_of({{"new york", "New York"}}, 2);
  EXPECT_EQ(tokenize("new, york", &dict).tokens, (std::vector<std::string>{"new", "york"}));
  EXPECT_EQ(tokenize("New   York?", &dict).tokens, (std::vector<std::string>{"new york"}));
}

TEST(Tokenize, EmptyDictionaryEqualsNoDictionary) {
  EntityDictionary empty;
  std::mt19937 rng(11);
  for (int i = 0; i < 200; ++i) {
    std::string s = random_string(rng, 30, "ab c.,?-'x ");
    auto a = tokenize(s);
    auto b = tokenize(s, &empty);
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_EQ(a.spans, b.spans);
  }
}

TEST(Tokenize, SpanInvariant) {
  auto dict = dict_of({{"ab c", "AB C"}, {"c.d", "C.D"}}, 2);
  std::mt19937 rng(5);
  for (int i = 0; i < 300; ++i) {
    std::string s = random_string(rng, 30, "aAbc .,?d-'\t");
    auto seq = tokenize(s, &dict);
    ASSERT_EQ(seq.tokens.size(), seq.spans.size());
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const auto& sp = seq.spans[k];
      ASSERT_LT(sp.begin, sp.end);
      if (k > 0) ASSERT_LE(seq.spans[k - 1].end, sp.begin);
      EXPECT_EQ(normalize(s.substr(sp.begin, sp.end - sp.begin)), seq.tokens[k]);
    }
  }
}

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("abc", "abc"), 0u);
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(oracle::levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
}

TEST(Levenshtein, SymmetryTriangleAndOracle) {
  std::mt19937 rng(3);
  for (int i = 0; i < 300; ++i) {
    std::string a = random_string(rng, 10, "abc");
    std::string b = random_string(rng, 10, "abc");
    std::string c = random_string(rng, 10, "abc");
    auto ab = levenshtein(a, b);
    EXPECT_EQ(ab, levenshtein(b, a));
    EXPECT_EQ(ab, oracle::levenshtein(a, b));
    EXPECT_LE(levenshtein(a, c), ab + levenshtein(b, c));
  }
}

TEST(RelationTokens, SplitsUnderscores) {
  EXPECT_EQ(relation_tokens("place_of_birth"),
            (std::vector<std::string>{"place", "of", "birth"}));
  EXPECT_EQ(relation_tokens("Author"), (std::vector<std::string>{"author"}));
}

TEST(IsDecimal, Forms) {
  EXPECT_TRUE(is_decimal("10"));
  EXPECT_TRUE(is_decimal("-3.5"));
  EXPECT_TRUE(is_decimal("+.5"));
  EXPECT_FALSE(is_decimal(""));
  EXPECT_FALSE(is_decimal("."));
  EXPECT_FALSE(is_decimal("1e3"));
  EXPECT_FALSE(is_decimal("abc"));
}

TEST(Vocabulary, ReservedIdsAndEncoding) {
  std::vector<std::string> tokens{"who", "wrote", "hamlet", "who"};
  Vocabulary vocab(tokens);
  EXPECT_EQ(vocab.size(), 7u);
  EXPECT_EQ(vocab.id("[PAD]"), Vocabulary::kPad);
  EXPECT_EQ(vocab.id("[UNK]"), Vocabulary::kUnk);
  EXPECT_EQ(vocab.id("[CLS]"), Vocabulary::kCls);
  EXPECT_EQ(vocab.id("[SEP]"), Vocabulary::kSep);
  std::vector<std::string> known{"hamlet", "who"};
  auto ids = vocab.encode(known);
  EXPECT_EQ(ids, (std::vector<TokenId>{6, 4}));
  EXPECT_EQ(vocab.decode(ids), known);
  std::vector<std::string> unknown{"macbeth"};
  EXPECT_EQ(vocab.encode(unknown), (std::vector<TokenId>{Vocabulary::kUnk}));
  EXPECT_TRUE(vocab.encode(std::vector<std::string>{}).empty());
}

TEST(Vocabulary, FileRoundTripAndErrors) {
  auto dir = std::filesystem::temp_directory_path();
  auto path = (dir / "openqa_vocab_test.txt").string();
  std::vector<std::string> tokens{"alpha", "beta", "<e>"};
  Vocabulary(tokens).save(path);
  auto loaded = Vocabulary::load(path);
  EXPECT_EQ(loaded.id("alpha"), 4u);
  EXPECT_EQ(loaded.id("<e>"), 6u);
  EXPECT_EQ(loaded.size(), 7u);

  std::ofstream(path) << "alpha\n\nbeta\n";
  EXPECT_THROW(Vocabulary::load(path), MalformedLine);
  std::ofstream(path) << "alpha\n[CLS]\n";
  EXPECT_THROW(Vocabulary::load(path), MalformedLine);
  std::remove(path.c_str());
  EXPECT_THROW(Vocabulary::load(path), IoError);
}

}  // namespace
}  // namespace openqa::text
