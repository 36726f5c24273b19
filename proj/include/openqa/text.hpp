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
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "openqa/dictionary.hpp"

namespace openqa::text {

// Lowercase (ASCII), trim, collapse whitespace runs to one space and strip
// trailing .?!,;: characters. Idempotent.
std::string normalize(std::string_view text);

// Byte range [begin, end) into the tokenized source.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<Span> spans;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
};

/// Splits on whitespace and punctuation. Word characters are ASCII
/// alphanumerics and all bytes >= 0x80; the connectors ' - . _ stay inside a
/// token when both neighbours are word characters. Tokens are normalized
/// source substrings.
///
/// With a dictionary, windows of up to `max_entry_tokens` adjacent tokens
/// (separated by whitespace only) are merged left to right, longest window
/// first, whenever the normalized source substring is a dictionary key.
TokenSequence tokenize(std::string_view text,
                       const EntityDictionary* dict = nullptr);

// Edit distance over bytes with unit insert/delete/substitute costs.
std::size_t levenshtein(std::string_view a, std::string_view b);

// Relation names are split on '_' before tokenization: "place_of_birth"
// becomes {"place", "of", "birth"}.
std::vector<std::string> relation_tokens(std::string_view relation);

std::string join(std::span<const std::string> tokens,
                 std::string_view separator = " ");

// Bare decimal literal: optional sign, digits, optional fraction.
bool is_decimal(std::string_view text);

// Stand-in token for the linked mention in relation-detection patterns.
inline constexpr std::string_view kEntityPlaceholder = "<e>";

using TokenId = std::uint32_t;

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kCls = 2;
  static constexpr TokenId kSep = 3;
  static constexpr std::size_t kReserved = 4;

  // Reserved tokens only.
  Vocabulary();
  // Reserved tokens followed by `tokens` in first-occurrence order.
  explicit Vocabulary(std::span<const std::string> tokens);

  // One token per line; line n (0-based) receives id n + 4.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const noexcept { return id_to_token_.size(); }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

 private:
  void add(const std::string& token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

}  // namespace openqa::text
