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

#include "openqa/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "openqa/error.hpp"

namespace openqa::text {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_terminal_punct(unsigned char c) {
  return c == '.' || c == '?' || c == '!' || c == ',' || c == ';' || c == ':';
}

bool is_word(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

bool is_connector(unsigned char c) {
  return c == '\'' || c == '-' || c == '.' || c == '_';
}

char lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

}  // namespace

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(lower(c));
  }
  while (!out.empty() && (is_terminal_punct(static_cast<unsigned char>(out.back())) ||
                          out.back() == ' ')) {
    out.pop_back();
  }
  return out;
}

TokenSequence tokenize(std::string_view text, const EntityDictionary* dict) {
  TokenSequence base;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_word(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n) {
      auto c = static_cast<unsigned char>(text[j]);
      if (is_word(c)) {
        ++j;
      } else if (is_connector(c) && j + 1 < n &&
                 is_word(static_cast<unsigned char>(text[j + 1]))) {
        j += 2;
      } else {
        break;
      }
    }
    std::string token(text.substr(i, j - i));
    std::transform(token.begin(), token.end(), token.begin(), lower);
    base.tokens.push_back(std::move(token));
    base.spans.push_back({i, j});
    i = j;
  }

  if (dict == nullptr || dict->max_entry_tokens() < 2) return base;

  auto whitespace_gap = [&](std::size_t k) {
    for (std::size_t p = base.spans[k].end; p < base.spans[k + 1].begin; ++p) {
      if (!is_space(static_cast<unsigned char>(text[p]))) return false;
    }
    return true;
  };

  TokenSequence merged;
  std::size_t k = 0;
  while (k < base.size()) {
    std::size_t width = 1;
    // Longest window whose inner gaps are whitespace and which is a key.
    std::size_t limit = std::min(dict->max_entry_tokens(), base.size() - k);
    std::size_t contiguous = 1;
    while (contiguous < limit && whitespace_gap(k + contiguous - 1)) ++contiguous;
    for (std::size_t w = contiguous; w >= 2; --w) {
      Span span{base.spans[k].begin, base.spans[k + w - 1].end};
      std::string key = normalize(text.substr(span.begin, span.end - span.begin));
      if (dict->find(key) != nullptr) {
        merged.tokens.push_back(std::move(key));
        merged.spans.push_back(span);
        width = w;
        break;
      }
    }
    if (width == 1) {
      merged.tokens.push_back(std::move(base.tokens[k]));
      merged.spans.push_back(base.spans[k]);
    }
    k += width;
  }
  return merged;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t above = row[j];
      std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({above + 1, row[j - 1] + 1, diagonal + cost});
      diagonal = above;
    }
  }
  return row[b.size()];
}

std::vector<std::string> relation_tokens(std::string_view relation) {
  std::string spaced(relation);
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  return tokenize(spaced).tokens;
}

std::string join(std::span<const std::string> tokens, std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.append(separator);
    out.append(tokens[i]);
  }
  return out;
}

bool is_decimal(std::string_view text) {
  std::size_t i = 0;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    ++i;
    ++digits;
  }
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      ++digits;
    }
  }
  return digits > 0 && i == text.size();
}

// Vocabulary ------------------------------------------------------------------

Vocabulary::Vocabulary() {
  for (const char* reserved : {"[PAD]", "[UNK]", "[CLS]", "[SEP]"}) add(reserved);
}

Vocabulary::Vocabulary(std::span<const std::string> tokens) : Vocabulary() {
  for (const auto& token : tokens) {
    if (!contains(token)) add(token);
  }
}

void Vocabulary::add(const std::string& token) {
  token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file " + path);
  Vocabulary vocab;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) throw MalformedLine(n + 1, "empty token");
    if (vocab.contains(lines[n])) {
      throw MalformedLine(n + 1, "duplicate or reserved token '" + lines[n] + "'");
    }
    vocab.add(lines[n]);
  }
  return vocab;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file " + path);
  for (std::size_t i = kReserved; i < id_to_token_.size(); ++i) {
    out << id_to_token_[i] << '\n';
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= id_to_token_.size()) {
    throw IndexOutOfRange("token id " + std::to_string(id) + " not in vocabulary");
  }
  return id_to_token_[id];
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) > 0;
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) ids.push_back(id(token));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (TokenId id : ids) tokens.push_back(token(id));
  return tokens;
}

}  // namespace openqa::text
