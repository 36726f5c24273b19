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
#include <string>
#include <string_view>

namespace openqa {

// Normalized entity surface form -> canonical knowledge-base entity.
// Built by kb::build_entity_dictionary; consumed by the tokenizer and by
// every solver that links mentions to entities.
class EntityDictionary {
 public:
  using Map = std::map<std::string, std::string, std::less<>>;

  EntityDictionary() = default;
  EntityDictionary(Map entries, std::size_t max_entry_tokens)
      : entries_(std::move(entries)), max_entry_tokens_(max_entry_tokens) {}

  // Canonical entity for an already-normalized key, or nullptr.
  const std::string* find(std::string_view key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const Map& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t max_entry_tokens() const noexcept { return max_entry_tokens_; }

 private:
  Map entries_;
  std::size_t max_entry_tokens_ = 0;
};

}  // namespace openqa
