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

// Internal helpers shared by the JSON Lines loaders.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "openqa/error.hpp"

namespace openqa::detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Parses each non-blank line as JSON and hands it to `convert`. JSON and
// library errors are reported as MalformedLine with the 1-based line number.
template <typename Row, typename Convert>
std::vector<Row> parse_jsonl(const std::string& jsonl, Convert convert) {
  std::vector<Row> out;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(convert(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedLine(number, e.what());
    } catch (const MalformedLine&) {
      throw;
    } catch (const Error& e) {
      throw MalformedLine(number, e.what());
    }
  }
  return out;
}

}  // namespace openqa::detail
