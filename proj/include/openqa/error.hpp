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
#include <stdexcept>
#include <string>

namespace openqa {

// Base of every error raised by the library. `kind()` is a stable short name
// used by the CLI and the HTTP layer when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("Io", message) {}
};

class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line, const std::string& detail)
      : Error("MalformedLine",
              "line " + std::to_string(line) + ": " + detail),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& expected)
      : Error("SyntaxError", "at offset " + std::to_string(position) +
                                 ": expected " + expected),
        position_(position),
        expected_(expected) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

// Raised for dataset rows that violate a precondition; carries the row index.
class ExampleError : public Error {
 public:
  ExampleError(std::string kind, std::size_t index, const std::string& detail)
      : Error(std::move(kind),
              "example " + std::to_string(index) + ": " + detail),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

#define OPENQA_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  };

OPENQA_DEFINE_ERROR(FilterTypeError)
OPENQA_DEFINE_ERROR(EmptyComponent)
OPENQA_DEFINE_ERROR(ShapeMismatch)
OPENQA_DEFINE_ERROR(IndexOutOfRange)
OPENQA_DEFINE_ERROR(EvenWidth)
OPENQA_DEFINE_ERROR(EmptySequence)
OPENQA_DEFINE_ERROR(EmptyQuestion)
OPENQA_DEFINE_ERROR(EmptyPattern)
OPENQA_DEFINE_ERROR(EmptyRelation)
OPENQA_DEFINE_ERROR(NoCandidates)
OPENQA_DEFINE_ERROR(EmptyPassage)
OPENQA_DEFINE_ERROR(DuplicateDocId)
OPENQA_DEFINE_ERROR(UnknownDoc)
OPENQA_DEFINE_ERROR(EmptyInput)
OPENQA_DEFINE_ERROR(SequenceTooLong)
OPENQA_DEFINE_ERROR(EmptyDataset)
OPENQA_DEFINE_ERROR(ConfigError)
OPENQA_DEFINE_ERROR(InvalidTemplate)

#undef OPENQA_DEFINE_ERROR

}  // namespace openqa
