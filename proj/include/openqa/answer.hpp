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

#include <string>

namespace openqa {

enum class SolverKind { kSp, kLd, kRr };

// "sp", "ld" or "rr".
const char* solver_name(SolverKind kind);

// Common output of all three solvers.
struct AnswerCandidate {
  std::string answer;
  double confidence = 0.0;
  SolverKind solver = SolverKind::kSp;
  // Human-readable trace of how the answer was produced.
  std::string provenance;
};

}  // namespace openqa
