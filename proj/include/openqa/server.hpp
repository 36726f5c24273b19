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

#include <memory>
#include <string>
#include <utility>

#include "httplib.h"
#include "openqa/pipeline.hpp"

namespace openqa::server {

// Routes:
//   GET  /health  -> {"status":"ok"}
//   POST /ask     {"question": "..."} -> ask response JSON; 400 on a bad body
//                 or an empty question.
// The system must outlive the server.
std::unique_ptr<httplib::Server> make_server(const pipeline::System& system);

// "host:port" -> (host, port). Throws ConfigError.
std::pair<std::string, int> parse_address(const std::string& addr);

// Blocks until the server stops.
void serve(const pipeline::System& system, const std::string& addr);

}  // namespace openqa::server
