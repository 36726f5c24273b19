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

#include "openqa/server.hpp"

#include <iostream>

#include "openqa/error.hpp"

namespace openqa::server {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& kind,
                 const std::string& message) {
  reply(res, status, {{"error", kind}, {"message", message}});
}

}  // namespace

std::unique_ptr<httplib::Server> make_server(const pipeline::System& system) {
  auto server = std::make_unique<httplib::Server>();
  server->Get("/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}});
  });
  server->Post("/ask", [&system](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("question") ||
        !body.at("question").is_string()) {
      reply_error(res, 400, "BadRequest", "expected {\"question\": string}");
      return;
    }
    try {
      reply(res, 200, pipeline::to_json(system.ask(body.at("question").get<std::string>())));
    } catch (const EmptyQuestion& e) {
      reply_error(res, 400, e.kind(), e.what());
    } catch (const Error& e) {
      reply_error(res, 500, e.kind(), e.what());
    }
  });
  return server;
}

std::pair<std::string, int> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size())
    throw ConfigError("address must look like host:port, got '" + addr + "'");
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("bad port in '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw ConfigError("port out of range in '" + addr + "'");
  return {addr.substr(0, colon), port};
}

void serve(const pipeline::System& system, const std::string& addr) {
  auto [host, port] = parse_address(addr);
  auto server = make_server(system);
  std::cerr << "openqa: listening on " << host << ":" << port << "\n";
  if (!server->listen(host, port)) throw IoError("cannot listen on " + addr);
}

}  // namespace openqa::server
