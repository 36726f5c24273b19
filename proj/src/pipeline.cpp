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

#include "openqa/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <set>
#include <thread>

#include "jsonl.hpp"
#include "openqa/error.hpp"
#include "openqa/kb.hpp"
#include "openqa/ld_solver.hpp"
#include "openqa/reader.hpp"
#include "openqa/retrieval.hpp"
#include "openqa/sp_solver.hpp"
#include "openqa/text.hpp"

namespace openqa::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// Configuration ----------------------------------------------------------------------

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p.lexically_normal().string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

std::optional<std::string> optional_path(const json& doc, const char* key,
                                         const std::string& base_dir) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  if (!doc.at(key).is_string()) throw ConfigError(std::string(key) + " must be a string");
  return resolve(base_dir, doc.at(key).get<std::string>());
}

void require_file(const std::string& key, const std::string& path) {
  if (!fs::is_regular_file(path)) throw ConfigError(key + ": no such file '" + path + "'");
}

void reject_unknown(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : doc.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

}  // namespace

SystemConfig config_from_json(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc,
                 {"kb_path", "passages_path", "templates_path", "vocab_path", "index_path",
                  "models", "retrieval_k", "hyper", "http_addr", "solver_timeout_ms",
                  "concurrent"},
                 "config");
  SystemConfig c;
  try {
    auto kb = optional_path(doc, "kb_path", base_dir);
    if (!kb) throw ConfigError("kb_path is required");
    c.kb_path = *kb;
    c.passages_path = optional_path(doc, "passages_path", base_dir);
    c.templates_path = optional_path(doc, "templates_path", base_dir);
    c.vocab_path = optional_path(doc, "vocab_path", base_dir);
    c.index_path = optional_path(doc, "index_path", base_dir);
    if (doc.contains("models")) {
      const auto& m = doc.at("models");
      if (!m.is_object()) throw ConfigError("models must be an object");
      reject_unknown(m, {"tagger", "scorer", "reader", "selector"}, "models");
      c.models.tagger = optional_path(m, "tagger", base_dir);
      c.models.scorer = optional_path(m, "scorer", base_dir);
      c.models.reader = optional_path(m, "reader", base_dir);
      c.models.selector = optional_path(m, "selector", base_dir);
    }
    c.retrieval_k = doc.value("retrieval_k", c.retrieval_k);
    if (c.retrieval_k < 1) throw ConfigError("retrieval_k must be at least 1");
    if (doc.contains("hyper")) {
      const auto& h = doc.at("hyper");
      reject_unknown(h, {"dim", "hidden", "heads", "layers", "ffn", "max_len", "lr", "epochs", "seed"},
                     "hyper");
      auto& o = c.hyper;
      o.dim = h.value("dim", o.dim);
      o.hidden = h.value("hidden", o.hidden);
      o.heads = h.value("heads", o.heads);
      o.layers = h.value("layers", o.layers);
      o.ffn = h.value("ffn", o.ffn);
      o.max_len = h.value("max_len", o.max_len);
      o.lr = h.value("lr", o.lr);
      o.epochs = h.value("epochs", o.epochs);
      o.seed = h.value("seed", o.seed);
      if (o.dim == 0 || o.hidden == 0 || o.heads == 0 || o.layers == 0 || o.ffn == 0 ||
          o.max_len < 3 || !(o.lr >= 0) || o.dim % o.heads != 0)
        throw ConfigError("hyper: inconsistent values");
    }
    c.http_addr = doc.value("http_addr", c.http_addr);
    c.solver_timeout = std::chrono::milliseconds(
        doc.value("solver_timeout_ms", static_cast<long>(c.solver_timeout.count())));
    if (c.solver_timeout.count() <= 0) throw ConfigError("solver_timeout_ms must be positive");
    c.concurrent = doc.value("concurrent", c.concurrent);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  require_file("kb_path", c.kb_path);
  if (c.passages_path) require_file("passages_path", *c.passages_path);
  if (c.templates_path) require_file("templates_path", *c.templates_path);
  return c;
}

SystemConfig load_config(const std::string& path) {
  json doc;
  try {
    doc = json::parse(detail::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(doc, fs::path(path).parent_path().string());
}

std::string resolve_config_path(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("OPENQA_CONFIG"); env && *env) return env;
  throw ConfigError("no config: pass --config or set OPENQA_CONFIG");
}

// System -------------------------------------------------------------------------------

struct System::Resources {
  kb::KnowledgeBase kb;
  EntityDictionary dict;
  std::vector<sp::QuestionTemplate> templates;
  std::optional<retrieval::InvertedIndex> index;
  std::optional<text::Vocabulary> vocab;
  std::optional<nn::ModelParameters> tagger;
  std::optional<nn::ModelParameters> scorer;
  std::optional<reader::ReaderModel> reader;
  std::optional<selector::SelectorModel> selector;
  std::size_t retrieval_k = 10;
};

namespace {

void warn(const std::string& message) { std::cerr << "openqa: " << message << "\n"; }

// Configured and present, configured and required (throws), or skipped.
bool usable(const std::optional<std::string>& path, const char* what, const LoadOptions& options) {
  if (!path) return false;
  if (fs::is_regular_file(*path)) return true;
  if (options.require_models)
    throw ConfigError(std::string(what) + ": no such file '" + *path + "'");
  return false;
}

void check_embedding_rows(const nn::ModelParameters& p, const text::Vocabulary& vocab,
                          const char* what) {
  if (!p.contains("E") || p.at("E").rank() != 2 || p.at("E").dim(0) != vocab.size())
    throw ShapeMismatch(std::string(what) + " model does not match the vocabulary (" +
                        std::to_string(vocab.size()) + " tokens)");
}

}  // namespace

System::System(SystemConfig config, LoadOptions options) : config_(std::move(config)) {
  auto r = std::make_shared<Resources>();
  r->kb = kb::load_triples(config_.kb_path);
  r->dict = kb::build_entity_dictionary(r->kb);
  if (config_.templates_path) r->templates = sp::load_templates(*config_.templates_path);
  r->retrieval_k = config_.retrieval_k;

  if (usable(config_.index_path, "index_path", options)) {
    r->index = retrieval::load_index(*config_.index_path);
  } else if (config_.passages_path) {
    auto passages = retrieval::load_passages(*config_.passages_path);
    r->index = retrieval::build_index(retrieval::build_corpus(r->kb, passages, r->dict));
  }

  const auto& m = config_.models;
  const bool tagger = usable(m.tagger, "models.tagger", options);
  const bool scorer = usable(m.scorer, "models.scorer", options);
  const bool reader_model = usable(m.reader, "models.reader", options);
  const bool selector_model = options.load_selector && usable(m.selector, "models.selector", options);
  if (tagger || scorer || reader_model || selector_model) {
    if (!config_.vocab_path) throw ConfigError("models need vocab_path");
    require_file("vocab_path", *config_.vocab_path);
    r->vocab = text::Vocabulary::load(*config_.vocab_path);
  }
  if (tagger != scorer)
    warn("the ld solver needs both tagger and scorer; it stays idle");
  if (tagger && scorer) {
    r->tagger = nn::load_model(*m.tagger);
    r->scorer = nn::load_model(*m.scorer);
    check_embedding_rows(*r->tagger, *r->vocab, "tagger");
    check_embedding_rows(*r->scorer, *r->vocab, "scorer");
  }
  if (reader_model) {
    r->reader = reader::ReaderModel{nn::load_model(*m.reader), *r->vocab, reader::kMaxSpanLen};
    reader::validate_reader(*r->reader);
  }
  if (selector_model) {
    r->selector = selector::SelectorModel{nn::load_model(*m.selector), *r->vocab};
    selector::validate_selector(*r->selector);
  }
  resources_ = std::move(r);
}

bool System::has_selector() const { return resources_->selector.has_value(); }

namespace {

using Job = std::function<std::vector<AnswerCandidate>()>;

struct Outcome {
  std::vector<AnswerCandidate> answers;
  double ms = 0.0;
};

Outcome run_job(const Job& job, SolverKind kind) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out.answers = job();
  } catch (const std::exception& e) {
    warn(std::string(solver_name(kind)) + " solver failed: " + e.what());
    out.answers.clear();
  }
  out.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

AskResponse System::ask(const std::string& question) const {
  if (text::normalize(question).empty()) throw EmptyQuestion("question is empty");
  // Jobs hold their own reference so a timed-out solver can finish safely
  // after ask has returned.
  std::shared_ptr<const Resources> res = resources_;
  const std::array<Job, kSolverCount> jobs{
      [res, question] {
        return sp::solve_sp(question, res->kb, res->dict, res->templates);
      },
      [res, question]() -> std::vector<AnswerCandidate> {
        if (!res->tagger || !res->scorer) return {};
        return ld::solve_ld(question, res->kb, res->dict, *res->tagger, *res->scorer, *res->vocab);
      },
      [res, question]() -> std::vector<AnswerCandidate> {
        if (!res->reader || !res->index) return {};
        return reader::read(*res->reader, question,
                            retrieval::search(*res->index, question, res->retrieval_k));
      },
  };

  AskResponse response;
  if (config_.concurrent) {
    std::array<std::future<Outcome>, kSolverCount> futures;
    for (std::size_t i = 0; i < kSolverCount; ++i) {
      auto task = std::make_shared<std::packaged_task<Outcome()>>(
          [job = jobs[i], kind = kSolvers[i]] { return run_job(job, kind); });
      futures[i] = task->get_future();
      std::thread([task] { (*task)(); }).detach();
    }
    const auto deadline = std::chrono::steady_clock::now() + config_.solver_timeout;
    for (std::size_t i = 0; i < kSolverCount; ++i) {
      if (futures[i].wait_until(deadline) == std::future_status::ready) {
        auto outcome = futures[i].get();
        response.candidates[i] = std::move(outcome.answers);
        response.timings_ms[i] = outcome.ms;
      } else {
        warn(std::string(solver_name(kSolvers[i])) + " solver timed out");
        response.timings_ms[i] = static_cast<double>(config_.solver_timeout.count());
      }
    }
  } else {
    for (std::size_t i = 0; i < kSolverCount; ++i) {
      auto outcome = run_job(jobs[i], kSolvers[i]);
      response.candidates[i] = std::move(outcome.answers);
      response.timings_ms[i] = outcome.ms;
    }
  }

  auto tops = top_candidates(response);
  if (tops.empty()) return response;
  if (res->selector) {
    auto chosen = selector::select(*res->selector, question, tops);
    response.answer = chosen.answer.answer;
    response.confidence = chosen.probabilities[chosen.chosen];
    response.solver = "selector";
  } else {
    // First maximum wins, which is the sp > ld > rr priority.
    const AnswerCandidate* best = &tops.front();
    for (const auto& c : tops)
      if (c.confidence > best->confidence) best = &c;
    response.answer = best->answer;
    response.confidence = best->confidence;
    response.solver = solver_name(best->solver);
  }
  return response;
}

std::vector<AnswerCandidate> top_candidates(const AskResponse& response) {
  std::vector<AnswerCandidate> tops;
  for (const auto& list : response.candidates)
    if (!list.empty()) tops.push_back(list.front());
  return tops;
}

// Serialization ------------------------------------------------------------------------

json to_json(const AnswerCandidate& c) {
  return {{"answer", c.answer}, {"confidence", c.confidence}, {"solver", solver_name(c.solver)},
          {"provenance", c.provenance}};
}

json to_json(const AskResponse& r) {
  json candidates = json::object(), timings = json::object();
  for (std::size_t i = 0; i < kSolverCount; ++i) {
    json list = json::array();
    for (const auto& c : r.candidates[i]) list.push_back(to_json(c));
    candidates[solver_name(kSolvers[i])] = std::move(list);
    timings[solver_name(kSolvers[i])] = r.timings_ms[i];
  }
  return {{"answer", r.answer ? json(*r.answer) : json(nullptr)},
          {"confidence", r.confidence},
          {"solver", r.solver.empty() ? json(nullptr) : json(r.solver)},
          {"candidates", std::move(candidates)},
          {"timings_ms", std::move(timings)}};
}

json to_json(const EvalReport& r) {
  return {{"total", r.total}, {"correct", r.correct}, {"accuracy", r.accuracy},
          {"per_solver_hit_rate", r.per_solver_hit_rate}};
}

// Datasets and evaluation ---------------------------------------------------------------

std::vector<QaPair> parse_qa(const std::string& jsonl) {
  return detail::parse_jsonl<QaPair>(jsonl, [](const json& j) {
    return QaPair{j.at("question").get<std::string>(), j.at("answer").get<std::string>()};
  });
}

std::vector<QaPair> load_qa(const std::string& path) { return parse_qa(detail::read_file(path)); }

bool answers_match(const std::string& predicted, const std::string& gold) {
  return text::normalize(predicted) == text::normalize(gold);
}

EvalReport evaluate(const System& system, const std::vector<QaPair>& dataset) {
  if (dataset.empty()) throw EmptyDataset("evaluation dataset is empty");
  EvalReport report;
  std::array<std::size_t, kSolverCount> hits{};
  for (const auto& pair : dataset) {
    auto r = system.ask(pair.question);
    ++report.total;
    if (r.answer && answers_match(*r.answer, pair.answer)) ++report.correct;
    for (std::size_t i = 0; i < kSolverCount; ++i)
      if (!r.candidates[i].empty() && answers_match(r.candidates[i].front().answer, pair.answer))
        ++hits[i];
  }
  const auto n = static_cast<double>(report.total);
  report.accuracy = static_cast<double>(report.correct) / n;
  for (std::size_t i = 0; i < kSolverCount; ++i)
    report.per_solver_hit_rate[solver_name(kSolvers[i])] = static_cast<double>(hits[i]) / n;
  return report;
}

SelectorDataReport make_selector_data(const System& system, const std::vector<QaPair>& dataset) {
  if (dataset.empty()) throw EmptyDataset("selector source dataset is empty");
  SelectorDataReport report;
  for (const auto& pair : dataset) {
    auto tops = top_candidates(system.ask(pair.question));
    if (tops.size() < 2) {
      ++report.skipped_too_few;
      continue;
    }
    std::optional<std::size_t> gold;
    for (std::size_t i = 0; i < tops.size() && !gold; ++i)
      if (answers_match(tops[i].answer, pair.answer)) gold = i;
    if (!gold) {
      ++report.skipped_no_match;
      continue;
    }
    selector::SelectorExample ex{pair.question, {}, *gold};
    for (const auto& c : tops) ex.candidates.push_back(c.answer);
    report.examples.push_back(std::move(ex));
  }
  return report;
}

void write_selector_data(const std::vector<selector::SelectorExample>& examples,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& ex : examples)
    out << json{{"question", ex.question}, {"candidates", ex.candidates}, {"gold", ex.gold}}.dump()
        << "\n";
  if (!out) throw IoError("failed writing " + path);
}

std::pair<std::vector<QaPair>, std::vector<QaPair>> split_dataset(const std::vector<QaPair>& pairs,
                                                                  double train_fraction,
                                                                  std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  nn::Rng rng(seed);
  auto order = nn::shuffled_order(pairs.size(), rng);
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(pairs.size())));
  std::pair<std::vector<QaPair>, std::vector<QaPair>> out;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < cut ? out.first : out.second).push_back(pairs[order[i]]);
  return out;
}

}  // namespace openqa::pipeline
