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

// openqa command-line front end.

#include <cstdio>
#include <functional>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "openqa/error.hpp"
#include "openqa/kb.hpp"
#include "openqa/ld_solver.hpp"
#include "openqa/nn/params.hpp"
#include "openqa/pipeline.hpp"
#include "openqa/reader.hpp"
#include "openqa/retrieval.hpp"
#include "openqa/selector.hpp"
#include "openqa/server.hpp"
#include "openqa/text.hpp"

namespace {

using namespace openqa;
using nlohmann::json;

struct Args {
  std::optional<std::string> config;
  std::string path;
  std::string out;
  std::string question;
  std::string kind;
  std::vector<std::string> extra;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> addr;
  bool json = false;
};

pipeline::SystemConfig config_of(const Args& a) {
  return pipeline::load_config(pipeline::resolve_config_path(a.config));
}

text::Vocabulary vocab_of(const pipeline::SystemConfig& c) {
  if (!c.vocab_path) throw ConfigError("vocab_path is not configured");
  return text::Vocabulary::load(*c.vocab_path);
}

void print_answer(const pipeline::AskResponse& r, bool as_json) {
  if (as_json) {
    std::cout << pipeline::to_json(r).dump() << "\n";
    return;
  }
  if (!r.answer) {
    std::cout << "(no answer)\n";
    return;
  }
  std::printf("%s\t(confidence %.4f, %s)\n", r.answer->c_str(), r.confidence, r.solver.c_str());
}

int cmd_load_kb(const Args& a) {
  auto kb = kb::load_triples(a.path);
  std::cout << kb.size() << " triples, " << kb.entities().size() << " entities, "
            << kb.all_predicates().size() << " predicates\n";
  return 0;
}

int cmd_index(const Args& a) {
  auto c = config_of(a);
  std::string out = !a.out.empty() ? a.out : c.index_path.value_or("");
  if (out.empty()) throw ConfigError("no output: pass --out or configure index_path");
  auto kb = kb::load_triples(c.kb_path);
  auto dict = kb::build_entity_dictionary(kb);
  auto passages = retrieval::load_passages(a.path);
  auto index = retrieval::build_index(retrieval::build_corpus(kb, passages, dict));
  retrieval::save_index(index, out);
  std::cout << "indexed " << index.doc_count << " documents (" << kb.size() << " triples, "
            << passages.size() << " passages) -> " << out << "\n";
  return 0;
}

// Vocabulary over every token the models can see: knowledge base fields,
// relation pieces, passages and all strings in the given JSON Lines files.
int cmd_build_vocab(const Args& a) {
  auto c = config_of(a);
  std::vector<std::string> tokens;
  std::set<std::string> seen;
  auto add = [&](const std::string& t) {
    if (!t.empty() && seen.insert(t).second) tokens.push_back(t);
  };
  auto add_text = [&](const std::string& s) {
    for (auto& t : text::tokenize(s).tokens) add(t);
  };
  add(std::string(text::kEntityPlaceholder));
  auto kb = kb::load_triples(c.kb_path);
  for (const auto& t : kb.triples()) {
    add_text(t.subject);
    for (auto& piece : text::relation_tokens(t.predicate)) add(piece);
    add_text(t.object);
  }
  if (c.passages_path)
    for (const auto& p : retrieval::load_passages(*c.passages_path)) add_text(p.text);
  std::function<void(const json&)> walk = [&](const json& j) {
    if (j.is_string()) {
      add_text(j.get<std::string>());
    } else if (j.is_structured()) {
      for (const auto& item : j) walk(item);
    }
  };
  for (const auto& file : a.extra) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read " + file);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw MalformedLine(number, file + ": invalid JSON");
      walk(j);
    }
  }
  text::Vocabulary(tokens).save(a.out);
  std::cout << tokens.size() << " tokens -> " << a.out << "\n";
  return 0;
}

int cmd_train(const Args& a) {
  auto c = config_of(a);
  auto options = c.hyper;
  if (a.epochs) options.epochs = *a.epochs;
  if (a.lr) options.lr = *a.lr;
  if (a.seed) options.seed = *a.seed;
  auto vocab = vocab_of(c);

  std::optional<std::string> configured;
  nn::TrainResult result;
  std::size_t examples = 0;
  if (a.kind == "tagger") {
    auto data = ld::load_tagger_data(a.path);
    examples = data.size();
    result = ld::train_tagger(data, vocab, options);
    configured = c.models.tagger;
  } else if (a.kind == "scorer") {
    auto data = ld::load_scorer_data(a.path);
    examples = data.size();
    result = ld::train_relation_scorer(data, vocab, options);
    configured = c.models.scorer;
  } else if (a.kind == "reader") {
    auto data = reader::load_reader_data(a.path);
    examples = data.size();
    result = reader::train_reader(data, vocab, options);
    configured = c.models.reader;
  } else {
    auto data = selector::load_selector_data(a.path);
    examples = data.size();
    result = selector::train_selector(data, vocab, options);
    configured = c.models.selector;
  }
  std::string out = !a.out.empty() ? a.out : configured.value_or("");
  if (out.empty()) throw ConfigError("no output: pass --out or configure models." + a.kind);
  nn::save_model(result.params, out);
  std::printf("trained %s on %zu examples for %zu epochs, final loss %.6f -> %s\n",
              a.kind.c_str(), examples, options.epochs,
              result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back(), out.c_str());
  return 0;
}

int cmd_ask(const Args& a) {
  pipeline::System system(config_of(a));
  print_answer(system.ask(a.question), a.json);
  return 0;
}

int cmd_repl(const Args& a) {
  pipeline::System system(config_of(a));
  std::string line;
  while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
    if (text::normalize(line).empty()) continue;
    if (line == ":q" || line == "quit" || line == "exit") break;
    try {
      print_answer(system.ask(line), a.json);
    } catch (const Error& e) {
      std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    }
  }
  std::cout << "\n";
  return 0;
}

int cmd_eval(const Args& a) {
  pipeline::System system(config_of(a));
  auto report = pipeline::evaluate(system, pipeline::load_qa(a.path));
  if (a.json) {
    std::cout << pipeline::to_json(report).dump() << "\n";
    return 0;
  }
  std::printf("accuracy %.4f (%zu/%zu)\n", report.accuracy, report.correct, report.total);
  for (const auto& [solver, rate] : report.per_solver_hit_rate)
    std::printf("  %-3s hit rate %.4f\n", solver.c_str(), rate);
  return 0;
}

int cmd_make_selector_data(const Args& a) {
  pipeline::LoadOptions load;
  load.load_selector = false;
  pipeline::System system(config_of(a), load);
  auto report = pipeline::make_selector_data(system, pipeline::load_qa(a.path));
  pipeline::write_selector_data(report.examples, a.out);
  std::cout << report.examples.size() << " examples -> " << a.out << " (skipped "
            << report.skipped_too_few << " with fewer than 2 candidates, "
            << report.skipped_no_match << " without a matching candidate)\n";
  return 0;
}

int cmd_serve(const Args& a) {
  auto c = config_of(a);
  pipeline::System system(c);
  server::serve(system, a.addr.value_or(c.http_addr));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"openqa: hybrid question answering over a knowledge base and passages"};
  app.require_subcommand(1);
  Args a;
  app.add_option("--config", a.config, "JSON config file (default: $OPENQA_CONFIG)");

  int (*run)(const Args&) = nullptr;
  auto bind = [&](CLI::App* sub, int (*fn)(const Args&)) {
    sub->callback([&run, fn] { run = fn; });
    return sub;
  };

  auto* load_kb = bind(app.add_subcommand("load-kb", "Parse a triple file and print statistics"),
                       cmd_load_kb);
  load_kb->add_option("tsv", a.path)->required();

  auto* index = bind(app.add_subcommand("index", "Build and save the retrieval index"), cmd_index);
  index->add_option("passages", a.path)->required();
  index->add_option("--out", a.out, "Index file (default: index_path)");

  auto* vocab = bind(app.add_subcommand("build-vocab", "Write a vocabulary file"), cmd_build_vocab);
  vocab->add_option("out", a.out)->required();
  vocab->add_option("data", a.extra, "JSON Lines files whose strings are added");

  auto* train = bind(app.add_subcommand("train", "Train a model from seed"), cmd_train);
  train->add_option("model", a.kind)->required()->check(
      CLI::IsMember({"tagger", "scorer", "reader", "selector"}));
  train->add_option("data", a.path)->required();
  train->add_option("--epochs", a.epochs);
  train->add_option("--lr", a.lr);
  train->add_option("--seed", a.seed);
  train->add_option("--out", a.out, "Model file (default: the configured model path)");

  auto* ask = bind(app.add_subcommand("ask", "Answer one question"), cmd_ask);
  ask->add_option("question", a.question)->required();
  ask->add_flag("--json", a.json);

  auto* repl = bind(app.add_subcommand("repl", "Answer questions read from stdin"), cmd_repl);
  repl->add_flag("--json", a.json);

  auto* eval = bind(app.add_subcommand("eval", "Exact-match evaluation on a QA file"), cmd_eval);
  eval->add_option("qa", a.path)->required();
  eval->add_flag("--json", a.json);

  auto* msd = bind(app.add_subcommand("make-selector-data", "Generate selector training data"),
                   cmd_make_selector_data);
  msd->add_option("qa", a.path)->required();
  msd->add_option("out", a.out)->required();

  auto* serve = bind(app.add_subcommand("serve", "Run the HTTP service"), cmd_serve);
  serve->add_option("--addr", a.addr, "host:port (default: http_addr)");

  CLI11_PARSE(app, argc, argv);
  try {
    return run(a);
  } catch (const openqa::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}
