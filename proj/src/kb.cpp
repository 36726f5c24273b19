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

#include "openqa/kb.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "openqa/error.hpp"
#include "openqa/text.hpp"

namespace openqa::kb {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

const std::vector<std::string>& empty_list() {
  static const std::vector<std::string> kEmpty;
  return kEmpty;
}

void append_unique(std::vector<std::string>& list, const std::string& value) {
  if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(value);
}

void validate(const Triple& t) {
  for (const std::string* field : {&t.subject, &t.predicate, &t.object}) {
    if (trim(*field).empty()) throw EmptyComponent("triple field is empty");
    if (field->find_first_of("\t\n\r") != std::string::npos) {
      throw EmptyComponent("triple field contains a tab or newline: " + *field);
    }
  }
}

}  // namespace

KnowledgeBase::KnowledgeBase(std::vector<Triple> triples) {
  std::set<Triple> seen;
  for (auto& t : triples) {
    validate(t);
    if (!seen.insert(t).second) continue;
    append_unique(by_subject_predicate_[{t.subject, t.predicate}], t.object);
    append_unique(by_predicate_object_[{t.predicate, t.object}], t.subject);
    entities_.insert(t.subject);
    triples_.push_back(std::move(t));
  }
}

const std::vector<std::string>& KnowledgeBase::objects(std::string_view subject,
                                                       std::string_view predicate) const {
  auto it = by_subject_predicate_.find({std::string(subject), std::string(predicate)});
  return it == by_subject_predicate_.end() ? empty_list() : it->second;
}

const std::vector<std::string>& KnowledgeBase::subjects(std::string_view predicate,
                                                        std::string_view object) const {
  auto it = by_predicate_object_.find({std::string(predicate), std::string(object)});
  return it == by_predicate_object_.end() ? empty_list() : it->second;
}

std::vector<std::string> KnowledgeBase::predicates_of(std::string_view subject) const {
  std::vector<std::string> out;
  for (const auto& t : triples_) {
    if (t.subject == subject) append_unique(out, t.predicate);
  }
  return out;
}

std::vector<std::string> KnowledgeBase::all_predicates() const {
  std::vector<std::string> out;
  for (const auto& t : triples_) append_unique(out, t.predicate);
  return out;
}

KnowledgeBase parse_triples(std::string_view tsv) {
  std::vector<Triple> triples;
  std::size_t line_no = 0;
  while (!tsv.empty()) {
    ++line_no;
    auto newline = tsv.find('\n');
    std::string_view line = tsv.substr(0, newline);
    tsv.remove_prefix(newline == std::string_view::npos ? tsv.size() : newline + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw MalformedLine(line_no, "expected 3 tab-separated fields, found " +
                                       std::to_string(fields.size()));
    }
    Triple t{std::string(trim(fields[0])), std::string(trim(fields[1])),
             std::string(trim(fields[2]))};
    if (t.subject.empty() || t.predicate.empty() || t.object.empty()) {
      throw MalformedLine(line_no, "empty field");
    }
    triples.push_back(std::move(t));
  }
  return KnowledgeBase(std::move(triples));
}

KnowledgeBase load_triples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open knowledge base file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path);
  return parse_triples(buffer.str());
}

// SPARQL ----------------------------------------------------------------------

std::string_view to_string(Comparator op) {
  switch (op) {
    case Comparator::kEq: return "=";
    case Comparator::kNe: return "!=";
    case Comparator::kLt: return "<";
    case Comparator::kGt: return ">";
    case Comparator::kLe: return "<=";
    case Comparator::kGe: return ">=";
  }
  return "=";
}

bool is_numeric(Comparator op) {
  return op != Comparator::kEq && op != Comparator::kNe;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  SparqlQuery parse() {
    SparqlQuery q;
    keyword("SELECT");
    q.variable = variable();
    keyword("WHERE");
    expect('{');

    struct Term {
      bool is_var;
      std::string value;
    };
    auto term = [&]() -> Term {
      skip();
      if (peek() == '?') return {true, variable()};
      return {false, iri()};
    };
    std::size_t subject_pos = (skip(), pos_);
    Term subject = term();
    std::string predicate = iri();
    std::size_t object_pos = (skip(), pos_);
    Term object = term();

    if (subject.is_var == object.is_var) {
      throw SyntaxError(subject.is_var ? object_pos : subject_pos,
                        "exactly one variable in the triple pattern");
    }
    const Term& var = subject.is_var ? subject : object;
    if (var.value != q.variable) {
      throw SyntaxError(subject.is_var ? subject_pos : object_pos,
                        "selected variable ?" + q.variable);
    }
    if (subject.is_var) {
      q.pattern = SubjectUnknown{std::move(predicate), std::move(object.value)};
    } else {
      q.pattern = ObjectUnknown{std::move(subject.value), std::move(predicate)};
    }

    skip();
    if (peek() == '.') ++pos_;
    skip();
    if (peek() != '}') {
      keyword("FILTER");
      expect('(');
      std::size_t var_pos = (skip(), pos_);
      if (variable() != q.variable) throw SyntaxError(var_pos, "?" + q.variable);
      Filter f;
      f.op = comparator();
      std::size_t literal_pos = (skip(), pos_);
      bool bare = false;
      f.literal = literal(bare);
      if (is_numeric(f.op) && !text::is_decimal(f.literal)) {
        throw SyntaxError(literal_pos, "decimal literal for numeric comparator");
      }
      expect(')');
      q.filter = std::move(f);
    }
    expect('}');
    skip();
    if (pos_ != text_.size()) throw SyntaxError(pos_, "end of query");
    return q;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip();
    if (peek() != c) throw SyntaxError(pos_, std::string("'") + c + "'");
    ++pos_;
  }

  void keyword(std::string_view word) {
    skip();
    if (text_.size() - pos_ < word.size()) throw SyntaxError(pos_, std::string(word));
    for (std::size_t i = 0; i < word.size(); ++i) {
      if (std::toupper(static_cast<unsigned char>(text_[pos_ + i])) != word[i]) {
        throw SyntaxError(pos_, std::string(word));
      }
    }
    std::size_t end = pos_ + word.size();
    if (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) {
      throw SyntaxError(pos_, std::string(word));
    }
    pos_ = end;
  }

  std::string variable() {
    skip();
    if (peek() != '?') throw SyntaxError(pos_, "variable");
    std::size_t start = ++pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    if (pos_ == start) throw SyntaxError(pos_, "variable name");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string iri() {
    skip();
    if (peek() != '<') throw SyntaxError(pos_, "'<'");
    std::size_t start = ++pos_;
    auto close = text_.find('>', start);
    if (close == std::string_view::npos) throw SyntaxError(text_.size(), "'>'");
    if (close == start) throw SyntaxError(start, "non-empty IRI");
    pos_ = close + 1;
    return std::string(text_.substr(start, close - start));
  }

  Comparator comparator() {
    skip();
    auto rest = text_.substr(pos_);
    auto take = [&](std::size_t n, Comparator op) {
      pos_ += n;
      return op;
    };
    if (rest.starts_with("!=")) return take(2, Comparator::kNe);
    if (rest.starts_with("<=")) return take(2, Comparator::kLe);
    if (rest.starts_with(">=")) return take(2, Comparator::kGe);
    if (rest.starts_with("=")) return take(1, Comparator::kEq);
    if (rest.starts_with("<")) return take(1, Comparator::kLt);
    if (rest.starts_with(">")) return take(1, Comparator::kGt);
    throw SyntaxError(pos_, "comparator");
  }

  std::string literal(bool& bare) {
    skip();
    bare = false;
    if (peek() == '"') {
      std::string out;
      ++pos_;
      while (pos_ < text_.size() && text_[pos_] != '"') {
        if (text_[pos_] == '\\') {
          if (++pos_ >= text_.size()) break;
        }
        out.push_back(text_[pos_++]);
      }
      if (peek() != '"') throw SyntaxError(pos_, "closing '\"'");
      ++pos_;
      return out;
    }
    if (peek() == '<') return iri();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
            text_[pos_] == '-' || text_[pos_] == '+')) {
      ++pos_;
    }
    auto token = text_.substr(start, pos_ - start);
    if (!text::is_decimal(token)) throw SyntaxError(start, "literal");
    bare = true;
    return std::string(token);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

double to_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0;
  std::from_chars(s.data(), s.data() + s.size(), value);
  return value;
}

bool passes(const Filter& f, const std::string& binding) {
  if (!is_numeric(f.op)) {
    return f.op == Comparator::kEq ? binding == f.literal : binding != f.literal;
  }
  auto trimmed = trim(binding);
  if (!text::is_decimal(trimmed)) {
    throw FilterTypeError("numeric comparator " + std::string(to_string(f.op)) +
                          " applied to non-numeric binding '" + binding + "'");
  }
  double lhs = to_double(trimmed);
  double rhs = to_double(f.literal);
  switch (f.op) {
    case Comparator::kLt: return lhs < rhs;
    case Comparator::kGt: return lhs > rhs;
    case Comparator::kLe: return lhs <= rhs;
    case Comparator::kGe: return lhs >= rhs;
    default: return false;
  }
}

}  // namespace

SparqlQuery parse_sparql(std::string_view text) { return Parser(text).parse(); }

std::string serialize(const SparqlQuery& q) {
  std::string out = "SELECT ?" + q.variable + " WHERE { ";
  if (const auto* p = std::get_if<ObjectUnknown>(&q.pattern)) {
    out += "<" + p->subject + "> <" + p->predicate + "> ?" + q.variable + " .";
  } else {
    const auto& s = std::get<SubjectUnknown>(q.pattern);
    out += "?" + q.variable + " <" + s.predicate + "> <" + s.object + "> .";
  }
  if (q.filter) {
    out += " FILTER(?" + q.variable + " " + std::string(to_string(q.filter->op)) + " ";
    if (text::is_decimal(q.filter->literal)) {
      out += q.filter->literal;
    } else {
      out += '"';
      for (char c : q.filter->literal) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      out += '"';
    }
    out += ")";
  }
  out += " }";
  return out;
}

std::vector<std::string> execute_sparql(const KnowledgeBase& kb, const SparqlQuery& q) {
  const std::vector<std::string>* bindings;
  if (const auto* p = std::get_if<ObjectUnknown>(&q.pattern)) {
    bindings = &kb.objects(p->subject, p->predicate);
  } else {
    const auto& s = std::get<SubjectUnknown>(q.pattern);
    bindings = &kb.subjects(s.predicate, s.object);
  }
  if (!q.filter) return *bindings;
  std::vector<std::string> out;
  for (const auto& b : *bindings) {
    if (passes(*q.filter, b)) out.push_back(b);
  }
  return out;
}

std::string generate_sparql(std::string_view subject, std::string_view predicate) {
  if (subject.empty() || predicate.empty()) {
    throw EmptyComponent("subject and predicate must be non-empty");
  }
  if (subject.find('>') != std::string_view::npos ||
      predicate.find('>') != std::string_view::npos) {
    throw EmptyComponent("IRI component may not contain '>'");
  }
  return "SELECT ?x WHERE { <" + std::string(subject) + "> <" + std::string(predicate) +
         "> ?x . }";
}

EntityDictionary build_entity_dictionary(const KnowledgeBase& kb) {
  EntityDictionary::Map entries;
  std::size_t max_tokens = 0;
  // entities() is ordered, so the first canonical string per key is the
  // lexicographically smallest one.
  for (const auto& entity : kb.entities()) {
    std::string key = text::normalize(entity);
    if (key.empty()) continue;
    if (entries.emplace(key, entity).second) {
      max_tokens = std::max(max_tokens, text::tokenize(key).size());
    }
  }
  return EntityDictionary(std::move(entries), max_tokens);
}

}  // namespace openqa::kb
