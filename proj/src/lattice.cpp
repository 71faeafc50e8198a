// Copyright 2026 The spanlat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spanlat/lattice.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

namespace spanlat {

namespace {

void require_same_dim(const Projector& p, const Projector& q, const char* op) {
  if (!p.p.same_shape(q.p)) {
    throw std::invalid_argument(std::string(op) + ": ambient dimension mismatch " +
                                p.p.shape_str() + " vs " + q.p.shape_str());
  }
}

}  // namespace

Projector meet(const Projector& p, const Projector& q) {
  require_same_dim(p, q, "meet");
  return Projector{scale(add(matmul(p.p, q.p), matmul(q.p, p.p)), 0.5)};
}

Projector join(const Projector& p, const Projector& q) {
  require_same_dim(p, q, "join");
  return Projector{sub(add(p.p, q.p), meet(p, q).p)};
}

Projector complement(const Projector& p) {
  return Projector{sub(Matrix::identity(p.p.rows()), p.p)};
}

Projector lattice_top(int d) { return Projector{Matrix::identity(d)}; }

Projector lattice_bottom(int d) { return Projector{Matrix(d, d)}; }

QueryPtr make_concept(std::string name) {
  if (name.empty()) throw std::invalid_argument("concept name must be nonempty");
  auto node = std::make_shared<QueryExpr>();
  node->kind = QueryExpr::Kind::kConcept;
  node->name = std::move(name);
  return node;
}

namespace {

QueryPtr make_binary(QueryExpr::Kind kind, QueryPtr lhs, QueryPtr rhs) {
  auto node = std::make_shared<QueryExpr>();
  node->kind = kind;
  node->lhs = std::move(lhs);
  node->rhs = std::move(rhs);
  return node;
}

}  // namespace

QueryPtr make_and(QueryPtr lhs, QueryPtr rhs) {
  return make_binary(QueryExpr::Kind::kAnd, std::move(lhs), std::move(rhs));
}

QueryPtr make_or(QueryPtr lhs, QueryPtr rhs) {
  return make_binary(QueryExpr::Kind::kOr, std::move(lhs), std::move(rhs));
}

QueryPtr make_not(QueryPtr child) {
  auto node = std::make_shared<QueryExpr>();
  node->kind = QueryExpr::Kind::kNot;
  node->lhs = std::move(child);
  return node;
}

bool same_query(const QueryExpr& a, const QueryExpr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case QueryExpr::Kind::kConcept:
      return a.name == b.name;
    case QueryExpr::Kind::kNot:
      return same_query(*a.lhs, *b.lhs);
    case QueryExpr::Kind::kAnd:
    case QueryExpr::Kind::kOr:
      return same_query(*a.lhs, *b.lhs) && same_query(*a.rhs, *b.rhs);
  }
  return false;
}

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error("parse error at byte " + std::to_string(offset) + ": " + what),
      offset_(offset) {}

namespace {

struct Token {
  enum class Type { kLParen, kRParen, kAnd, kOr, kNot, kLiteral, kEnd };
  Type type;
  std::string text;
  std::size_t offset;
  bool bare = false;  // kLiteral: unquoted word, may merge with neighbours
};

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<Token> lex(const std::string& text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '(') {
      tokens.push_back({Token::Type::kLParen, "(", i});
      ++i;
      continue;
    }
    if (c == ')') {
      tokens.push_back({Token::Type::kRParen, ")", i});
      ++i;
      continue;
    }
    if (c == '"') {
      const std::size_t open = i++;
      std::string content;
      while (i < n && text[i] != '"') content.push_back(text[i++]);
      if (i == n) throw ParseError("unterminated quote", open);
      ++i;  // closing quote
      if (content.empty()) throw ParseError("empty concept literal", open);
      tokens.push_back({Token::Type::kLiteral, std::move(content), open});
      continue;
    }
    const std::size_t start = i;
    std::string word;
    while (i < n) {
      const char w = text[i];
      if (std::isspace(static_cast<unsigned char>(w)) || w == '(' || w == ')' || w == '"')
        break;
      word.push_back(w);
      ++i;
    }
    const std::string lower = ascii_lower(word);
    if (lower == "and") {
      tokens.push_back({Token::Type::kAnd, std::move(word), start});
    } else if (lower == "or") {
      tokens.push_back({Token::Type::kOr, std::move(word), start});
    } else if (lower == "not") {
      tokens.push_back({Token::Type::kNot, std::move(word), start});
    } else {
      tokens.push_back({Token::Type::kLiteral, std::move(word), start, true});
    }
  }
  tokens.push_back({Token::Type::kEnd, "", n});
  return tokens;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  QueryPtr parse() {
    QueryPtr expr = parse_expr();
    if (peek().type != Token::Type::kEnd)
      throw ParseError("unexpected trailing input '" + peek().text + "'", peek().offset);
    return expr;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& advance() { return tokens_[pos_++]; }

  QueryPtr parse_expr() {
    QueryPtr lhs = parse_term();
    while (peek().type == Token::Type::kOr) {
      advance();
      lhs = make_or(std::move(lhs), parse_term());
    }
    return lhs;
  }

  QueryPtr parse_term() {
    QueryPtr lhs = parse_factor();
    while (peek().type == Token::Type::kAnd) {
      advance();
      lhs = make_and(std::move(lhs), parse_factor());
    }
    return lhs;
  }

  QueryPtr parse_factor() {
    const Token& tok = peek();
    switch (tok.type) {
      case Token::Type::kNot:
        advance();
        return make_not(parse_factor());
      case Token::Type::kLParen: {
        advance();
        QueryPtr inner = parse_expr();
        if (peek().type != Token::Type::kRParen)
          throw ParseError("expected ')'", peek().offset);
        advance();
        return inner;
      }
      case Token::Type::kLiteral: {
        std::string name = advance().text;
        if (tokens_[pos_ - 1].bare) {
          // Consecutive bare words form one multi-word concept.
          while (peek().type == Token::Type::kLiteral && peek().bare)
            name += " " + advance().text;
        }
        return make_concept(std::move(name));
      }
      default:
        throw ParseError("expected a concept, NOT, or '('", tok.offset);
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

QueryPtr parse_query(const std::string& text) { return Parser(lex(text)).parse(); }

std::string print_query(const QueryExpr& q) {
  switch (q.kind) {
    case QueryExpr::Kind::kConcept:
      return "\"" + q.name + "\"";
    case QueryExpr::Kind::kNot:
      return "(NOT " + print_query(*q.lhs) + ")";
    case QueryExpr::Kind::kAnd:
      return "(" + print_query(*q.lhs) + " AND " + print_query(*q.rhs) + ")";
    case QueryExpr::Kind::kOr:
      return "(" + print_query(*q.lhs) + " OR " + print_query(*q.rhs) + ")";
  }
  return "";
}

std::string normalize_name(const std::string& name) {
  std::string out;
  bool pending_space = false;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int edit_distance(const std::string& a, const std::string& b) {
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  std::vector<int> prev(n + 1);
  std::vector<int> cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= n; ++j) {
      const int subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

}  // namespace

void ConceptStore::add(const std::string& name, Projector p) {
  const std::string key = normalize_name(name);
  if (key.empty()) throw std::invalid_argument("concept name must be nonempty");
  if (p.p.rows() != p.p.cols()) {
    throw std::invalid_argument("concept projector must be square, got " + p.p.shape_str());
  }
  if (entries_.empty()) {
    dim_ = p.dim();
  } else if (p.dim() != dim_) {
    throw std::invalid_argument("concept '" + name + "' has dimension " +
                                std::to_string(p.dim()) + ", store holds " +
                                std::to_string(dim_));
  }
  entries_[key] = Entry{trim(name), std::move(p)};
}

bool ConceptStore::contains(const std::string& name) const {
  return entries_.count(normalize_name(name)) > 0;
}

const Projector& ConceptStore::at(const std::string& name) const {
  const std::string key = normalize_name(name);
  auto it = entries_.find(key);
  if (it != entries_.end()) return it->second.projector;

  std::vector<std::pair<int, std::string>> near;
  for (const auto& [stored_key, entry] : entries_) {
    const int d = edit_distance(key, stored_key);
    if (d <= 2) near.emplace_back(d, entry.display);
  }
  std::sort(near.begin(), near.end());
  std::string msg = "unknown concept \"" + name + "\"";
  if (!near.empty()) {
    msg += "; nearest names:";
    for (const auto& [d, display] : near) msg += " " + display;
  }
  throw std::invalid_argument(msg);
}

std::vector<std::string> ConceptStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [key, entry] : entries_) out.push_back(entry.display);
  std::sort(out.begin(), out.end());
  return out;
}

Projector eval_query(const QueryExpr& q, const ConceptStore& store) {
  switch (q.kind) {
    case QueryExpr::Kind::kConcept:
      return store.at(q.name);
    case QueryExpr::Kind::kAnd:
      return meet(eval_query(*q.lhs, store), eval_query(*q.rhs, store));
    case QueryExpr::Kind::kOr:
      return join(eval_query(*q.lhs, store), eval_query(*q.rhs, store));
    case QueryExpr::Kind::kNot:
      return complement(eval_query(*q.lhs, store));
  }
  throw std::logic_error("eval_query: malformed node");
}

std::vector<RankedConcept> rank_by_query(const QueryExpr& q, const ConceptStore& store,
                                         int k, RankDirection direction) {
  if (k < 1) throw std::invalid_argument("rank_by_query: k must be >= 1");
  if (store.empty()) throw std::invalid_argument("rank_by_query: empty store");

  const Projector query_proj = eval_query(q, store);
  // An annihilated conditioned subspace (e.g. the hard-projector query
  // `x AND NOT x`, whose trace vanishes) cannot be normalized; fall back to
  // the raw overlap so every candidate still gets a near-zero score instead
  // of the ranking normalizing rounding noise into junk. Hard projectors of
  // trained spans are idempotent only to ~1e-9, so the cutoff sits well
  // above that and well below any genuine subspace trace.
  auto score_against = [](const Projector& conditioned, const Projector& other) {
    if (trace(conditioned.p) <= 1e-8) return overlap(conditioned, other);
    return inclusion_score(conditioned, other);
  };
  std::vector<RankedConcept> ranked;
  ranked.reserve(static_cast<std::size_t>(store.size()));
  for (const std::string& name : store.names()) {
    const Projector& candidate = store.at(name);
    const double score = direction == RankDirection::kQueryAsConditioned
                             ? score_against(query_proj, candidate)
                             : score_against(candidate, query_proj);
    ranked.push_back({name, score});
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedConcept& a, const RankedConcept& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.name < b.name;
  });
  if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<std::size_t>(k));
  return ranked;
}

}  // namespace spanlat
