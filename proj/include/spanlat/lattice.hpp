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

#ifndef SPANLAT_LATTICE_HPP
#define SPANLAT_LATTICE_HPP

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "spanlat/projector.hpp"

namespace spanlat {

/// Symmetrized product ½(PQ + QP). Equals the exact intersection projector
/// when P and Q commute; otherwise a contraction, not re-projected. Symmetric
/// in its arguments bit for bit.
Projector meet(const Projector& p, const Projector& q);

/// P + Q − meet(P, Q). Exact span-sum projector in the commuting case.
Projector join(const Projector& p, const Projector& q);

/// Orthogonal complement I − P.
Projector complement(const Projector& p);

Projector lattice_top(int d);     // identity: the whole space
Projector lattice_bottom(int d);  // zero: the trivial subspace

/// Boolean query over named concepts. Built by the parser or the make_*
/// helpers; immutable once constructed.
struct QueryExpr {
  enum class Kind { kConcept, kAnd, kOr, kNot };

  Kind kind;
  std::string name;  // kConcept only
  std::shared_ptr<const QueryExpr> lhs;
  std::shared_ptr<const QueryExpr> rhs;  // unused for kNot
};

using QueryPtr = std::shared_ptr<const QueryExpr>;

QueryPtr make_concept(std::string name);  // name must be nonempty
QueryPtr make_and(QueryPtr lhs, QueryPtr rhs);
QueryPtr make_or(QueryPtr lhs, QueryPtr rhs);
QueryPtr make_not(QueryPtr child);

/// Structural equality.
bool same_query(const QueryExpr& a, const QueryExpr& b);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Grammar: expr := term (OR term)*; term := factor (AND factor)*;
/// factor := NOT factor | '(' expr ')' | literal. NOT binds tighter than AND,
/// AND tighter than OR; both connectives are left-associative and keywords
/// are case-insensitive. A literal is either a double-quoted string (no
/// escapes) or a run of bare words, which lets `a city street AND night`
/// mean And("a city street", "night"). Malformed input raises ParseError
/// carrying the byte offset.
QueryPtr parse_query(const std::string& text);

/// Fully parenthesized, quoted form, e.g. `("a" AND (NOT "b"))`. Re-parsing
/// the output yields a structurally identical tree as long as concept names
/// contain no double quote.
std::string print_query(const QueryExpr& q);

/// Trimmed, case-folded, inner whitespace collapsed. Concept lookup works on
/// normalized names, so `" Night  Sky "` and `night sky` are the same key.
std::string normalize_name(const std::string& name);

/// Named concept subspaces, all sharing one ambient dimension.
class ConceptStore {
 public:
  /// Re-adding a name (up to normalization) replaces the projector.
  void add(const std::string& name, Projector p);

  bool contains(const std::string& name) const;

  /// Throws std::invalid_argument for unknown names, listing stored names
  /// within Levenshtein distance 2 when there are any.
  const Projector& at(const std::string& name) const;

  std::vector<std::string> names() const;  // display names, sorted
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  int dim() const { return dim_; }

 private:
  struct Entry {
    std::string display;
    Projector projector;
  };
  std::map<std::string, Entry> entries_;  // keyed by normalized name
  int dim_ = 0;
};

/// Recursive evaluation: And → meet, Or → join, Not → complement.
Projector eval_query(const QueryExpr& q, const ConceptStore& store);

struct RankedConcept {
  std::string name;
  double score;
};

/// Which side of the normalized inclusion score the query subspace occupies.
enum class RankDirection {
  kQueryAsConditioned,     // score = inclusion_score(query, candidate)
  kCandidateAsConditioned  // score = inclusion_score(candidate, query)
};

/// Scores every stored concept against the evaluated query and returns the
/// top k, descending, ties broken by name ascending. Throws on an empty
/// store or k < 1. If the conditioned subspace has vanished (trace <= 1e-8,
/// e.g. a hard-projector query ANDed with its own NOT), scores fall back to
/// the unnormalized overlap, which is then near zero for every candidate.
std::vector<RankedConcept> rank_by_query(
    const QueryExpr& q, const ConceptStore& store, int k,
    RankDirection direction = RankDirection::kQueryAsConditioned);

}  // namespace spanlat

#endif  // SPANLAT_LATTICE_HPP
