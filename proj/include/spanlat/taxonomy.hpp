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

#ifndef SPANLAT_TAXONOMY_HPP
#define SPANLAT_TAXONOMY_HPP

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace spanlat {

using Rng = std::mt19937_64;
using NodeId = int;

/// Directed edge (child, parent): the specific concept points at the general
/// one, and the child's subspace is the one expected to be included in the
/// parent's. Every loss and metric uses this orientation.
struct Edge {
  NodeId child;
  NodeId parent;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// A DAG of named nodes plus, once computed, its transitive closure.
/// Immutable after construction.
class Taxonomy {
 public:
  Taxonomy() = default;

  /// Node ids are assigned in order of first appearance. Edges are
  /// deduplicated; a cycle (including a self-loop) raises an error naming it.
  static Taxonomy from_edge_list(
      const std::vector<std::pair<std::string, std::string>>& edges);

  int num_nodes() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& node_names() const { return names_; }
  NodeId id_of(const std::string& name) const;  // throws on unknown name
  const std::string& name_of(NodeId id) const;

  const std::set<Edge>& basic_edges() const { return basic_; }

  /// Empty until transitive_closure() has produced this taxonomy.
  const std::set<Edge>& closure_edges() const { return closure_; }
  bool closure_computed() const { return closed_; }
  bool in_closure(NodeId child, NodeId parent) const {
    return closure_.count(Edge{child, parent}) > 0;
  }

 private:
  std::vector<std::string> names_;
  std::map<std::string, NodeId> ids_;
  std::set<Edge> basic_;
  std::set<Edge> closure_;
  bool closed_ = false;

  friend Taxonomy transitive_closure(const Taxonomy& t);
};

/// Reads `child<TAB>parent` lines; `#` comments and blank lines are skipped,
/// CRLF tolerated. Errors carry the 1-based line number; cycles are detected
/// on load.
Taxonomy load_edges(const std::string& path);

/// All (descendant, ancestor) pairs reachable through basic edges, computed
/// by memoized DFS. Always derived from the basic edges, so the operation is
/// idempotent.
Taxonomy transitive_closure(const Taxonomy& t);

/// Number of closure children per node, indexed by id. Requires the closure.
std::vector<int> descendant_counts(const Taxonomy& t);

/// Node rank = length of the longest strictly descending path to a leaf
/// (0 for leaves). Grows with generality and, on trees, is monotone in the
/// descendant count. Requires the closure.
std::vector<int> taxonomy_ranks(const Taxonomy& t);

/// `count` distinct nodes v' with v' != u and neither (u,v') nor (v',u) in
/// the closure, sampled uniformly. Throws if fewer than `count` candidates
/// exist, reporting how many there are.
std::vector<NodeId> sample_reconstruction_negatives(const Taxonomy& t, NodeId u,
                                                    int count, Rng& rng);

struct LinkPredSplit {
  std::vector<Edge> train;  // all basic edges plus covered non-basic ones
  std::vector<Edge> val;    // non-basic only
  std::vector<Edge> test;   // non-basic only
  double coverage = 0.0;
  double val_frac = 0.0;
  double test_frac = 0.0;
  std::uint64_t seed = 0;
};

/// Shuffles the non-basic closure edges and carves out floor(val_frac*N) for
/// validation, floor(test_frac*N) for test, and floor(coverage*N) extra
/// training edges from what remains, N being the non-basic count. Basic
/// edges always train. Throws when the requested counts exceed the pool.
LinkPredSplit make_linkpred_split(const Taxonomy& t, double coverage, double val_frac,
                                  double test_frac, std::uint64_t seed);

enum class NegativeMode {
  kTrain,  // each negative corrupts head or tail uniformly
  kEval    // exactly count/2 corrupted heads then count/2 corrupted tails
};

/// Corruptions (w,parent) or (child,w) of `edge` that land outside the
/// closure and off the diagonal; duplicates may occur. Rejection-samples and
/// throws after 1000*count failed draws. Eval mode requires an even count.
std::vector<Edge> sample_linkpred_negatives(const Taxonomy& t, Edge edge, int count,
                                            NegativeMode mode, Rng& rng);

/// Plain-text manifest: fractions, seed, and each split's edges by name.
void save_split_manifest(const LinkPredSplit& split, const Taxonomy& t,
                         const std::string& path);
LinkPredSplit load_split_manifest(const Taxonomy& t, const std::string& path);

// Synthetic fixtures. All return un-closed taxonomies.
/// Full binary tree: heap-numbered nodes n1..n(2^(depth+1)-1), each child
/// pointing at its parent; depth 0 is a single root.
Taxonomy make_binary_tree(int depth);
/// Chain c0 -> c1 -> ... -> c(n-1).
Taxonomy make_chain(int n);
/// Layered DAG: nodes split into consecutive blocks, every non-top node gets
/// one guaranteed parent in the next layer up plus independent extra edges
/// to strictly higher layers with probability extra_edge_prob.
Taxonomy make_random_dag(int nodes, int layers, double extra_edge_prob,
                         std::uint64_t seed);

}  // namespace spanlat

#endif  // SPANLAT_TAXONOMY_HPP
