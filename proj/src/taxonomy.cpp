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

#include "spanlat/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace spanlat {

namespace {

void require_closed(const Taxonomy& t, const char* op) {
  if (!t.closure_computed())
    throw std::logic_error(std::string(op) + ": transitive closure not computed");
}

void require_node(const Taxonomy& t, NodeId id, const char* op) {
  if (id < 0 || id >= t.num_nodes())
    throw std::invalid_argument(std::string(op) + ": node id " + std::to_string(id) +
                                " out of range");
}

// First cycle reachable in the child->parent graph, as a node sequence
// ending where it started; empty if the graph is acyclic.
std::vector<NodeId> find_cycle(int n, const std::vector<std::vector<NodeId>>& adj) {
  std::vector<int> color(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<NodeId> path;
  for (int start = 0; start < n; ++start) {
    if (color[start] != 0) continue;
    std::vector<std::pair<NodeId, std::size_t>> frames;
    frames.emplace_back(start, 0);
    color[start] = 1;
    path.push_back(start);
    while (!frames.empty()) {
      const NodeId u = frames.back().first;
      std::size_t& next = frames.back().second;
      if (next < adj[u].size()) {
        const NodeId v = adj[u][next++];
        if (color[v] == 1) {
          auto it = std::find(path.begin(), path.end(), v);
          std::vector<NodeId> cycle(it, path.end());
          cycle.push_back(v);
          return cycle;
        }
        if (color[v] == 0) {
          color[v] = 1;
          path.push_back(v);
          frames.emplace_back(v, 0);
        }
      } else {
        color[u] = 2;
        path.pop_back();
        frames.pop_back();
      }
    }
  }
  return {};
}

}  // namespace

Taxonomy Taxonomy::from_edge_list(
    const std::vector<std::pair<std::string, std::string>>& edges) {
  Taxonomy t;
  auto intern = [&t](const std::string& name) -> NodeId {
    auto [it, inserted] = t.ids_.emplace(name, static_cast<NodeId>(t.names_.size()));
    if (inserted) t.names_.push_back(name);
    return it->second;
  };
  for (const auto& [child, parent] : edges) {
    if (child.empty() || parent.empty())
      throw std::invalid_argument("edge endpoints must be nonempty names");
    t.basic_.insert(Edge{intern(child), intern(parent)});
  }

  std::vector<std::vector<NodeId>> adj(t.num_nodes());
  for (const Edge& e : t.basic_) adj[e.child].push_back(e.parent);
  const std::vector<NodeId> cycle = find_cycle(t.num_nodes(), adj);
  if (!cycle.empty()) {
    std::string msg = "cycle detected:";
    for (std::size_t i = 0; i < cycle.size(); ++i)
      msg += (i == 0 ? " " : " -> ") + t.names_[static_cast<std::size_t>(cycle[i])];
    throw std::invalid_argument(msg);
  }
  return t;
}

NodeId Taxonomy::id_of(const std::string& name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) throw std::invalid_argument("unknown node '" + name + "'");
  return it->second;
}

const std::string& Taxonomy::name_of(NodeId id) const {
  require_node(*this, id, "name_of");
  return names_[static_cast<std::size_t>(id)];
}

Taxonomy load_edges(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list '" + path + "'");
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected exactly one tab separating child and parent");
    }
    std::string child = line.substr(0, tab);
    std::string parent = line.substr(tab + 1);
    if (child.empty() || parent.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": empty child or parent name");
    }
    edges.emplace_back(std::move(child), std::move(parent));
  }
  try {
    return Taxonomy::from_edge_list(edges);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

Taxonomy transitive_closure(const Taxonomy& t) {
  const int n = t.num_nodes();
  std::vector<std::vector<NodeId>> parents(n);
  for (const Edge& e : t.basic_edges()) parents[e.child].push_back(e.parent);

  std::vector<std::set<NodeId>> ancestors(n);
  std::vector<char> done(n, 0);
  std::function<void(NodeId)> visit = [&](NodeId u) {
    if (done[u]) return;
    for (NodeId p : parents[u]) {
      visit(p);
      ancestors[u].insert(p);
      ancestors[u].insert(ancestors[p].begin(), ancestors[p].end());
    }
    done[u] = 1;
  };
  for (NodeId u = 0; u < n; ++u) visit(u);

  Taxonomy out = t;
  out.closure_.clear();
  for (NodeId u = 0; u < n; ++u)
    for (NodeId a : ancestors[u]) out.closure_.insert(Edge{u, a});
  out.closed_ = true;
  return out;
}

std::vector<int> descendant_counts(const Taxonomy& t) {
  require_closed(t, "descendant_counts");
  std::vector<int> counts(static_cast<std::size_t>(t.num_nodes()), 0);
  for (const Edge& e : t.closure_edges()) ++counts[static_cast<std::size_t>(e.parent)];
  return counts;
}

std::vector<int> taxonomy_ranks(const Taxonomy& t) {
  require_closed(t, "taxonomy_ranks");
  const int n = t.num_nodes();
  std::vector<std::vector<NodeId>> children(n);
  for (const Edge& e : t.basic_edges()) children[e.parent].push_back(e.child);

  std::vector<int> rank(static_cast<std::size_t>(n), -1);
  std::function<int(NodeId)> height = [&](NodeId u) -> int {
    int& r = rank[static_cast<std::size_t>(u)];
    if (r >= 0) return r;
    r = 0;
    for (NodeId c : children[u]) r = std::max(r, height(c) + 1);
    return r;
  };
  for (NodeId u = 0; u < n; ++u) height(u);
  return rank;
}

std::vector<NodeId> sample_reconstruction_negatives(const Taxonomy& t, NodeId u,
                                                    int count, Rng& rng) {
  require_closed(t, "sample_reconstruction_negatives");
  require_node(t, u, "sample_reconstruction_negatives");
  if (count < 0) throw std::invalid_argument("negative count must be >= 0");

  std::vector<NodeId> candidates;
  for (NodeId v = 0; v < t.num_nodes(); ++v) {
    if (v == u || t.in_closure(u, v) || t.in_closure(v, u)) continue;
    candidates.push_back(v);
  }
  if (static_cast<int>(candidates.size()) < count) {
    throw std::invalid_argument(
        "cannot sample " + std::to_string(count) + " negatives for node '" +
        t.name_of(u) + "': only " + std::to_string(candidates.size()) +
        " candidates available");
  }
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(count));
  std::sample(candidates.begin(), candidates.end(), std::back_inserter(out), count, rng);
  return out;
}

LinkPredSplit make_linkpred_split(const Taxonomy& t, double coverage, double val_frac,
                                  double test_frac, std::uint64_t seed) {
  require_closed(t, "make_linkpred_split");
  for (double f : {coverage, val_frac, test_frac}) {
    if (!(f >= 0.0 && f <= 1.0))
      throw std::invalid_argument("split fractions must lie in [0,1]");
  }

  std::vector<Edge> non_basic;
  std::set_difference(t.closure_edges().begin(), t.closure_edges().end(),
                      t.basic_edges().begin(), t.basic_edges().end(),
                      std::back_inserter(non_basic));
  const auto pool = static_cast<double>(non_basic.size());
  const int nv = static_cast<int>(val_frac * pool);
  const int nt = static_cast<int>(test_frac * pool);
  const int nc = static_cast<int>(coverage * pool);
  if (nv + nt + nc > static_cast<int>(non_basic.size())) {
    throw std::invalid_argument(
        "val+test+coverage request " + std::to_string(nv + nt + nc) +
        " non-basic edges but only " + std::to_string(non_basic.size()) + " exist");
  }

  Rng rng(seed);
  std::shuffle(non_basic.begin(), non_basic.end(), rng);

  LinkPredSplit split;
  split.coverage = coverage;
  split.val_frac = val_frac;
  split.test_frac = test_frac;
  split.seed = seed;
  split.val.assign(non_basic.begin(), non_basic.begin() + nv);
  split.test.assign(non_basic.begin() + nv, non_basic.begin() + nv + nt);
  split.train.assign(t.basic_edges().begin(), t.basic_edges().end());
  split.train.insert(split.train.end(), non_basic.begin() + nv + nt,
                     non_basic.begin() + nv + nt + nc);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<Edge> sample_linkpred_negatives(const Taxonomy& t, Edge edge, int count,
                                            NegativeMode mode, Rng& rng) {
  require_closed(t, "sample_linkpred_negatives");
  require_node(t, edge.child, "sample_linkpred_negatives");
  require_node(t, edge.parent, "sample_linkpred_negatives");
  if (count < 0) throw std::invalid_argument("negative count must be >= 0");
  if (mode == NegativeMode::kEval && count % 2 != 0)
    throw std::invalid_argument("eval negative count must be even, got " +
                                std::to_string(count));

  const long max_draws = 1000L * count;
  long draws = 0;
  std::uniform_int_distribution<NodeId> node_pick(0, t.num_nodes() - 1);
  std::uniform_int_distribution<int> side_pick(0, 1);
  Edge last{0, 0};

  auto try_once = [&](bool corrupt_head) -> bool {
    if (++draws > max_draws) {
      throw std::runtime_error(
          "could not sample " + std::to_string(count) + " negatives for edge " +
          t.name_of(edge.child) + " -> " + t.name_of(edge.parent) + " within " +
          std::to_string(max_draws) + " draws");
    }
    const NodeId w = node_pick(rng);
    last = corrupt_head ? Edge{w, edge.parent} : Edge{edge.child, w};
    if (last.child == last.parent || last == edge) return false;
    return !t.in_closure(last.child, last.parent);
  };

  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(count));
  if (mode == NegativeMode::kTrain) {
    // The side is redrawn on every rejection, so one impossible side (for
    // example corrupting the head of a star edge) cannot starve the sampler.
    for (int i = 0; i < count; ++i) {
      while (!try_once(side_pick(rng) == 0)) {
      }
      out.push_back(last);
    }
  } else {
    for (int i = 0; i < count; ++i) {
      const bool corrupt_head = i < count / 2;
      while (!try_once(corrupt_head)) {
      }
      out.push_back(last);
    }
  }
  return out;
}

namespace {

void write_edge_section(std::ostream& out, const char* label,
                        const std::vector<Edge>& edges, const Taxonomy& t) {
  out << label << ' ' << edges.size() << '\n';
  for (const Edge& e : edges)
    out << t.name_of(e.child) << '\t' << t.name_of(e.parent) << '\n';
}

}  // namespace

void save_split_manifest(const LinkPredSplit& split, const Taxonomy& t,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write split manifest '" + path + "'");
  out << "# link-prediction split manifest\n";
  out << std::setprecision(17);
  out << "seed " << split.seed << '\n';
  out << "coverage " << split.coverage << '\n';
  out << "val_frac " << split.val_frac << '\n';
  out << "test_frac " << split.test_frac << '\n';
  write_edge_section(out, "train", split.train, t);
  write_edge_section(out, "val", split.val, t);
  write_edge_section(out, "test", split.test, t);
  if (!out) throw std::runtime_error("failed writing split manifest '" + path + "'");
}

LinkPredSplit load_split_manifest(const Taxonomy& t, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split manifest '" + path + "'");
  LinkPredSplit split;
  std::string line;
  int lineno = 0;

  auto fail = [&](const std::string& why) -> std::runtime_error {
    return std::runtime_error(path + ":" + std::to_string(lineno) + ": " + why);
  };
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      return true;
    }
    return false;
  };
  auto read_scalar = [&](const char* key) -> std::string {
    if (!next_line()) throw fail(std::string("missing '") + key + "' line");
    std::istringstream ss(line);
    std::string k, v;
    if (!(ss >> k >> v) || k != key) throw fail(std::string("expected '") + key + "' line");
    return v;
  };

  split.seed = std::stoull(read_scalar("seed"));
  split.coverage = std::stod(read_scalar("coverage"));
  split.val_frac = std::stod(read_scalar("val_frac"));
  split.test_frac = std::stod(read_scalar("test_frac"));

  for (auto [label, edges] : {std::pair{"train", &split.train}, {"val", &split.val},
                              {"test", &split.test}}) {
    const std::string header = read_scalar(label);
    long expected = 0;
    try {
      expected = std::stol(header);
    } catch (const std::exception&) {
      throw fail(std::string("bad ") + label + " count '" + header + "'");
    }
    for (long i = 0; i < expected; ++i) {
      if (!next_line()) throw fail(std::string("truncated ") + label + " section");
      const std::size_t tab = line.find('\t');
      if (tab == std::string::npos) throw fail("expected child<TAB>parent edge");
      edges->push_back(
          Edge{t.id_of(line.substr(0, tab)), t.id_of(line.substr(tab + 1))});
    }
  }
  if (next_line()) throw fail("unexpected trailing content");
  return split;
}

Taxonomy make_binary_tree(int depth) {
  if (depth < 1) throw std::invalid_argument("binary tree depth must be >= 1");
  std::vector<std::pair<std::string, std::string>> edges;
  const int count = (1 << (depth + 1)) - 1;
  for (int i = 2; i <= count; ++i)
    edges.emplace_back("n" + std::to_string(i), "n" + std::to_string(i / 2));
  return Taxonomy::from_edge_list(edges);
}

Taxonomy make_chain(int n) {
  if (n < 2) throw std::invalid_argument("chain needs at least 2 nodes");
  std::vector<std::pair<std::string, std::string>> edges;
  for (int i = 0; i + 1 < n; ++i)
    edges.emplace_back("c" + std::to_string(i), "c" + std::to_string(i + 1));
  return Taxonomy::from_edge_list(edges);
}

Taxonomy make_random_dag(int nodes, int layers, double extra_edge_prob,
                         std::uint64_t seed) {
  if (layers < 2 || nodes < layers)
    throw std::invalid_argument("need nodes >= layers >= 2");
  if (!(extra_edge_prob >= 0.0 && extra_edge_prob < 1.0))
    throw std::invalid_argument("extra_edge_prob must be in [0,1)");

  const auto layer_of = [&](int i) {
    return static_cast<int>(static_cast<long>(i) * layers / nodes);
  };
  std::vector<std::vector<int>> by_layer(static_cast<std::size_t>(layers));
  for (int i = 0; i < nodes; ++i) by_layer[static_cast<std::size_t>(layer_of(i))].push_back(i);

  Rng rng(seed);
  std::bernoulli_distribution extra(extra_edge_prob);
  auto name = [](int i) { return "d" + std::to_string(i); };

  std::set<std::pair<int, int>> edge_ids;
  for (int u = 0; u < nodes; ++u) {
    const int lu = layer_of(u);
    if (lu + 1 < layers) {
      const auto& up = by_layer[static_cast<std::size_t>(lu + 1)];
      std::uniform_int_distribution<std::size_t> pick(0, up.size() - 1);
      edge_ids.emplace(u, up[pick(rng)]);
    }
    for (int w = 0; w < nodes; ++w)
      if (layer_of(w) > lu && extra(rng)) edge_ids.emplace(u, w);
  }
  // Top-layer nodes that no one picked still need to appear in the graph.
  std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
  for (const auto& [c, p] : edge_ids) seen[static_cast<std::size_t>(c)] = seen[static_cast<std::size_t>(p)] = 1;
  for (int w : by_layer[static_cast<std::size_t>(layers - 1)]) {
    if (seen[static_cast<std::size_t>(w)]) continue;
    const auto& below = by_layer[static_cast<std::size_t>(layers - 2)];
    std::uniform_int_distribution<std::size_t> pick(0, below.size() - 1);
    edge_ids.emplace(below[pick(rng)], w);
  }

  std::vector<std::pair<std::string, std::string>> edges;
  edges.reserve(edge_ids.size());
  for (const auto& [c, p] : edge_ids) edges.emplace_back(name(c), name(p));
  return Taxonomy::from_edge_list(edges);
}

}  // namespace spanlat
