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

#include "spanlat/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "spanlat/autodiff.hpp"

namespace spanlat {

namespace {

constexpr double kDegenerateTrace = 1e-12;

void require_table(const EmbeddingTable& table) {
  if (table.params.empty()) throw std::invalid_argument("embedding table has no nodes");
  if (table.names.size() != table.params.size()) {
    throw std::invalid_argument("embedding table holds " + std::to_string(table.names.size()) +
                                " names for " + std::to_string(table.params.size()) +
                                " span matrices");
  }
  const Matrix& first = table.params.front();
  for (std::size_t i = 0; i < table.params.size(); ++i) {
    if (!table.params[i].same_shape(first)) {
      throw std::invalid_argument("span for node \"" + table.names[i] + "\" is " +
                                  table.params[i].shape_str() + ", expected " +
                                  first.shape_str());
    }
  }
  if (static_cast<int>(table.reg.lambda_diag.size()) != first.cols() ||
      !table.reg.strictly_positive()) {
    throw std::invalid_argument("table ridge must have " + std::to_string(first.cols()) +
                                " strictly positive entries");
  }
}

void require_node(const EmbeddingTable& table, NodeId id) {
  if (id < 0 || id >= table.num_nodes()) {
    throw std::invalid_argument("node id " + std::to_string(id) + " outside table of " +
                                std::to_string(table.num_nodes()));
  }
}

void require_match(const EmbeddingTable& table, const Taxonomy& t) {
  require_table(table);
  if (table.num_nodes() != t.num_nodes()) {
    throw std::invalid_argument("table has " + std::to_string(table.num_nodes()) +
                                " nodes but the taxonomy has " + std::to_string(t.num_nodes()));
  }
  for (NodeId id = 0; id < t.num_nodes(); ++id) {
    if (table.names[id] != t.name_of(id)) {
      throw std::invalid_argument("node " + std::to_string(id) + " is \"" + table.names[id] +
                                  "\" in the table but \"" + t.name_of(id) +
                                  "\" in the taxonomy");
    }
  }
}

Matrix soft_value(const Matrix& x, const Regularizer& reg) {
  return soft_projector(SpanMatrix{x}, reg).p;
}

/// All soft projector values, or only the flagged ones when touched is
/// non-null. Independent per node, so the loop parallelizes cleanly.
std::vector<Matrix> soft_values(const EmbeddingTable& table, const std::vector<char>* touched) {
  const int n = table.num_nodes();
  std::vector<Matrix> proj(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int id = 0; id < n; ++id) {
    if (touched == nullptr || (*touched)[static_cast<std::size_t>(id)])
      proj[static_cast<std::size_t>(id)] = soft_value(table.params[static_cast<std::size_t>(id)], table.reg);
  }
  return proj;
}

/// Pulls one node's projector adjoint back to its span through the recorded
/// projector graph.
Matrix span_backward(const Matrix& x, const Regularizer& reg, const Matrix& pbar) {
  ad::Tape tape;
  ad::Var leaf = tape.leaf(x);
  ad::Var proj = traced_soft_projector(tape, leaf, reg);
  ad::Var paired = tape.trace(tape.matmul(proj, tape.constant(transpose(pbar))));
  ad::GradientMap grads = tape.backward(paired);
  return grads.at(leaf.id);
}

void axpy(Matrix& acc, double factor, const Matrix& m) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += factor * m.data()[i];
}

/// Adjoint accumulator per node; matrices materialize on first touch.
class ProjectorAdjoints {
 public:
  ProjectorAdjoints(int nodes, int dim) : dim_(dim), pbar_(static_cast<std::size_t>(nodes)) {}

  void add(NodeId id, double factor, const Matrix& m) {
    Matrix& acc = pbar_[static_cast<std::size_t>(id)];
    if (acc.rows() == 0) acc = Matrix(dim_, dim_);
    axpy(acc, factor, m);
  }

  void add_diag(NodeId id, double factor) {
    Matrix& acc = pbar_[static_cast<std::size_t>(id)];
    if (acc.rows() == 0) acc = Matrix(dim_, dim_);
    for (int i = 0; i < dim_; ++i) acc(i, i) += factor;
  }

  const Matrix& at(NodeId id) const { return pbar_[static_cast<std::size_t>(id)]; }
  bool touched(NodeId id) const { return pbar_[static_cast<std::size_t>(id)].rows() != 0; }

 private:
  int dim_;
  std::vector<Matrix> pbar_;
};

/// Finishes a staged kernel: maps every accumulated projector adjoint back
/// to its span, scaled by `factor`, and collects the gradients in node
/// order. Nodes in `involved` without an adjoint get exact zeros, matching
/// the full-tape implementations.
std::map<NodeId, Matrix> collect_span_grads(const EmbeddingTable& table,
                                            const std::vector<NodeId>& involved,
                                            const ProjectorAdjoints& adjoints, double factor) {
  std::vector<Matrix> buffer(involved.size());
  const int count = static_cast<int>(involved.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < count; ++i) {
    const NodeId id = involved[static_cast<std::size_t>(i)];
    if (adjoints.touched(id)) {
      buffer[static_cast<std::size_t>(i)] = span_backward(
          table.params[static_cast<std::size_t>(id)], table.reg,
          factor == 1.0 ? adjoints.at(id) : scale(adjoints.at(id), factor));
    } else {
      buffer[static_cast<std::size_t>(i)] =
          Matrix(table.ambient_dim(), table.num_vectors());
    }
  }
  std::map<NodeId, Matrix> grads;
  for (int i = 0; i < count; ++i)
    grads.emplace(involved[static_cast<std::size_t>(i)], std::move(buffer[static_cast<std::size_t>(i)]));
  return grads;
}

std::vector<NodeId> flagged_ids(const std::vector<char>& touched) {
  std::vector<NodeId> ids;
  for (std::size_t id = 0; id < touched.size(); ++id)
    if (touched[id]) ids.push_back(static_cast<NodeId>(id));
  return ids;
}

void require_unit_interval(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie strictly in (0,1), got " +
                                std::to_string(v));
  }
}

double conditioned_trace(const Matrix& proj, const std::string& name) {
  const double t = trace(proj);
  if (t <= kDegenerateTrace) {
    throw std::invalid_argument("inclusion_score: degenerate subspace, trace " +
                                std::to_string(t) + " (node \"" + name + "\")");
  }
  return t;
}

}  // namespace

Projector EmbeddingTable::soft(NodeId id) const {
  require_node(*this, id);
  return soft_projector(SpanMatrix{params[static_cast<std::size_t>(id)]}, reg);
}

EmbeddingTable init_table(const std::vector<std::string>& names, int d, int n, double std,
                          std::uint64_t seed, const Regularizer& reg) {
  if (names.empty()) throw std::invalid_argument("init_table needs at least one node");
  for (const std::string& name : names)
    if (name.empty()) throw std::invalid_argument("node names must be nonempty");
  if (d < 1 || n < 1) {
    throw std::invalid_argument("span shape must be at least 1x1, got " + std::to_string(d) +
                                "x" + std::to_string(n));
  }
  if (!(std > 0.0) || !std::isfinite(std)) {
    throw std::invalid_argument("init std must be finite and > 0, got " + std::to_string(std));
  }
  if (static_cast<int>(reg.lambda_diag.size()) != n || !reg.strictly_positive()) {
    throw std::invalid_argument("ridge must have " + std::to_string(n) +
                                " strictly positive entries");
  }
  EmbeddingTable table;
  table.names = names;
  table.reg = reg;
  table.seed = seed;
  table.step = 0;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, std);
  table.params.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    Matrix m(d, n);
    for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = gauss(rng);
    table.params.push_back(std::move(m));
  }
  return table;
}

LossGrads infonce_grads(const EmbeddingTable& table, NodeId anchor, NodeId positive,
                        const std::vector<NodeId>& negatives, double temperature) {
  require_table(table);
  require_node(table, anchor);
  require_node(table, positive);
  for (NodeId id : negatives) require_node(table, id);
  if (negatives.empty()) throw std::invalid_argument("infonce_grads needs at least one negative");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be > 0, got " + std::to_string(temperature));
  }

  ad::Tape tape;
  std::map<NodeId, ad::Var> leaves;
  std::map<NodeId, ad::Var> projs;
  auto proj_of = [&](NodeId id) {
    auto it = projs.find(id);
    if (it == projs.end()) {
      ad::Var leaf = tape.leaf(table.params[static_cast<std::size_t>(id)]);
      leaves.emplace(id, leaf);
      it = projs.emplace(id, traced_soft_projector(tape, leaf, table.reg)).first;
    }
    return it->second;
  };

  ad::Var p_anchor = proj_of(anchor);
  auto logit = [&](NodeId other) {
    ad::Var s = traced_overlap(tape, p_anchor, proj_of(other));
    return temperature == 1.0 ? s : tape.scale(s, 1.0 / temperature);
  };
  std::vector<ad::Var> logits;
  logits.push_back(logit(positive));
  for (NodeId id : negatives) logits.push_back(logit(id));

  double max_logit = logits.front().scalar();
  for (const ad::Var& l : logits) max_logit = std::max(max_logit, l.scalar());
  ad::Var shift = tape.scalar_constant(max_logit);
  ad::Var z = tape.exp(tape.sub(logits.front(), shift));
  for (std::size_t k = 1; k < logits.size(); ++k)
    z = tape.add(z, tape.exp(tape.sub(logits[k], shift)));
  ad::Var loss = tape.sub(tape.add(shift, tape.log(z)), logits.front());

  ad::GradientMap grads = tape.backward(loss);
  LossGrads out;
  out.value = loss.scalar();
  for (const auto& [id, leaf] : leaves) out.grads.emplace(id, grads.at(leaf.id));
  return out;
}

LossGrads infonce_batch_grads(const EmbeddingTable& table, const std::vector<Edge>& edges,
                              const std::vector<std::vector<NodeId>>& negatives,
                              double temperature) {
  require_table(table);
  if (edges.empty()) throw std::invalid_argument("batch has no edges");
  if (negatives.size() != edges.size()) {
    throw std::invalid_argument("batch pairs " + std::to_string(edges.size()) + " edges with " +
                                std::to_string(negatives.size()) + " negative lists");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be > 0, got " + std::to_string(temperature));
  }
  std::vector<char> touched(static_cast<std::size_t>(table.num_nodes()), 0);
  auto mark = [&](NodeId id) {
    require_node(table, id);
    touched[static_cast<std::size_t>(id)] = 1;
  };
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (negatives[i].empty())
      throw std::invalid_argument("edge " + std::to_string(i) + " has no negatives");
    mark(edges[i].child);
    mark(edges[i].parent);
    for (NodeId id : negatives[i]) mark(id);
  }

  const std::vector<Matrix> proj = soft_values(table, &touched);
  ProjectorAdjoints adjoints(table.num_nodes(), table.ambient_dim());
  double total = 0.0;
  std::vector<double> logits;
  std::vector<double> weights;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const NodeId anchor = edges[i].child;
    logits.clear();
    logits.push_back(dot(proj[static_cast<std::size_t>(anchor)],
                         proj[static_cast<std::size_t>(edges[i].parent)]) / temperature);
    for (NodeId id : negatives[i])
      logits.push_back(dot(proj[static_cast<std::size_t>(anchor)],
                           proj[static_cast<std::size_t>(id)]) / temperature);
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    weights.clear();
    double z = 0.0;
    for (double l : logits) {
      weights.push_back(std::exp(l - max_logit));
      z += weights.back();
    }
    total += max_logit + std::log(z) - logits.front();
    for (std::size_t k = 0; k < weights.size(); ++k) {
      // d loss / d overlap_k, with the positive occupying slot 0.
      const double coef = (weights[k] / z - (k == 0 ? 1.0 : 0.0)) / temperature;
      const NodeId other = k == 0 ? edges[i].parent : negatives[i][k - 1];
      adjoints.add(anchor, coef, proj[static_cast<std::size_t>(other)]);
      adjoints.add(other, coef, proj[static_cast<std::size_t>(anchor)]);
    }
  }

  const double inv = 1.0 / static_cast<double>(edges.size());
  LossGrads out;
  out.value = total * inv;
  out.grads = collect_span_grads(table, flagged_ids(touched), adjoints, inv);
  return out;
}

LossGrads infonce_batch_reference(const EmbeddingTable& table, const std::vector<Edge>& edges,
                                  const std::vector<std::vector<NodeId>>& negatives,
                                  double temperature) {
  if (edges.empty()) throw std::invalid_argument("batch has no edges");
  if (negatives.size() != edges.size()) {
    throw std::invalid_argument("batch pairs " + std::to_string(edges.size()) + " edges with " +
                                std::to_string(negatives.size()) + " negative lists");
  }
  LossGrads out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    LossGrads one =
        infonce_grads(table, edges[i].child, edges[i].parent, negatives[i], temperature);
    out.value += one.value;
    for (auto& [id, g] : one.grads) {
      auto [it, inserted] = out.grads.try_emplace(id, std::move(g));
      if (!inserted) axpy(it->second, 1.0, g);
    }
  }
  const double inv = 1.0 / static_cast<double>(edges.size());
  out.value *= inv;
  for (auto& [id, g] : out.grads) g = scale(g, inv);
  return out;
}

double margin_loss(const std::vector<double>& positive_scores,
                   const std::vector<double>& negative_scores, double gamma_pos,
                   double gamma_neg) {
  require_unit_interval(gamma_pos, "gamma_pos");
  require_unit_interval(gamma_neg, "gamma_neg");
  double total = 0.0;
  for (double s : positive_scores) total += std::max(0.0, gamma_pos - s);
  for (double s : negative_scores) total += std::max(0.0, s - gamma_neg);
  return total;
}

LossGrads margin_grads(const EmbeddingTable& table, const std::vector<Edge>& positives,
                       const std::vector<Edge>& negatives, double gamma_pos, double gamma_neg) {
  require_table(table);
  require_unit_interval(gamma_pos, "gamma_pos");
  require_unit_interval(gamma_neg, "gamma_neg");
  for (const Edge& e : positives) {
    require_node(table, e.child);
    require_node(table, e.parent);
  }
  for (const Edge& e : negatives) {
    require_node(table, e.child);
    require_node(table, e.parent);
  }

  ad::Tape tape;
  std::map<NodeId, ad::Var> leaves;
  std::map<NodeId, ad::Var> projs;
  auto proj_of = [&](NodeId id) {
    auto it = projs.find(id);
    if (it == projs.end()) {
      ad::Var leaf = tape.leaf(table.params[static_cast<std::size_t>(id)]);
      leaves.emplace(id, leaf);
      it = projs.emplace(id, traced_soft_projector(tape, leaf, table.reg)).first;
    }
    return it->second;
  };

  ad::Var total = tape.scalar_constant(0.0);
  for (const Edge& e : positives) {
    ad::Var s = traced_inclusion_score(tape, proj_of(e.child), proj_of(e.parent));
    total = tape.add(total, tape.hinge(tape.sub(tape.scalar_constant(gamma_pos), s)));
  }
  for (const Edge& e : negatives) {
    ad::Var s = traced_inclusion_score(tape, proj_of(e.child), proj_of(e.parent));
    total = tape.add(total, tape.hinge(tape.sub(s, tape.scalar_constant(gamma_neg))));
  }

  ad::GradientMap grads = tape.backward(total);
  LossGrads out;
  out.value = total.scalar();
  for (const auto& [id, leaf] : leaves) out.grads.emplace(id, grads.at(leaf.id));
  return out;
}

LossGrads margin_batch_grads(const EmbeddingTable& table, const std::vector<Edge>& positives,
                             const std::vector<Edge>& negatives, double gamma_pos,
                             double gamma_neg) {
  require_table(table);
  require_unit_interval(gamma_pos, "gamma_pos");
  require_unit_interval(gamma_neg, "gamma_neg");
  std::vector<char> touched(static_cast<std::size_t>(table.num_nodes()), 0);
  auto mark = [&](const Edge& e) {
    require_node(table, e.child);
    require_node(table, e.parent);
    touched[static_cast<std::size_t>(e.child)] = 1;
    touched[static_cast<std::size_t>(e.parent)] = 1;
  };
  for (const Edge& e : positives) mark(e);
  for (const Edge& e : negatives) mark(e);

  const std::vector<Matrix> proj = soft_values(table, &touched);
  ProjectorAdjoints adjoints(table.num_nodes(), table.ambient_dim());
  double total = 0.0;
  auto accumulate = [&](const Edge& e, bool positive) {
    const Matrix& pc = proj[static_cast<std::size_t>(e.child)];
    const Matrix& pt = proj[static_cast<std::size_t>(e.parent)];
    const double tc = conditioned_trace(pc, table.names[static_cast<std::size_t>(e.child)]);
    const double ov = dot(pc, pt);
    const double s = ov / tc;
    double dloss_ds = 0.0;
    if (positive) {
      total += std::max(0.0, gamma_pos - s);
      if (s < gamma_pos) dloss_ds = -1.0;
    } else {
      total += std::max(0.0, s - gamma_neg);
      if (s > gamma_neg) dloss_ds = 1.0;
    }
    if (dloss_ds == 0.0) return;
    // s = ov / tc with d ov / d P_c = P_t, d tc / d P_c = I.
    adjoints.add(e.child, dloss_ds / tc, pt);
    adjoints.add_diag(e.child, -dloss_ds * ov / (tc * tc));
    adjoints.add(e.parent, dloss_ds / tc, pc);
  };
  for (const Edge& e : positives) accumulate(e, true);
  for (const Edge& e : negatives) accumulate(e, false);

  LossGrads out;
  out.value = total;
  out.grads = collect_span_grads(table, flagged_ids(touched), adjoints, 1.0);
  return out;
}

ClassPosterior beta_posterior(const BetaHead& head, double score) {
  const double shapes[] = {head.alpha_entail, head.beta_entail, head.alpha_contra,
                           head.beta_contra};
  for (double a : shapes) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw std::invalid_argument("Beta shape parameters must be finite and positive, got " +
                                  std::to_string(a));
    }
  }
  if (head.alpha_contra > head.beta_contra) {
    throw std::invalid_argument("contradiction head needs alpha <= beta, got alpha " +
                                std::to_string(head.alpha_contra) + ", beta " +
                                std::to_string(head.beta_contra));
  }
  if (head.beta_entail > head.alpha_entail) {
    throw std::invalid_argument("entailment head needs beta <= alpha, got alpha " +
                                std::to_string(head.alpha_entail) + ", beta " +
                                std::to_string(head.beta_entail));
  }
  if (!std::isfinite(score)) throw std::invalid_argument("score must be finite");

  const double s = std::clamp(score, 1e-6, 1.0 - 1e-6);
  auto log_beta = [](double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  };
  const double log_fe = (head.alpha_entail - 1.0) * std::log(s) +
                        (head.beta_entail - 1.0) * std::log1p(-s) -
                        log_beta(head.alpha_entail, head.beta_entail);
  const double log_fc = (head.alpha_contra - 1.0) * std::log(s) +
                        (head.beta_contra - 1.0) * std::log1p(-s) -
                        log_beta(head.alpha_contra, head.beta_contra);
  if (!std::isfinite(log_fe) || !std::isfinite(log_fc)) {
    throw std::runtime_error("non-finite Beta density at score " + std::to_string(s));
  }
  const double p_entail = 1.0 / (1.0 + std::exp(log_fc - log_fe));
  return {p_entail, 1.0 - p_entail};
}

AdamState make_adam_state(const EmbeddingTable& table, const AdamConfig& config) {
  require_table(table);
  if (!(config.lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
      !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0,1)");
  }
  if (!(config.epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be > 0");
  if (!(config.lr_decay > 0.0 && config.lr_decay <= 1.0)) {
    throw std::invalid_argument("lr decay must lie in (0,1]");
  }
  AdamState state;
  state.config = config;
  state.lr = config.lr;
  state.first.assign(table.params.size(), Matrix(table.ambient_dim(), table.num_vectors()));
  state.second = state.first;
  return state;
}

void adam_step(EmbeddingTable& table, const std::map<NodeId, Matrix>& grads, AdamState& state) {
  require_table(table);
  if (state.first.size() != table.params.size() || state.second.size() != table.params.size()) {
    throw std::invalid_argument("optimizer state covers " + std::to_string(state.first.size()) +
                                " nodes, table has " + std::to_string(table.params.size()));
  }
  double norm_sq = 0.0;
  for (const auto& [id, g] : grads) {
    require_node(table, id);
    if (!g.same_shape(table.params[static_cast<std::size_t>(id)])) {
      throw std::invalid_argument("gradient for node \"" + table.names[static_cast<std::size_t>(id)] +
                                  "\" is " + g.shape_str() + ", expected " +
                                  table.params[static_cast<std::size_t>(id)].shape_str());
    }
    if (!all_finite(g)) {
      throw std::runtime_error("non-finite gradient for node \"" +
                               table.names[static_cast<std::size_t>(id)] + "\"");
    }
    norm_sq += dot(g, g);
  }
  const AdamConfig& cfg = state.config;
  double clip_scale = 1.0;
  const double norm = std::sqrt(norm_sq);
  if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) clip_scale = cfg.clip_norm / norm;

  ++table.step;
  const double t = static_cast<double>(table.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [id, g] : grads) {
    Matrix& x = table.params[static_cast<std::size_t>(id)];
    Matrix& m = state.first[static_cast<std::size_t>(id)];
    Matrix& v = state.second[static_cast<std::size_t>(id)];
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double gk = g.data()[k] * clip_scale;
      m.data()[k] = cfg.beta1 * m.data()[k] + (1.0 - cfg.beta1) * gk;
      v.data()[k] = cfg.beta2 * v.data()[k] + (1.0 - cfg.beta2) * gk * gk;
      x.data()[k] -= state.lr * (m.data()[k] / bias1) / (std::sqrt(v.data()[k] / bias2) + cfg.epsilon);
    }
    if (!all_finite(x)) {
      throw std::runtime_error("non-finite parameters after update for node \"" +
                               table.names[static_cast<std::size_t>(id)] + "\"");
    }
  }
}

void adam_end_epoch(AdamState& state) { state.lr *= state.config.lr_decay; }

namespace {

void validate_train_config(const TrainConfig& config) {
  if (config.d < 1 || config.n < 1) {
    throw std::invalid_argument("span shape must be at least 1x1, got " +
                                std::to_string(config.d) + "x" + std::to_string(config.n));
  }
  if (!(config.lambda > 0.0) || !std::isfinite(config.lambda)) {
    throw std::invalid_argument("ridge lambda must be finite and > 0, got " +
                                std::to_string(config.lambda));
  }
  if (!(config.init_std > 0.0) || !std::isfinite(config.init_std)) {
    throw std::invalid_argument("init std must be finite and > 0, got " +
                                std::to_string(config.init_std));
  }
  if (!(config.temperature > 0.0)) {
    throw std::invalid_argument("temperature must be > 0, got " +
                                std::to_string(config.temperature));
  }
  require_unit_interval(config.gamma_pos, "gamma_pos");
  require_unit_interval(config.gamma_neg, "gamma_neg");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (config.negatives < 1) throw std::invalid_argument("negatives per edge must be >= 1");
  if (config.eval_negatives < 2 || config.eval_negatives % 2 != 0) {
    throw std::invalid_argument("eval negatives must be even and >= 2, got " +
                                std::to_string(config.eval_negatives));
  }
  if (config.max_epochs < 1) throw std::invalid_argument("max epochs must be >= 1");
  if (config.eval_every < 1) throw std::invalid_argument("eval cadence must be >= 1");
  if (config.patience < 1) throw std::invalid_argument("patience must be >= 1");
}

std::vector<std::string> node_names(const Taxonomy& t) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(t.num_nodes()));
  for (NodeId id = 0; id < t.num_nodes(); ++id) names.push_back(t.name_of(id));
  return names;
}

// Mirrors the reconstruction sampler's candidate set: unrelated in both
// directions.
int corruption_pool_size(const Taxonomy& t, NodeId child) {
  int count = 0;
  for (NodeId v = 0; v < t.num_nodes(); ++v)
    if (v != child && !t.in_closure(child, v) && !t.in_closure(v, child)) ++count;
  return count;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

double elapsed_s(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string wall_str(double seconds) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << seconds;
  return os.str();
}

}  // namespace

TrainResult train_reconstruction(const Taxonomy& t, const TrainConfig& config) {
  validate_train_config(config);
  if (!t.closure_computed())
    throw std::logic_error("train_reconstruction: transitive closure not computed");
  std::vector<Edge> edges(t.closure_edges().begin(), t.closure_edges().end());
  if (edges.empty()) throw std::invalid_argument("taxonomy has no edges to train on");

  EmbeddingTable table = init_table(node_names(t), config.d, config.n, config.init_std,
                                    config.seed, Regularizer::isotropic(config.n, config.lambda));
  AdamState opt = make_adam_state(table, config.adam);
  Rng rng(config.seed);
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream log;
  log << "epoch\tloss\tmap\tmean_rank\twall_s\n";
  double best_map = -1.0;
  int stale = 0;
  std::string stop;

  for (int epoch = 1; epoch <= config.max_epochs && stop.empty(); ++epoch) {
    std::shuffle(edges.begin(), edges.end(), rng);
    std::vector<std::vector<NodeId>> negs(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const int pool = corruption_pool_size(t, edges[i].child);
      const int want = std::min(config.negatives, pool);
      if (want == 0) {
        // Every other node is an ancestor: contrast against the anchor's own
        // subspace so the loss stays defined on degenerate graphs.
        negs[i] = {edges[i].child};
      } else {
        negs[i] = sample_reconstruction_negatives(t, edges[i].child, want, rng);
      }
    }

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < edges.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(edges.size(), begin + static_cast<std::size_t>(config.batch_size));
      const std::vector<Edge> batch(edges.begin() + static_cast<std::ptrdiff_t>(begin),
                                    edges.begin() + static_cast<std::ptrdiff_t>(end));
      const std::vector<std::vector<NodeId>> batch_negs(
          negs.begin() + static_cast<std::ptrdiff_t>(begin),
          negs.begin() + static_cast<std::ptrdiff_t>(end));
      LossGrads grads = infonce_batch_grads(table, batch, batch_negs, config.temperature);
      adam_step(table, grads.grads, opt);
      loss_sum += grads.value * static_cast<double>(end - begin);
    }
    adam_end_epoch(opt);

    if (epoch % config.eval_every == 0 || epoch == config.max_epochs) {
      const ReconEval eval = evaluate_reconstruction(table, t);
      log << epoch << '\t' << num(loss_sum / static_cast<double>(edges.size())) << '\t'
          << num(eval.ranking.map) << '\t' << num(eval.ranking.mean_rank) << '\t'
          << wall_str(elapsed_s(start)) << '\n';
      if (eval.ranking.map > best_map + 1e-12) {
        best_map = eval.ranking.map;
        stale = 0;
      } else if (++stale >= config.patience) {
        stop = "map plateau (patience " + std::to_string(config.patience) + ") at epoch " +
               std::to_string(epoch);
      }
    }
  }
  if (stop.empty()) stop = "max epochs (" + std::to_string(config.max_epochs) + ")";
  log << "# stop: " << stop << '\n';
  return {std::move(table), log.str(), stop};
}

TrainResult train_linkpred(const Taxonomy& t, const LinkPredSplit& split,
                           const TrainConfig& config) {
  validate_train_config(config);
  if (!t.closure_computed())
    throw std::logic_error("train_linkpred: transitive closure not computed");
  if (split.train.empty()) throw std::invalid_argument("split has no training edges");
  if (split.val.empty())
    throw std::invalid_argument("split has no validation edges to calibrate on");
  if (split.test.empty()) throw std::invalid_argument("split has no test edges");

  EmbeddingTable table = init_table(node_names(t), config.d, config.n, config.init_std,
                                    config.seed, Regularizer::isotropic(config.n, config.lambda));
  AdamState opt = make_adam_state(table, config.adam);
  Rng rng(config.seed);
  // Distinct stream so every snapshot scores the same corrupted candidates,
  // independent of how far training has advanced.
  const std::uint64_t eval_seed = config.seed ^ 0x9e3779b97f4a7c15ULL;
  std::vector<Edge> train = split.train;
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream log;
  log << "epoch\tloss\tval_f1\twall_s\n";
  double best_f1 = -1.0;
  int stale = 0;
  std::string stop;

  for (int epoch = 1; epoch <= config.max_epochs && stop.empty(); ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    std::vector<std::vector<Edge>> negs(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
      negs[i] = sample_linkpred_negatives(t, train[i], config.negatives, NegativeMode::kTrain, rng);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < train.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(train.size(), begin + static_cast<std::size_t>(config.batch_size));
      const std::vector<Edge> batch(train.begin() + static_cast<std::ptrdiff_t>(begin),
                                    train.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<Edge> batch_negs;
      for (std::size_t i = begin; i < end; ++i)
        batch_negs.insert(batch_negs.end(), negs[i].begin(), negs[i].end());
      LossGrads grads =
          margin_batch_grads(table, batch, batch_negs, config.gamma_pos, config.gamma_neg);
      const double inv = 1.0 / static_cast<double>(batch.size());
      grads.value *= inv;
      for (auto& [id, g] : grads.grads) g = scale(g, inv);
      adam_step(table, grads.grads, opt);
      loss_sum += grads.value * static_cast<double>(batch.size());
    }
    adam_end_epoch(opt);

    if (epoch % config.eval_every == 0 || epoch == config.max_epochs) {
      const LinkPredEval eval =
          evaluate_linkpred(table, t, split, config.eval_negatives, eval_seed);
      log << epoch << '\t' << num(loss_sum / static_cast<double>(train.size())) << '\t'
          << num(eval.f1.val_f1) << '\t' << wall_str(elapsed_s(start)) << '\n';
      if (eval.f1.val_f1 > best_f1 + 1e-12) {
        best_f1 = eval.f1.val_f1;
        stale = 0;
      } else if (++stale >= config.patience) {
        stop = "validation-f1 plateau (patience " + std::to_string(config.patience) +
               ") at epoch " + std::to_string(epoch);
      }
    }
  }
  if (stop.empty()) stop = "max epochs (" + std::to_string(config.max_epochs) + ")";
  log << "# stop: " << stop << '\n';
  return {std::move(table), log.str(), stop};
}

Matrix inclusion_matrix(const EmbeddingTable& table) {
  require_table(table);
  const int n = table.num_nodes();
  const std::vector<Matrix> proj = soft_values(table, nullptr);
  std::vector<double> traces(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    traces[static_cast<std::size_t>(i)] =
        conditioned_trace(proj[static_cast<std::size_t>(i)], table.names[static_cast<std::size_t>(i)]);
  Matrix s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      s(i, j) = dot(proj[static_cast<std::size_t>(i)], proj[static_cast<std::size_t>(j)]) /
                traces[static_cast<std::size_t>(i)];
  return s;
}

std::vector<double> effective_dims(const EmbeddingTable& table) {
  require_table(table);
  const std::vector<Matrix> proj = soft_values(table, nullptr);
  std::vector<double> dims(proj.size());
  for (std::size_t i = 0; i < proj.size(); ++i) dims[i] = trace(proj[i]);
  return dims;
}

ReconEval evaluate_reconstruction(const EmbeddingTable& table, const Taxonomy& t,
                                  bool rank_heads_too) {
  require_match(table, t);
  return {reconstruction_ranks(inclusion_matrix(table), t, rank_heads_too),
          dimension_report(effective_dims(table), t)};
}

LinkPredEval evaluate_linkpred(const EmbeddingTable& table, const Taxonomy& t,
                               const LinkPredSplit& split, int negatives_per_edge,
                               std::uint64_t seed) {
  require_match(table, t);
  if (split.val.empty()) throw std::invalid_argument("split has no validation edges");
  if (split.test.empty()) throw std::invalid_argument("split has no test edges");

  const std::vector<Matrix> proj = soft_values(table, nullptr);
  std::vector<double> traces(proj.size());
  for (std::size_t i = 0; i < proj.size(); ++i)
    traces[i] = conditioned_trace(proj[i], table.names[i]);
  auto score = [&](const Edge& e) {
    return dot(proj[static_cast<std::size_t>(e.child)], proj[static_cast<std::size_t>(e.parent)]) /
           traces[static_cast<std::size_t>(e.child)];
  };

  Rng rng(seed);
  auto score_section = [&](const std::vector<Edge>& edges) {
    std::vector<LabeledScore> out;
    for (const Edge& e : edges) {
      out.push_back({score(e), true});
      std::vector<Edge> corrupted;
      try {
        corrupted = sample_linkpred_negatives(t, e, negatives_per_edge, NegativeMode::kEval, rng);
      } catch (const std::runtime_error&) {
        // One corruption side can be impossible (e.g. the head of an edge
        // whose parent is the only root, since every node sits below it);
        // fall back to uniformly corrupted sides for this edge.
        corrupted = sample_linkpred_negatives(t, e, negatives_per_edge, NegativeMode::kTrain, rng);
      }
      for (const Edge& neg : corrupted) out.push_back({score(neg), false});
    }
    return out;
  };
  LinkPredEval eval;
  eval.val_scores = score_section(split.val);
  eval.test_scores = score_section(split.test);
  eval.f1 = calibrate_threshold_f1(eval.val_scores, eval.test_scores);
  return eval;
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'P', 'A', 'N', 'L', 'A', 'T', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kMaxNameLength = 1u << 20;

template <typename T>
void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
  T value;
  is.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return value;
}

}  // namespace

void save_checkpoint(const EmbeddingTable& table, const std::string& path) {
  require_table(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::int32_t>(table.ambient_dim()));
  write_pod(out, static_cast<std::int32_t>(table.num_vectors()));
  for (double lambda : table.reg.lambda_diag) write_pod(out, lambda);
  write_pod(out, table.seed);
  write_pod(out, table.step);
  write_pod(out, static_cast<std::int32_t>(table.num_nodes()));
  for (int i = 0; i < table.num_nodes(); ++i) {
    const std::string& name = table.names[static_cast<std::size_t>(i)];
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Matrix& m = table.params[static_cast<std::size_t>(i)];
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingTable load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw std::runtime_error("not a spanlat checkpoint: " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             " (this build reads version " +
                             std::to_string(kCheckpointVersion) + "): " + path);
  }
  const auto d = read_pod<std::int32_t>(in, path);
  const auto n = read_pod<std::int32_t>(in, path);
  if (d < 1 || n < 1) {
    throw std::runtime_error("corrupt checkpoint, span shape " + std::to_string(d) + "x" +
                             std::to_string(n) + ": " + path);
  }
  Regularizer reg;
  reg.lambda_diag.resize(static_cast<std::size_t>(n));
  for (double& lambda : reg.lambda_diag) lambda = read_pod<double>(in, path);
  if (!reg.strictly_positive()) {
    throw std::runtime_error("corrupt checkpoint, ridge entries must be strictly positive: " +
                             path);
  }
  EmbeddingTable table;
  table.reg = std::move(reg);
  table.seed = read_pod<std::uint64_t>(in, path);
  table.step = read_pod<std::int64_t>(in, path);
  if (table.step < 0) throw std::runtime_error("corrupt checkpoint, negative step: " + path);
  const auto count = read_pod<std::int32_t>(in, path);
  if (count < 1) {
    throw std::runtime_error("corrupt checkpoint, node count " + std::to_string(count) + ": " +
                             path);
  }
  for (std::int32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, path);
    if (name_len == 0 || name_len > kMaxNameLength) {
      throw std::runtime_error("corrupt checkpoint, name length " + std::to_string(name_len) +
                               ": " + path);
    }
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    Matrix m(d, n);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    if (!all_finite(m)) {
      throw std::runtime_error("corrupt checkpoint, non-finite entries for node \"" + name +
                               "\": " + path);
    }
    table.names.push_back(std::move(name));
    table.params.push_back(std::move(m));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("unexpected trailing bytes: " + path);
  }
  require_table(table);
  return table;
}

}  // namespace spanlat
