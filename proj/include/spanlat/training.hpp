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

#ifndef SPANLAT_TRAINING_HPP
#define SPANLAT_TRAINING_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spanlat/matrix.hpp"
#include "spanlat/metrics.hpp"
#include "spanlat/projector.hpp"
#include "spanlat/taxonomy.hpp"

namespace spanlat {

/// One trainable d-by-n span matrix per node, plus the shared ridge and the
/// bookkeeping a checkpoint carries (seed, optimizer step). Node ids index
/// into names/params and must line up with the taxonomy the table was built
/// for; the evaluation helpers verify the names to catch mixups.
struct EmbeddingTable {
  std::vector<std::string> names;
  std::vector<Matrix> params;  // all d-by-n
  Regularizer reg;
  std::uint64_t seed = 0;
  std::int64_t step = 0;

  int num_nodes() const { return static_cast<int>(params.size()); }
  int ambient_dim() const { return params.front().rows(); }
  int num_vectors() const { return params.front().cols(); }

  /// Ridge-regularized projector of one node's current span.
  Projector soft(NodeId id) const;
};

/// Table with i.i.d. N(0, std^2) entries, deterministic in seed. std must be
/// strictly positive: an all-zero span has no orientation to train.
EmbeddingTable init_table(const std::vector<std::string>& names, int d, int n,
                          double std, std::uint64_t seed, const Regularizer& reg);

/// Value of one scalar loss together with its gradient for every node it
/// touches. Keyed by node id in ascending order so reductions are
/// deterministic.
struct LossGrads {
  double value = 0.0;
  std::map<NodeId, Matrix> grads;
};

/// Contrastive loss for one positive edge: -log softmax of the positive
/// overlap against the sampled negatives' overlaps at temperature tau,
/// stabilized by subtracting the detached max logit. Built on a single tape;
/// gradients flow to the anchor, the positive, and every negative.
LossGrads infonce_grads(const EmbeddingTable& table, NodeId anchor, NodeId positive,
                        const std::vector<NodeId>& negatives, double temperature = 1.0);

/// Hinge objective on precomputed inclusion scores:
/// sum_pos max(0, gamma_pos - s) + sum_neg max(0, s - gamma_neg).
double margin_loss(const std::vector<double>& positive_scores,
                   const std::vector<double>& negative_scores, double gamma_pos = 0.9,
                   double gamma_neg = 0.1);

/// Differentiable form of the hinge objective over (child, parent) pairs,
/// each scored by the soft inclusion of the child in the parent. One tape
/// over the whole collection; the value is the plain sum, not a mean.
LossGrads margin_grads(const EmbeddingTable& table, const std::vector<Edge>& positives,
                       const std::vector<Edge>& negatives, double gamma_pos = 0.9,
                       double gamma_neg = 0.1);

// Batch kernels used by the training loops. They split the chain rule at the
// projector boundary: projector values are computed once per touched node,
// the softmax/hinge layer accumulates per-projector adjoints with plain
// arithmetic, and one small tape per node maps the adjoint back to the span.
// The *_reference functions recompute the same quantity with one full tape
// per edge; tests hold the two within rounding of each other.

/// Mean over edges of the per-edge contrastive loss. negatives[i] pairs with
/// edges[i], anchored at the child with the parent as positive.
LossGrads infonce_batch_grads(const EmbeddingTable& table, const std::vector<Edge>& edges,
                              const std::vector<std::vector<NodeId>>& negatives,
                              double temperature = 1.0);
LossGrads infonce_batch_reference(const EmbeddingTable& table, const std::vector<Edge>& edges,
                                  const std::vector<std::vector<NodeId>>& negatives,
                                  double temperature = 1.0);

/// Hinge objective over scored pairs; same value as margin_grads.
LossGrads margin_batch_grads(const EmbeddingTable& table, const std::vector<Edge>& positives,
                             const std::vector<Edge>& negatives, double gamma_pos = 0.9,
                             double gamma_neg = 0.1);

/// Two Beta densities over the inclusion score, one per class. Shapes are
/// fixed hyperparameters; the defaults place the entailment mass near 1 and
/// the contradiction mass near 0.
struct BetaHead {
  double alpha_entail = 6.0;
  double beta_entail = 1.0;
  double alpha_contra = 1.0;
  double beta_contra = 6.0;
};

struct ClassPosterior {
  double p_entail = 0.0;
  double p_contra = 0.0;
};

/// Posterior over {entailment, contradiction} under uniform priors, by the
/// density ratio at the (clamped to [1e-6, 1-1e-6]) score. Densities are
/// evaluated in log space. Shapes must be positive with
/// alpha_contra <= beta_contra and beta_entail <= alpha_entail.
ClassPosterior beta_posterior(const BetaHead& head, double score);

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr_decay = 1.0;    // per-epoch multiplier applied by adam_end_epoch
  double clip_norm = 10.0;  // global gradient-norm ceiling; <= 0 disables
};

/// Per-node first/second moment estimates plus the current (decayed) rate.
/// The bias-correction exponent is the table's step counter.
struct AdamState {
  AdamConfig config;
  double lr = 0.0;
  std::vector<Matrix> first;
  std::vector<Matrix> second;
};

AdamState make_adam_state(const EmbeddingTable& table, const AdamConfig& config);

/// One optimizer step over the nodes present in grads; other nodes and their
/// moments are untouched. Gradients are clipped jointly to the configured
/// global norm first. Throws on non-finite gradients or parameters, naming
/// the node.
void adam_step(EmbeddingTable& table, const std::map<NodeId, Matrix>& grads,
               AdamState& state);

/// Applies the per-epoch learning-rate decay.
void adam_end_epoch(AdamState& state);

/// Hyperparameters shared by both training loops. Defaults follow the
/// reconstruction protocol; link-prediction runs usually lower `negatives`
/// to 10 and use the margin terms.
struct TrainConfig {
  int d = 16;
  int n = 16;
  double lambda = 0.2;    // isotropic ridge
  double init_std = 1e-4;
  double temperature = 1.0;
  double gamma_pos = 0.9;
  double gamma_neg = 0.1;
  int batch_size = 128;   // positive edges per optimizer step
  int negatives = 19;     // sampled per positive edge, resampled every epoch
  int eval_negatives = 10;  // per validation/test edge when calibrating F1
  int max_epochs = 400;
  int eval_every = 5;  // epochs between metric snapshots
  int patience = 10;   // snapshots without improvement before stopping
  std::uint64_t seed = 0;
  AdamConfig adam;
};

/// Trained table plus the newline-delimited snapshot log. Snapshot rows are
/// tab-separated with the wall-clock column last, so two runs of the same
/// seed agree bitwise on everything before it; the stop reason is repeated
/// as a trailing '#' comment line.
struct TrainResult {
  EmbeddingTable table;
  std::string log;
  std::string stop_reason;
};

/// Contrastive training over the shuffled transitive closure, one positive
/// edge at a time against `negatives` corrupted parents. Stops when the
/// reconstruction mAP stops improving for `patience` snapshots, or at
/// max_epochs. Log columns: epoch, loss, map, mean_rank, wall_s.
TrainResult train_reconstruction(const Taxonomy& t, const TrainConfig& config);

/// Margin training over split.train with corrupted-edge negatives, snapshots
/// calibrating a decision threshold on the validation edges. Stops on a
/// validation-F1 plateau. Log columns: epoch, loss, val_f1, wall_s.
TrainResult train_linkpred(const Taxonomy& t, const LinkPredSplit& split,
                           const TrainConfig& config);

/// S(i, j) = soft inclusion score of node i in node j.
Matrix inclusion_matrix(const EmbeddingTable& table);

/// Trace of each node's soft projector.
std::vector<double> effective_dims(const EmbeddingTable& table);

struct ReconEval {
  RankingReport ranking;
  DimensionReport dims;
};

/// Ranks every closure edge by inclusion score and correlates effective
/// dimensions with the taxonomy statistics. The table must cover exactly the
/// taxonomy's nodes, by name.
ReconEval evaluate_reconstruction(const EmbeddingTable& table, const Taxonomy& t,
                                  bool rank_heads_too = false);

struct LinkPredEval {
  ThresholdF1 f1;
  std::vector<LabeledScore> val_scores;
  std::vector<LabeledScore> test_scores;
};

/// Scores the split's validation and test edges (label 1) plus
/// `negatives_per_edge` corrupted edges each (label 0), then calibrates the
/// decision threshold on validation and applies it to test. Corruptions are
/// half head / half tail; an edge for which one side has no valid corruption
/// (e.g. its parent is the only root) falls back to uniformly corrupted
/// sides. The draw is seeded independently of training so every snapshot
/// scores the same candidates.
LinkPredEval evaluate_linkpred(const EmbeddingTable& table, const Taxonomy& t,
                               const LinkPredSplit& split, int negatives_per_edge,
                               std::uint64_t seed);

/// Binary checkpoint: little-endian fixed-width header (magic, format
/// version, d, n, ridge diagonal, seed, step, node count) followed by each
/// node's name and row-major span entries. Round-trips bitwise.
void save_checkpoint(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_checkpoint(const std::string& path);

}  // namespace spanlat

#endif  // SPANLAT_TRAINING_HPP
