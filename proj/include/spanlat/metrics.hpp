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

#ifndef SPANLAT_METRICS_HPP
#define SPANLAT_METRICS_HPP

#include <string>
#include <vector>

#include "spanlat/matrix.hpp"
#include "spanlat/taxonomy.hpp"

namespace spanlat {

/// Per-closure-edge ranking outcome. Ranks use the average-tie convention:
/// rank = (#strictly greater) + 1 + (#equal)/2, so exact score ties (common
/// at initialization) do not depend on iteration order.
struct RankingReport {
  std::vector<Edge> edges;    // the closure edges that were ranked
  std::vector<double> ranks;  // aligned with edges; >= 1
  double mean_rank = 0.0;
  double map = 0.0;  // mean over edges of 1/rank
};

/// Ranks each closure edge's similarity among its corruptions. For edge
/// (u,v) the pool is every (u,v') outside the closure with v' != u — the
/// diagonal pair is never a competitor, since a node trivially resembles
/// itself. With rank_heads_too, corrupted heads (u',v), u' != v, join the
/// same pool. `similarity` is node-by-node, higher meaning more related.
RankingReport reconstruction_ranks(const Matrix& similarity, const Taxonomy& t,
                                   bool rank_heads_too = false);

/// Mean over queries of average precision. Each list gives 0/1 relevance in
/// ranked order; a query with no relevant item is an error.
double mean_average_precision(const std::vector<std::vector<int>>& relevance_lists);

/// Pearson correlation of average-tie ranks. Throws on length mismatch,
/// fewer than 2 points, or a constant input ("undefined correlation").
double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys);

struct LabeledScore {
  double score;
  bool label;
};

struct ThresholdF1 {
  double threshold;
  double val_f1;
  double test_f1;
};

/// Picks the threshold maximizing F1 on validation (predict positive iff
/// score >= threshold), then scores test at that threshold. Candidates are
/// every midpoint between adjacent distinct validation scores plus sentinels
/// below and above the range; F1 ties resolve to the lowest threshold. A
/// threshold predicting no positives scores F1 = 0.
ThresholdF1 calibrate_threshold_f1(const std::vector<LabeledScore>& val,
                                   const std::vector<LabeledScore>& test);

struct DimensionRow {
  std::string name;
  double effective_dim;
  int descendants;
  int rank;
};

struct DimensionReport {
  std::vector<DimensionRow> rows;  // one per node, id order
  double rho_vs_descendants;
  double rho_vs_rank;
};

/// Joins per-node effective dimensions (indexed by node id) with taxonomy
/// statistics and summarizes both Spearman correlations.
DimensionReport dimension_report(const std::vector<double>& effective_dims,
                                 const Taxonomy& t);

}  // namespace spanlat

#endif  // SPANLAT_METRICS_HPP
