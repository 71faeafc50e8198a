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

#include "spanlat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spanlat {

RankingReport reconstruction_ranks(const Matrix& similarity, const Taxonomy& t,
                                   bool rank_heads_too) {
  if (!t.closure_computed())
    throw std::logic_error("reconstruction_ranks: transitive closure not computed");
  const int n = t.num_nodes();
  if (similarity.rows() != n || similarity.cols() != n) {
    throw std::invalid_argument("reconstruction_ranks: similarity is " +
                                similarity.shape_str() + " but taxonomy has " +
                                std::to_string(n) + " nodes");
  }

  RankingReport report;
  report.edges.assign(t.closure_edges().begin(), t.closure_edges().end());
  const auto edge_count = report.edges.size();
  report.ranks.assign(edge_count, 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(edge_count); ++i) {
    const Edge e = report.edges[static_cast<std::size_t>(i)];
    const double positive = similarity(e.child, e.parent);
    long greater = 0;
    long equal = 0;
    auto consider = [&](double s) {
      if (s > positive)
        ++greater;
      else if (s == positive)
        ++equal;
    };
    for (NodeId v = 0; v < n; ++v) {
      if (v == e.child || t.in_closure(e.child, v)) continue;
      consider(similarity(e.child, v));
    }
    if (rank_heads_too) {
      for (NodeId u = 0; u < n; ++u) {
        if (u == e.parent || t.in_closure(u, e.parent)) continue;
        consider(similarity(u, e.parent));
      }
    }
    report.ranks[static_cast<std::size_t>(i)] =
        static_cast<double>(greater) + 1.0 + static_cast<double>(equal) / 2.0;
  }

  double rank_sum = 0.0;
  double ap_sum = 0.0;
  for (double r : report.ranks) {
    rank_sum += r;
    ap_sum += 1.0 / r;
  }
  if (!report.ranks.empty()) {
    report.mean_rank = rank_sum / static_cast<double>(report.ranks.size());
    report.map = ap_sum / static_cast<double>(report.ranks.size());
  }
  return report;
}

double mean_average_precision(const std::vector<std::vector<int>>& relevance_lists) {
  if (relevance_lists.empty())
    throw std::invalid_argument("mean_average_precision: no queries");
  double total = 0.0;
  for (std::size_t q = 0; q < relevance_lists.size(); ++q) {
    const std::vector<int>& rel = relevance_lists[q];
    long relevant = 0;
    double ap = 0.0;
    for (std::size_t k = 0; k < rel.size(); ++k) {
      if (!rel[k]) continue;
      ++relevant;
      ap += static_cast<double>(relevant) / static_cast<double>(k + 1);
    }
    if (relevant == 0) {
      throw std::invalid_argument("mean_average_precision: query " + std::to_string(q) +
                                  " has no relevant items");
    }
    total += ap / static_cast<double>(relevant);
  }
  return total / static_cast<double>(relevance_lists.size());
}

namespace {

// Average-tie ranks, 1-based.
std::vector<double> tie_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("undefined correlation: constant input sequence");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("spearman_rho: length mismatch " +
                                std::to_string(xs.size()) + " vs " +
                                std::to_string(ys.size()));
  if (xs.size() < 2)
    throw std::invalid_argument("spearman_rho: need at least 2 points");
  for (double v : xs)
    if (!std::isfinite(v)) throw std::invalid_argument("spearman_rho: non-finite input");
  for (double v : ys)
    if (!std::isfinite(v)) throw std::invalid_argument("spearman_rho: non-finite input");
  return pearson(tie_ranks(xs), tie_ranks(ys));
}

namespace {

double f1_at(const std::vector<LabeledScore>& scored, double threshold) {
  long tp = 0, fp = 0, fn = 0;
  for (const LabeledScore& s : scored) {
    const bool predicted = s.score >= threshold;
    if (predicted && s.label) ++tp;
    if (predicted && !s.label) ++fp;
    if (!predicted && s.label) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) /
         static_cast<double>(2 * tp + fp + fn);
}

}  // namespace

ThresholdF1 calibrate_threshold_f1(const std::vector<LabeledScore>& val,
                                   const std::vector<LabeledScore>& test) {
  bool has_pos = false, has_neg = false;
  for (const LabeledScore& s : val) (s.label ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw std::invalid_argument(
        "calibrate_threshold_f1: validation must contain both classes");

  std::vector<double> scores;
  scores.reserve(val.size());
  for (const LabeledScore& s : val) scores.push_back(s.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  std::vector<double> candidates;
  candidates.push_back(scores.front() - 1.0);  // everything predicted positive
  for (std::size_t i = 0; i + 1 < scores.size(); ++i)
    candidates.push_back((scores[i] + scores[i + 1]) / 2.0);
  candidates.push_back(scores.back() + 1.0);  // nothing predicted positive

  ThresholdF1 best{candidates.front(), -1.0, 0.0};
  for (double t : candidates) {
    const double f1 = f1_at(val, t);
    if (f1 > best.val_f1) {
      best.val_f1 = f1;
      best.threshold = t;
    }
  }
  best.test_f1 = f1_at(test, best.threshold);
  return best;
}

DimensionReport dimension_report(const std::vector<double>& effective_dims,
                                 const Taxonomy& t) {
  if (static_cast<int>(effective_dims.size()) != t.num_nodes()) {
    throw std::invalid_argument("dimension_report: " +
                                std::to_string(effective_dims.size()) +
                                " dimensions for " + std::to_string(t.num_nodes()) +
                                " nodes");
  }
  const std::vector<int> descendants = descendant_counts(t);
  const std::vector<int> ranks = taxonomy_ranks(t);

  DimensionReport report;
  std::vector<double> desc_d(descendants.begin(), descendants.end());
  std::vector<double> rank_d(ranks.begin(), ranks.end());
  report.rows.reserve(effective_dims.size());
  for (int i = 0; i < t.num_nodes(); ++i) {
    report.rows.push_back(DimensionRow{t.name_of(i), effective_dims[static_cast<std::size_t>(i)],
                                       descendants[static_cast<std::size_t>(i)],
                                       ranks[static_cast<std::size_t>(i)]});
  }
  report.rho_vs_descendants = spearman_rho(effective_dims, desc_d);
  report.rho_vs_rank = spearman_rho(effective_dims, rank_d);
  return report;
}

}  // namespace spanlat
