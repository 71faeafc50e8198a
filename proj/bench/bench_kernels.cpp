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

// Times the OpenMP kernels against their serial reference implementations
// and cross-checks that both sides agree. Usage: bench_kernels [reps]
//
//   matmul            omp-parallel rows vs the plain triple loop
//   infonce batch     staged batch gradients vs per-edge autodiff tapes
//   margin batch      staged batch gradients vs one full autodiff tape
//   ranking           per-edge parallel rank loop (no serial twin, timing only)

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "spanlat/matrix.hpp"
#include "spanlat/metrics.hpp"
#include "spanlat/taxonomy.hpp"
#include "spanlat/training.hpp"

using namespace spanlat;

namespace {

double time_ms(const std::function<void()>& body, int reps) {
  body();  // warm up
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    body();
    const auto stop = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(stop - start).count());
  }
  return best;
}

void row(const char* name, const char* size, double serial_ms, double parallel_ms,
         double max_diff) {
  std::printf("%-16s %-14s %10.3f %12.3f %9.2fx %12.2e\n", name, size, serial_ms,
              parallel_ms, serial_ms / parallel_ms, max_diff);
}

Matrix random_matrix(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void bench_matmul(int n, int reps) {
  Rng rng(1);
  const Matrix a = random_matrix(rng, n, n);
  const Matrix b = random_matrix(rng, n, n);
  Matrix out(n, n);
  const double serial = time_ms([&] { out = matmul_serial(a, b); }, reps);
  const Matrix ref = out;
  const double parallel = time_ms([&] { out = matmul(a, b); }, reps);
  char size[32];
  std::snprintf(size, sizeof size, "%dx%dx%d", n, n, n);
  row("matmul", size, serial, parallel, max_abs(sub(out, ref)));
}

double grads_max_diff(const LossGrads& a, const LossGrads& b) {
  double worst = std::abs(a.value - b.value);
  for (const auto& [id, grad] : a.grads)
    worst = std::max(worst, max_abs(sub(grad, b.grads.at(id))));
  return worst;
}

void bench_infonce(int depth, int d, int n, int negatives, int reps) {
  Taxonomy t = transitive_closure(make_binary_tree(depth));
  TrainConfig cfg;
  cfg.d = d;
  cfg.n = n;
  EmbeddingTable table = init_table(t.node_names(), d, n, 0.5, 11,
                                    Regularizer::isotropic(n, cfg.lambda));
  Rng rng(12);
  std::vector<Edge> batch(t.closure_edges().begin(), t.closure_edges().end());
  std::vector<std::vector<NodeId>> negs;
  for (const Edge& e : batch)
    negs.push_back(sample_reconstruction_negatives(t, e.child, negatives, rng));

  LossGrads staged, reference;
  const double serial =
      time_ms([&] { reference = infonce_batch_reference(table, batch, negs, 1.0); }, reps);
  const double parallel =
      time_ms([&] { staged = infonce_batch_grads(table, batch, negs, 1.0); }, reps);
  char size[48];
  std::snprintf(size, sizeof size, "%zu e, d=%d", batch.size(), d);
  row("infonce batch", size, serial, parallel, grads_max_diff(staged, reference));
}

void bench_margin(int depth, int d, int n, int reps) {
  Taxonomy t = transitive_closure(make_binary_tree(depth));
  EmbeddingTable table =
      init_table(t.node_names(), d, n, 0.5, 13, Regularizer::isotropic(n, 0.2));
  Rng rng(14);
  std::vector<Edge> positives(t.closure_edges().begin(), t.closure_edges().end());
  std::vector<Edge> negatives;
  for (const Edge& e : positives) {
    auto sampled = sample_linkpred_negatives(t, e, 2, NegativeMode::kTrain, rng);
    negatives.insert(negatives.end(), sampled.begin(), sampled.end());
  }

  LossGrads staged, reference;
  const double serial =
      time_ms([&] { reference = margin_grads(table, positives, negatives, 0.9, 0.1); }, reps);
  const double parallel =
      time_ms([&] { staged = margin_batch_grads(table, positives, negatives, 0.9, 0.1); },
              reps);
  char size[48];
  std::snprintf(size, sizeof size, "%zu+%zu, d=%d", positives.size(), negatives.size(), d);
  row("margin batch", size, serial, parallel, grads_max_diff(staged, reference));
}

void bench_ranking(int depth, int reps) {
  Taxonomy t = transitive_closure(make_binary_tree(depth));
  Rng rng(15);
  Matrix sim = random_matrix(rng, t.num_nodes(), t.num_nodes());
  RankingReport report;
  const double parallel = time_ms([&] { report = reconstruction_ranks(sim, t); }, reps);
  std::printf("%-16s %-14s %10s %12.3f %9s %12s\n", "ranking",
              (std::to_string(t.num_nodes()) + " nodes").c_str(), "-", parallel, "-", "-");
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
#ifdef _OPENMP
  std::printf("threads: %d, reps: %d\n\n", omp_get_max_threads(), reps);
#else
  std::printf("threads: 1 (OpenMP off), reps: %d\n\n", reps);
#endif
  std::printf("%-16s %-14s %10s %12s %9s %12s\n", "kernel", "size", "serial ms",
              "parallel ms", "speedup", "max diff");
  bench_matmul(128, reps);
  bench_matmul(256, reps);
  bench_infonce(4, 12, 12, 10, reps);
  bench_margin(4, 12, 12, reps);
  bench_ranking(6, reps);
  return 0;
}
