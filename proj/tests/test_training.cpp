#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "spanlat/autodiff.hpp"
#include "spanlat/training.hpp"
#include "testutil.hpp"

using namespace spanlat;
using testutil::Rng;

namespace {

namespace fs = std::filesystem;

EmbeddingTable random_table(Rng& rng, int nodes, int d, int n, double lambda,
                            double stddev = 0.5) {
  std::vector<std::string> names;
  for (int i = 0; i < nodes; ++i) names.push_back("node" + std::to_string(i));
  EmbeddingTable table = init_table(names, d, n, 1e-4, 7, Regularizer::isotropic(n, lambda));
  for (Matrix& m : table.params) m = testutil::random_matrix(rng, d, n, stddev);
  return table;
}

/// Log rows as split fields, skipping the header and '#' comments.
std::vector<std::vector<std::string>> log_rows(const std::string& log) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(log);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, '\t')) fields.push_back(cell);
    rows.push_back(std::move(fields));
  }
  return rows;
}

/// Everything except the trailing wall-clock column, for determinism checks.
std::string strip_wall(const std::string& log) {
  std::ostringstream out;
  std::istringstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t cut = line.rfind('\t');
    if (!line.empty() && line.front() != '#' && cut != std::string::npos)
      out << line.substr(0, cut) << '\n';
    else
      out << line << '\n';
  }
  return out.str();
}

double fd_max_rel_error(const EmbeddingTable& table, NodeId node, const Matrix& analytic,
                        const std::function<double(const EmbeddingTable&)>& loss) {
  EmbeddingTable probe = table;
  auto f = [&](const Matrix& x) {
    probe.params[static_cast<std::size_t>(node)] = x;
    return loss(probe);
  };
  return ad::finite_difference_check(f, table.params[static_cast<std::size_t>(node)], analytic,
                                     1e-5);
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("spanlat_training_" + name);
}

}  // namespace

TEST_CASE("init_table draws the requested Gaussian") {
  EmbeddingTable table = init_table({"a", "b", "c"}, 128, 128, 1e-4, 11,
                                    Regularizer::isotropic(128, 0.2));
  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  for (const Matrix& m : table.params) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      sum += m.data()[k];
      sum_sq += m.data()[k] * m.data()[k];
    }
    count += m.size();
  }
  const double mean = sum / static_cast<double>(count);
  const double stddev = std::sqrt(sum_sq / static_cast<double>(count) - mean * mean);
  CHECK(std::abs(mean) < 5e-6);
  CHECK(stddev == doctest::Approx(1e-4).epsilon(0.05));
  CHECK(table.step == 0);
  CHECK(table.seed == 11);
}

TEST_CASE("init_table is deterministic in the seed") {
  const Regularizer reg = Regularizer::isotropic(3, 0.2);
  EmbeddingTable a = init_table({"x", "y"}, 4, 3, 0.01, 5, reg);
  EmbeddingTable b = init_table({"x", "y"}, 4, 3, 0.01, 5, reg);
  CHECK(a.params == b.params);
  EmbeddingTable c = init_table({"x", "y"}, 4, 3, 0.01, 6, reg);
  CHECK(a.params != c.params);
}

TEST_CASE("init_table rejects degenerate setups") {
  const Regularizer reg = Regularizer::isotropic(2, 0.2);
  CHECK_THROWS_WITH_AS(init_table({"a"}, 3, 2, 0.0, 1, reg), doctest::Contains("init std"),
                       std::invalid_argument);
  CHECK_THROWS_AS(init_table({}, 3, 2, 0.1, 1, reg), std::invalid_argument);
  CHECK_THROWS_AS(init_table({""}, 3, 2, 0.1, 1, reg), std::invalid_argument);
  CHECK_THROWS_AS(init_table({"a"}, 3, 5, 0.1, 1, reg), std::invalid_argument);
  CHECK_THROWS_AS(init_table({"a"}, 0, 2, 0.1, 1, reg), std::invalid_argument);
}

TEST_CASE("uniform similarities give the log(K+1) contrastive loss") {
  Rng rng(31);
  EmbeddingTable table = random_table(rng, 5, 4, 2, 0.3);
  for (std::size_t i = 1; i < table.params.size(); ++i) table.params[i] = table.params[0];
  LossGrads out = infonce_grads(table, 0, 1, {2, 3, 4});
  CHECK(out.value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(infonce_batch_grads(table, {{0, 1}}, {{2, 3, 4}}).value ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("a dominant positive saturates the contrastive loss") {
  // Anchor and positive share a 24-dimensional axis-aligned span; the
  // negatives live on the remaining axes, so the logit gap is about 24.
  const int d = 48, n = 24;
  Rng rng(1);
  EmbeddingTable table = random_table(rng, 4, d, n, 1e-9, 0.5);
  for (int node = 0; node < 4; ++node) {
    Matrix m(d, n);
    const int base = node <= 1 ? 0 : n;
    for (int j = 0; j < n; ++j) m(base + j, j) = 1.0;
    table.params[static_cast<std::size_t>(node)] = m;
  }
  LossGrads out = infonce_grads(table, 0, 1, {2, 3});
  CHECK(out.value >= 0.0);
  CHECK(out.value <= 1e-8);
}

TEST_CASE("contrastive gradients reach every involved node and match finite differences") {
  Rng rng(32);
  EmbeddingTable table = random_table(rng, 3, 4, 2, 0.4);
  LossGrads out = infonce_grads(table, 0, 1, {2}, 1.0);
  REQUIRE(out.grads.size() == 3);
  for (const auto& [id, g] : out.grads) CHECK(frobenius_norm(g) > 0.0);

  auto loss = [](const EmbeddingTable& probe) { return infonce_grads(probe, 0, 1, {2}).value; };
  for (NodeId node = 0; node < 3; ++node)
    CHECK(fd_max_rel_error(table, node, out.grads.at(node), loss) <= 1e-4);
}

TEST_CASE("temperature rescales the logits") {
  Rng rng(33);
  EmbeddingTable table = random_table(rng, 4, 5, 3, 0.3);
  const double hot = infonce_grads(table, 0, 1, {2, 3}, 4.0).value;
  // tau -> infinity flattens the distribution toward the uniform loss.
  CHECK(std::abs(hot - std::log(3.0)) < std::abs(infonce_grads(table, 0, 1, {2, 3}).value -
                                                 std::log(3.0)));
  CHECK_THROWS_WITH_AS(infonce_grads(table, 0, 1, {2}, 0.0), doctest::Contains("temperature"),
                       std::invalid_argument);
  CHECK_THROWS_AS(infonce_grads(table, 0, 1, {}), std::invalid_argument);
  CHECK_THROWS_AS(infonce_grads(table, 0, 9, {2}), std::invalid_argument);
}

TEST_CASE("staged batch kernel agrees with the per-edge tape reference") {
  Rng rng(34);
  EmbeddingTable table = random_table(rng, 8, 6, 3, 0.25);
  const std::vector<Edge> edges = {{0, 1}, {2, 3}, {4, 1}, {6, 7}, {5, 0}};
  const std::vector<std::vector<NodeId>> negatives = {
      {2, 3, 4}, {0, 5}, {4},  // self-contrast fallback shape
      {1, 2, 3, 5}, {6, 7}};
  LossGrads fast = infonce_batch_grads(table, edges, negatives, 1.3);
  LossGrads slow = infonce_batch_reference(table, edges, negatives, 1.3);
  CHECK(fast.value == doctest::Approx(slow.value).epsilon(1e-12));
  REQUIRE(fast.grads.size() == slow.grads.size());
  for (const auto& [id, g] : fast.grads)
    CHECK(testutil::max_abs_diff(g, slow.grads.at(id)) < 1e-10);

  auto loss = [&](const EmbeddingTable& probe) {
    return infonce_batch_grads(probe, edges, negatives, 1.3).value;
  };
  CHECK(fd_max_rel_error(table, 1, fast.grads.at(1), loss) <= 1e-4);
}

TEST_CASE("hinge arithmetic on plain scores") {
  CHECK(margin_loss({0.95}, {}, 0.8, 0.1) == 0.0);
  CHECK(margin_loss({0.5}, {}, 0.8, 0.1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(margin_loss({}, {0.6}, 0.8, 0.2) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(margin_loss({0.5, 0.95}, {0.6}, 0.8, 0.2) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(margin_loss({}, {}) == 0.0);
  CHECK_THROWS_WITH_AS(margin_loss({}, {}, 1.0, 0.1), doctest::Contains("gamma_pos"),
                       std::invalid_argument);
  CHECK_THROWS_AS(margin_loss({}, {}, 0.9, 0.0), std::invalid_argument);
}

TEST_CASE("differentiable hinge matches the plain scores and finite differences") {
  Rng rng(35);
  EmbeddingTable table = random_table(rng, 5, 4, 3, 0.3);
  const std::vector<Edge> pos = {{0, 1}, {2, 3}};
  const std::vector<Edge> neg = {{4, 0}, {3, 1}};
  const double gp = 0.9, gn = 0.1;

  std::vector<double> pos_scores, neg_scores;
  for (const Edge& e : pos)
    pos_scores.push_back(inclusion_score(table.soft(e.child), table.soft(e.parent)));
  for (const Edge& e : neg)
    neg_scores.push_back(inclusion_score(table.soft(e.child), table.soft(e.parent)));
  // Finite differences need the scores away from the hinge kinks.
  for (double s : pos_scores) REQUIRE(std::abs(s - gp) > 1e-3);
  for (double s : neg_scores) REQUIRE(std::abs(s - gn) > 1e-3);

  LossGrads full = margin_grads(table, pos, neg, gp, gn);
  CHECK(full.value == doctest::Approx(margin_loss(pos_scores, neg_scores, gp, gn)).epsilon(1e-10));

  LossGrads staged = margin_batch_grads(table, pos, neg, gp, gn);
  CHECK(staged.value == doctest::Approx(full.value).epsilon(1e-12));
  REQUIRE(staged.grads.size() == full.grads.size());
  for (const auto& [id, g] : staged.grads)
    CHECK(testutil::max_abs_diff(g, full.grads.at(id)) < 1e-10);

  auto loss = [&](const EmbeddingTable& probe) {
    return margin_grads(probe, pos, neg, gp, gn).value;
  };
  for (NodeId node = 0; node < 5; ++node)
    CHECK(fd_max_rel_error(table, node, full.grads.at(node), loss) <= 1e-4);
}

TEST_CASE("inactive hinges contribute nothing") {
  Rng rng(36);
  EmbeddingTable table = random_table(rng, 2, 4, 2, 0.3);
  const double s = inclusion_score(table.soft(0), table.soft(1));
  // Choose margins that both hinges already satisfy.
  const double gp = std::max(0.05, s - 0.02);
  const double gn = std::min(0.95, s + 0.02);
  LossGrads out = margin_grads(table, {{0, 1}}, {{0, 1}}, gp, gn);
  CHECK(out.value == 0.0);
  for (const auto& [id, g] : out.grads) CHECK(frobenius_norm(g) == 0.0);
  LossGrads staged = margin_batch_grads(table, {{0, 1}}, {{0, 1}}, gp, gn);
  CHECK(staged.value == 0.0);
  for (const auto& [id, g] : staged.grads) CHECK(frobenius_norm(g) == 0.0);
}

TEST_CASE("class posterior from the Beta densities") {
  const BetaHead head;  // alpha_E=6, beta_E=1, alpha_C=1, beta_C=6
  const ClassPosterior mid = beta_posterior(head, 0.5);
  CHECK(mid.p_entail == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mid.p_contra == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mid.p_entail + mid.p_contra == 1.0);

  // With these shapes the density ratio collapses to s^5 / (1-s)^5.
  for (double s : {0.1, 0.25, 0.5, 0.75, 0.9, 0.999}) {
    const double expected = std::pow(s, 5) / (std::pow(s, 5) + std::pow(1.0 - s, 5));
    CHECK(beta_posterior(head, s).p_entail == doctest::Approx(expected).epsilon(1e-10));
  }
  // Pinned decimal for s=0.9, computed outside this codebase: 0.59049/0.59050.
  CHECK(beta_posterior(head, 0.9).p_entail == doctest::Approx(0.999983065198984).epsilon(1e-10));
  CHECK(beta_posterior(head, 1.0 - 1e-9).p_entail > 1.0 - 1e-12);

  // Monotone in the score when the heads lean the right way.
  double previous = -1.0;
  for (double s = 0.01; s < 1.0; s += 0.01) {
    const double p = beta_posterior(head, s).p_entail;
    CHECK(p > previous);
    previous = p;
  }

  // Scores outside (0,1) clamp to the boundary evaluation points.
  CHECK(beta_posterior(head, -5.0).p_entail == beta_posterior(head, 1e-6).p_entail);
  CHECK(beta_posterior(head, 2.0).p_entail == beta_posterior(head, 1.0 - 1e-6).p_entail);
}

TEST_CASE("beta head validation") {
  BetaHead bad;
  bad.alpha_contra = 7.0;  // violates alpha_C <= beta_C
  CHECK_THROWS_WITH_AS(beta_posterior(bad, 0.5), doctest::Contains("contradiction"),
                       std::invalid_argument);
  BetaHead swapped;
  swapped.beta_entail = 9.0;
  CHECK_THROWS_WITH_AS(beta_posterior(swapped, 0.5), doctest::Contains("entailment"),
                       std::invalid_argument);
  BetaHead negative;
  negative.alpha_entail = -1.0;
  CHECK_THROWS_AS(beta_posterior(negative, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(beta_posterior(BetaHead{}, std::nan("")), std::invalid_argument);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  Rng rng(37);
  EmbeddingTable table = random_table(rng, 2, 3, 2, 0.2);
  const std::vector<Matrix> before = table.params;
  AdamState state = make_adam_state(table, AdamConfig{});
  adam_step(table, {{0, Matrix(3, 2)}, {1, Matrix(3, 2)}}, state);
  CHECK(table.params == before);
  CHECK(table.step == 1);
}

TEST_CASE("first Adam step moves by about -lr * sign") {
  Rng rng(38);
  EmbeddingTable table = random_table(rng, 1, 2, 2, 0.2);
  const Matrix before = table.params[0];
  AdamConfig config;
  config.lr = 1e-3;
  AdamState state = make_adam_state(table, config);
  Matrix grad(2, 2);
  grad(0, 0) = 0.3;
  grad(0, 1) = -0.7;
  grad(1, 0) = 2.0;
  grad(1, 1) = -1e-4;
  adam_step(table, {{0, grad}}, state);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double moved = table.params[0](r, c) - before(r, c);
      const double expected = -config.lr * (grad(r, c) > 0 ? 1.0 : -1.0);
      CHECK(moved == doctest::Approx(expected).epsilon(1e-3));
    }
  }
}

TEST_CASE("Adam pulls a quadratic bowl to the origin") {
  EmbeddingTable table = init_table({"x"}, 2, 2, 0.01, 3, Regularizer::isotropic(2, 0.2));
  table.params[0] = Matrix::from_rows({{1.0, -0.4}, {0.7, 0.2}});
  AdamConfig config;
  config.lr = 0.01;
  AdamState state = make_adam_state(table, config);
  for (int step = 0; step < 500; ++step)
    adam_step(table, {{0, scale(table.params[0], 2.0)}}, state);
  CHECK(frobenius_norm(table.params[0]) < 1e-3);
  CHECK(table.step == 500);
}

TEST_CASE("gradient clipping equals pre-scaling the gradient") {
  Rng rng(39);
  EmbeddingTable clipped = random_table(rng, 2, 3, 2, 0.2);
  EmbeddingTable manual = clipped;
  Matrix grad(3, 2);
  for (std::size_t k = 0; k < grad.size(); ++k) grad.data()[k] = 4.0 + static_cast<double>(k);
  const double norm = frobenius_norm(grad);
  REQUIRE(norm > 10.0);

  AdamConfig with_clip;
  with_clip.clip_norm = 10.0;
  AdamState s1 = make_adam_state(clipped, with_clip);
  adam_step(clipped, {{1, grad}}, s1);

  AdamConfig no_clip;
  no_clip.clip_norm = 0.0;
  AdamState s2 = make_adam_state(manual, no_clip);
  adam_step(manual, {{1, scale(grad, 10.0 / norm)}}, s2);
  CHECK(clipped.params == manual.params);
}

TEST_CASE("optimizer rejects broken gradients") {
  Rng rng(40);
  EmbeddingTable table = random_table(rng, 2, 3, 2, 0.2);
  AdamState state = make_adam_state(table, AdamConfig{});
  Matrix bad(3, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_WITH_AS(adam_step(table, {{1, bad}}, state), doctest::Contains("node1"),
                       std::runtime_error);
  CHECK_THROWS_AS(adam_step(table, {{0, Matrix(2, 2)}}, state), std::invalid_argument);
  CHECK_THROWS_AS(adam_step(table, {{5, Matrix(3, 2)}}, state), std::invalid_argument);
  CHECK_THROWS_AS(make_adam_state(table, [] {
                    AdamConfig c;
                    c.lr = 0.0;
                    return c;
                  }()),
                  std::invalid_argument);
}

TEST_CASE("twenty steps on one fixed batch strictly decrease the loss") {
  Taxonomy t = transitive_closure(make_binary_tree(2));
  Rng rng(41);
  EmbeddingTable table = random_table(rng, t.num_nodes(), 8, 8, 0.2, 0.01);
  std::vector<Edge> edges(t.closure_edges().begin(), t.closure_edges().end());
  std::vector<std::vector<NodeId>> negatives;
  for (const Edge& e : edges)
    negatives.push_back(sample_reconstruction_negatives(t, e.child, 3, rng));
  AdamConfig config;
  config.lr = 1e-3;
  AdamState state = make_adam_state(table, config);
  double previous = infonce_batch_grads(table, edges, negatives).value;
  for (int step = 0; step < 20; ++step) {
    LossGrads grads = infonce_batch_grads(table, edges, negatives);
    adam_step(table, grads.grads, state);
    const double now = infonce_batch_grads(table, edges, negatives).value;
    CHECK(now < previous);
    previous = now;
  }
}

TEST_CASE("training a single edge drives its loss down every epoch") {
  Taxonomy t = transitive_closure(
      Taxonomy::from_edge_list(std::vector<std::pair<std::string, std::string>>{{"a", "b"}}));
  TrainConfig config;
  config.d = 4;
  config.n = 4;
  config.max_epochs = 10;
  config.eval_every = 1;
  config.patience = 100;
  config.init_std = 0.01;
  config.adam.lr = 1e-3;
  const TrainResult result = train_reconstruction(t, config);
  const auto rows = log_rows(result.log);
  REQUIRE(rows.size() == 10);
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(std::stod(rows[i][1]) < std::stod(rows[i - 1][1]));
  for (const Matrix& m : result.table.params) CHECK(all_finite(m));
}

TEST_CASE("reconstruction training recovers a small tree") {
  Taxonomy t = transitive_closure(make_binary_tree(3));
  TrainConfig config;
  config.d = 8;
  config.n = 8;
  config.negatives = 10;
  config.batch_size = 32;
  config.max_epochs = 2000;
  config.eval_every = 20;
  config.patience = 15;
  config.seed = 2;
  config.adam.lr = 5e-3;
  const TrainResult result = train_reconstruction(t, config);
  const ReconEval eval = evaluate_reconstruction(result.table, t);
  CHECK(eval.ranking.map >= 0.9);
  CHECK(eval.dims.rho_vs_descendants > 0.0);
  CHECK(result.stop_reason.find("epoch") != std::string::npos);
}

TEST_CASE("reconstruction training is bitwise deterministic") {
  Taxonomy t = transitive_closure(make_chain(5));
  TrainConfig config;
  config.d = 4;
  config.n = 4;
  config.negatives = 2;
  config.max_epochs = 8;
  config.eval_every = 2;
  config.seed = 9;
  const TrainResult a = train_reconstruction(t, config);
  const TrainResult b = train_reconstruction(t, config);
  CHECK(a.table.params == b.table.params);
  CHECK(a.table.step == b.table.step);
  CHECK(strip_wall(a.log) == strip_wall(b.log));

  config.seed = 10;
  const TrainResult c = train_reconstruction(t, config);
  CHECK(a.table.params != c.table.params);
}

TEST_CASE("link prediction training learns a fully covered toy tree") {
  Taxonomy t = transitive_closure(make_binary_tree(3));
  const LinkPredSplit split = make_linkpred_split(t, 0.5, 0.2, 0.3, 5);
  TrainConfig config;
  config.d = 8;
  config.n = 8;
  config.negatives = 10;
  config.batch_size = 32;
  config.max_epochs = 150;
  config.eval_every = 5;
  config.patience = 10;
  config.seed = 3;
  config.adam.lr = 5e-3;
  const TrainResult result = train_linkpred(t, split, config);
  const LinkPredEval eval =
      evaluate_linkpred(result.table, t, split, config.eval_negatives, 99);
  CHECK(eval.f1.val_f1 >= 0.8);
  CHECK(eval.f1.test_f1 >= 0.8);
}

TEST_CASE("link prediction training is deterministic and validates the split") {
  Taxonomy t = transitive_closure(make_binary_tree(4));
  const LinkPredSplit split = make_linkpred_split(t, 0.3, 0.1, 0.15, 7);
  TrainConfig config;
  config.d = 4;
  config.n = 4;
  config.negatives = 3;
  config.max_epochs = 6;
  config.eval_every = 2;
  config.seed = 21;
  const TrainResult a = train_linkpred(t, split, config);
  const TrainResult b = train_linkpred(t, split, config);
  CHECK(a.table.params == b.table.params);
  CHECK(strip_wall(a.log) == strip_wall(b.log));
  for (const auto& row : log_rows(a.log)) CHECK(row.size() == 4);

  LinkPredSplit empty_val = split;
  empty_val.val.clear();
  CHECK_THROWS_WITH_AS(train_linkpred(t, empty_val, config),
                       doctest::Contains("validation"), std::invalid_argument);
}

TEST_CASE("inclusion matrix and effective dims match the per-node helpers") {
  Rng rng(42);
  EmbeddingTable table = random_table(rng, 4, 5, 3, 0.3);
  const Matrix s = inclusion_matrix(table);
  const std::vector<double> dims = effective_dims(table);
  for (NodeId i = 0; i < 4; ++i) {
    CHECK(dims[static_cast<std::size_t>(i)] == effective_dim(table.soft(i)));
    for (NodeId j = 0; j < 4; ++j)
      CHECK(s(i, j) == inclusion_score(table.soft(i), table.soft(j)));
  }
}

TEST_CASE("evaluation helpers reject tables that do not match the taxonomy") {
  Taxonomy t = transitive_closure(make_chain(3));
  Rng rng(43);
  EmbeddingTable wrong_count = random_table(rng, 2, 4, 2, 0.2);
  CHECK_THROWS_WITH_AS(evaluate_reconstruction(wrong_count, t), doctest::Contains("3"),
                       std::invalid_argument);
  EmbeddingTable wrong_names = random_table(rng, 3, 4, 2, 0.2);
  CHECK_THROWS_WITH_AS(evaluate_reconstruction(wrong_names, t), doctest::Contains("node0"),
                       std::invalid_argument);
}

TEST_CASE("link prediction evaluation labels one positive per corrupted batch") {
  Taxonomy t = transitive_closure(make_binary_tree(4));
  const LinkPredSplit split = make_linkpred_split(t, 0.2, 0.1, 0.1, 3);
  std::vector<std::string> names;
  for (NodeId id = 0; id < t.num_nodes(); ++id) names.push_back(t.name_of(id));
  EmbeddingTable table = init_table(names, 4, 4, 0.01, 1, Regularizer::isotropic(4, 0.2));
  const LinkPredEval eval = evaluate_linkpred(table, t, split, 4, 17);
  CHECK(eval.val_scores.size() == split.val.size() * 5);
  CHECK(eval.test_scores.size() == split.test.size() * 5);
  int val_positives = 0;
  for (const LabeledScore& s : eval.val_scores) val_positives += s.label ? 1 : 0;
  CHECK(val_positives == static_cast<int>(split.val.size()));

  const LinkPredEval again = evaluate_linkpred(table, t, split, 4, 17);
  CHECK(again.f1.threshold == eval.f1.threshold);
  CHECK(again.f1.val_f1 == eval.f1.val_f1);
}

TEST_CASE("checkpoints round-trip bitwise") {
  Rng rng(44);
  EmbeddingTable table = random_table(rng, 3, 5, 2, 0.3);
  table.seed = 77;
  table.step = 1234;
  table.reg.lambda_diag = {0.1, 0.25};
  const fs::path path = temp_path("roundtrip.ckpt");
  save_checkpoint(table, path.string());
  const EmbeddingTable loaded = load_checkpoint(path.string());
  CHECK(loaded.names == table.names);
  CHECK(loaded.params == table.params);
  CHECK(loaded.reg.lambda_diag == table.reg.lambda_diag);
  CHECK(loaded.seed == table.seed);
  CHECK(loaded.step == table.step);
  fs::remove(path);
}

TEST_CASE("checkpoint loader rejects damaged files") {
  Rng rng(45);
  EmbeddingTable table = random_table(rng, 2, 3, 2, 0.3);
  const fs::path path = temp_path("damaged.ckpt");
  save_checkpoint(table, path.string());
  const auto full_size = fs::file_size(path);

  SUBCASE("truncated header") {
    fs::resize_file(path, 6);
    CHECK_THROWS_WITH_AS(load_checkpoint(path.string()), doctest::Contains("not a spanlat"),
                         std::runtime_error);
  }
  SUBCASE("truncated body") {
    fs::resize_file(path, full_size - 9);
    CHECK_THROWS_WITH_AS(load_checkpoint(path.string()), doctest::Contains("truncated"),
                         std::runtime_error);
  }
  SUBCASE("wrong magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.put('x');
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path.string()), doctest::Contains("not a spanlat"),
                         std::runtime_error);
  }
  SUBCASE("future version") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t version = 9;
    f.write(reinterpret_cast<const char*>(&version), sizeof version);
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path.string()), doctest::Contains("version 9"),
                         std::runtime_error);
  }
  SUBCASE("trailing junk") {
    std::ofstream f(path, std::ios::app | std::ios::binary);
    f << "extra";
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path.string()), doctest::Contains("trailing"),
                         std::runtime_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_checkpoint((path.string() + ".nope")),
                         doctest::Contains("cannot open"), std::runtime_error);
  }
  fs::remove(path);
}

TEST_CASE("trained checkpoints reload into identical evaluations") {
  Taxonomy t = transitive_closure(make_chain(4));
  TrainConfig config;
  config.d = 4;
  config.n = 4;
  config.negatives = 2;
  config.max_epochs = 5;
  config.eval_every = 5;
  const TrainResult result = train_reconstruction(t, config);
  const fs::path path = temp_path("trained.ckpt");
  save_checkpoint(result.table, path.string());
  const EmbeddingTable loaded = load_checkpoint(path.string());
  CHECK(loaded.params == result.table.params);
  const ReconEval before = evaluate_reconstruction(result.table, t);
  const ReconEval after = evaluate_reconstruction(loaded, t);
  CHECK(before.ranking.map == after.ranking.map);
  CHECK(before.ranking.mean_rank == after.ranking.mean_rank);
  fs::remove(path);
}
