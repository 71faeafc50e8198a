#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "spanlat/matrix.hpp"
#include "spanlat/projector.hpp"
#include "testutil.hpp"

using namespace spanlat;
using testutil::Rng;

namespace {

Matrix unit_column(int d, int which) {
  Matrix m(d, 1);
  m(which, 0) = 1.0;
  return m;
}

// Column at angle theta from e1 in the plane span(e1, e2).
Matrix angled_column(int d, double theta) {
  Matrix m(d, 1);
  m(0, 0) = std::cos(theta);
  m(1, 0) = std::sin(theta);
  return m;
}

// Rank oracle: eigenvalues of an (approximate) 0/1 spectrum above 1/2.
int eigenvalue_rank(const Matrix& p) {
  EigenDecomposition eig = sym_eig(p);
  int count = 0;
  for (double w : eig.eigenvalues)
    if (w > 0.5) ++count;
  return count;
}

double plain_soft_overlap(const Matrix& x, double lambda, const Matrix& q) {
  Projector p = soft_projector(SpanMatrix(x), Regularizer::isotropic(x.cols(), lambda));
  return dot(p.p, q);
}

}  // namespace

TEST_CASE("hard projector of a unit vector is the outer product") {
  Projector p = hard_projector(SpanMatrix(unit_column(2, 0)));
  CHECK(testutil::max_abs_diff(p.p, Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}})) < 1e-14);
}

TEST_CASE("duplicated columns do not change the span") {
  Matrix x(2, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 1.0;
  Projector p = hard_projector(SpanMatrix(x));
  CHECK(testutil::max_abs_diff(p.p, Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}})) < 1e-12);
  CHECK(effective_dim(p) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("hard projector of a full-rank span: trace, idempotence, rank") {
  Rng rng(71);
  Matrix x = testutil::random_matrix(rng, 8, 3);
  Projector p = hard_projector(SpanMatrix(x));
  CHECK(trace(p.p) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(frobenius_norm(sub(matmul(p.p, p.p), p.p)) <= 1e-7);
  CHECK(eigenvalue_rank(p.p) == 3);
  CHECK(max_asymmetry(p.p) == 0.0);
}

TEST_CASE("soft projector of a unit vector has the closed form 1/(1+lambda)") {
  Projector p = soft_projector(SpanMatrix(unit_column(2, 0)), Regularizer::isotropic(1, 0.2));
  CHECK(p.p(0, 0) == doctest::Approx(1.0 / 1.2).epsilon(1e-12));
  CHECK(std::abs(p.p(0, 1)) < 1e-15);
  CHECK(std::abs(p.p(1, 1)) < 1e-15);
  CHECK(effective_dim(p) == doctest::Approx(0.833333333).epsilon(1e-8));
}

TEST_CASE("soft projector approaches the hard one as the ridge vanishes") {
  Rng rng(72);
  Matrix x = testutil::random_full_rank(rng, 10, 4);
  Projector hard = hard_projector(SpanMatrix(x));
  Projector soft = soft_projector(SpanMatrix(x), Regularizer::isotropic(4, 1e-9));
  CHECK(frobenius_norm(sub(soft.p, hard.p)) <= 1e-4);
}

TEST_CASE("soft projector eigenvalues lie strictly inside (0,1)") {
  Rng rng(73);
  Matrix x = testutil::random_matrix(rng, 16, 4);
  Projector p = soft_projector(SpanMatrix(x), Regularizer::isotropic(4, 0.2));
  EigenDecomposition eig = sym_eig(p.p);
  for (int i = 0; i < 4; ++i) {
    CHECK(eig.eigenvalues[i] > 0.0);
    CHECK(eig.eigenvalues[i] < 1.0);
  }
  for (int i = 4; i < 16; ++i) CHECK(std::abs(eig.eigenvalues[i]) < 1e-10);
}

TEST_CASE("span and regularizer validation") {
  Matrix bad(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_WITH_AS(SpanMatrix{bad}, doctest::Contains("finite"), std::invalid_argument);

  SpanMatrix x(unit_column(3, 0));
  CHECK_THROWS_AS(soft_projector(x, Regularizer::isotropic(2, 0.2)), std::invalid_argument);
  CHECK_THROWS_WITH_AS(soft_projector(x, Regularizer{{0.0}}),
                       doctest::Contains("strictly positive"), std::invalid_argument);
  CHECK_THROWS_AS(soft_projector(x, Regularizer{{-0.3}}), std::invalid_argument);
}

TEST_CASE("overlap on axis-aligned and angled lines") {
  Projector p1 = hard_projector(SpanMatrix(unit_column(2, 0)));
  Projector p2 = hard_projector(SpanMatrix(unit_column(2, 1)));
  CHECK(std::abs(overlap(p1, p2)) < 1e-14);

  Projector diag45 = hard_projector(SpanMatrix(angled_column(2, std::acos(-1.0) / 4)));
  CHECK(overlap(p1, diag45) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("overlap of a rank-k projector with itself is k") {
  Rng rng(74);
  for (int k : {1, 2, 5}) {
    Projector p = hard_projector(SpanMatrix(testutil::random_matrix(rng, 9, k)));
    CHECK(overlap(p, p) == doctest::Approx(static_cast<double>(k)).epsilon(1e-8));
  }
}

TEST_CASE("overlap matches the trace form and is exactly symmetric") {
  Rng rng(75);
  Projector p{testutil::random_psd_rank(rng, 7, 3)};
  Projector q{testutil::random_psd_rank(rng, 7, 2)};
  CHECK(std::abs(overlap(p, q) - trace(matmul(p.p, q.p))) <= 1e-10);
  CHECK(overlap(p, q) == overlap(q, p));  // bitwise, not approximate

  Projector small{Matrix::identity(3)};
  CHECK_THROWS_WITH_AS(overlap(p, small), doctest::Contains("7x7"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(overlap(p, small), doctest::Contains("3x3"), std::invalid_argument);
}

TEST_CASE("effective dimension of hard, soft, and zero operators") {
  Rng rng(76);
  Projector rank3 = hard_projector(SpanMatrix(testutil::random_matrix(rng, 6, 3)));
  CHECK(effective_dim(rank3) == doctest::Approx(3.0).epsilon(1e-8));

  Projector soft = soft_projector(SpanMatrix(unit_column(2, 0)), Regularizer::isotropic(1, 0.2));
  CHECK(effective_dim(soft) == doctest::Approx(1.0 / 1.2).epsilon(1e-12));

  CHECK(effective_dim(Projector{Matrix(4, 4)}) == 0.0);
}

TEST_CASE("inclusion score: containment, orthogonality, angle") {
  Matrix plane(3, 2);
  plane(0, 0) = 1.0;
  plane(1, 1) = 1.0;
  Projector line = hard_projector(SpanMatrix(unit_column(3, 0)));
  Projector span12 = hard_projector(SpanMatrix(plane));
  CHECK(inclusion_score(line, span12) == doctest::Approx(1.0).epsilon(1e-10));

  Projector ortho = hard_projector(SpanMatrix(unit_column(3, 2)));
  CHECK(std::abs(inclusion_score(line, ortho)) < 1e-14);

  Projector deg60 = hard_projector(SpanMatrix(angled_column(3, std::acos(-1.0) / 3)));
  CHECK(inclusion_score(line, deg60) == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("inclusion score rejects a degenerate conditioned subspace") {
  Projector zero{Matrix(3, 3)};
  Projector id{Matrix::identity(3)};
  CHECK_THROWS_WITH_AS(inclusion_score(zero, id), doctest::Contains("degenerate"),
                       std::invalid_argument);
}

TEST_CASE("containment predicate on hard projectors") {
  Matrix plane(3, 2);
  plane(0, 0) = 1.0;
  plane(1, 1) = 1.0;
  Projector line = hard_projector(SpanMatrix(unit_column(3, 0)));
  Projector span12 = hard_projector(SpanMatrix(plane));
  Projector other = hard_projector(SpanMatrix(unit_column(3, 1)));

  CHECK(is_subspace_of(line, span12));
  CHECK_FALSE(is_subspace_of(line, other));
  CHECK_FALSE(is_subspace_of(span12, line));

  Rng rng(77);
  Projector p = hard_projector(SpanMatrix(testutil::random_matrix(rng, 8, 3)));
  CHECK(is_subspace_of(p, p));
}

TEST_CASE("containment predicate rejects non-idempotent operators") {
  Projector soft = soft_projector(SpanMatrix(unit_column(2, 0)), Regularizer::isotropic(1, 0.5));
  Projector id{Matrix::identity(2)};
  CHECK_THROWS_WITH_AS(is_subspace_of(soft, id), doctest::Contains("hard_projector"),
                       std::invalid_argument);
}

TEST_CASE("every nonzero eigenvalue shrinks as the ridge grows") {
  Rng rng(78);
  Matrix x = testutil::random_full_rank(rng, 9, 4);
  std::vector<double> lambdas = {0.05, 0.2, 0.8, 3.0};
  std::vector<std::vector<double>> spectra;
  for (double lambda : lambdas) {
    Projector p = soft_projector(SpanMatrix(x), Regularizer::isotropic(4, lambda));
    spectra.push_back(sym_eig(p.p).eigenvalues);
  }
  for (std::size_t step = 1; step < spectra.size(); ++step)
    for (int i = 0; i < 4; ++i) CHECK(spectra[step][i] < spectra[step - 1][i]);
}

TEST_CASE("idempotence residual decays monotonically as the ridge vanishes") {
  Rng rng(79);
  Matrix x = testutil::random_full_rank(rng, 8, 3);
  double prev = -1.0;
  for (double lambda : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    Projector p = soft_projector(SpanMatrix(x), Regularizer::isotropic(3, lambda));
    double resid = frobenius_norm(sub(matmul(p.p, p.p), p.p));
    if (prev >= 0.0) CHECK(resid < prev);
    prev = resid;
  }
  CHECK(prev <= 1e-5);
}

TEST_CASE("self inclusion is exactly one for hard projectors") {
  Rng rng(80);
  for (int k : {1, 3, 6}) {
    Projector p = hard_projector(SpanMatrix(testutil::random_matrix(rng, 10, k)));
    CHECK(inclusion_score(p, p) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("containment and unit inclusion score agree") {
  Rng rng(81);
  for (int trial = 0; trial < 20; ++trial) {
    // Half the trials nest the subspaces by construction, half do not.
    Matrix outer_basis = testutil::random_orthonormal(rng, 10, 4);
    Matrix inner;
    if (trial % 2 == 0) {
      inner = matmul(outer_basis, testutil::random_matrix(rng, 4, 2));
    } else {
      inner = testutil::random_matrix(rng, 10, 2);
    }
    Projector pi = hard_projector(SpanMatrix(inner));
    Projector pj = hard_projector(SpanMatrix(outer_basis));
    const bool contained = is_subspace_of(pi, pj, 1e-6);
    const bool score_is_one = std::abs(inclusion_score(pi, pj) - 1.0) <= 1e-7;
    CHECK(contained == score_is_one);
  }
}

TEST_CASE("hard projector is invariant to a change of basis") {
  Rng rng(82);
  Matrix x = testutil::random_matrix(rng, 9, 4);
  Matrix g = testutil::random_full_rank(rng, 4, 4);
  Projector a = hard_projector(SpanMatrix(x));
  Projector b = hard_projector(SpanMatrix(matmul(x, g)));
  CHECK(frobenius_norm(sub(a.p, b.p)) <= 1e-8);
}

TEST_CASE("taped soft projector agrees with the plain one") {
  Rng rng(83);
  Matrix x = testutil::random_matrix(rng, 6, 3);
  Regularizer reg = Regularizer::isotropic(3, 0.2);

  ad::Tape tape;
  ad::Var xv = tape.leaf(x);
  ad::Var pv = traced_soft_projector(tape, xv, reg);
  Projector plain = soft_projector(SpanMatrix(x), reg);
  CHECK(testutil::max_abs_diff(pv.value(), plain.p) <= 1e-12);
}

TEST_CASE("taped overlap gradient matches finite differences") {
  Rng rng(84);
  Matrix x0 = testutil::random_matrix(rng, 5, 2);
  Matrix q = testutil::random_psd_rank(rng, 5, 2);
  Regularizer reg = Regularizer::isotropic(2, 0.3);

  ad::Tape tape;
  ad::Var x = tape.leaf(x0);
  ad::Var p = traced_soft_projector(tape, x, reg);
  ad::Var loss = traced_overlap(tape, p, tape.constant(q));
  ad::GradientMap grads = tape.backward(loss);

  CHECK(loss.scalar() == doctest::Approx(plain_soft_overlap(x0, 0.3, q)).epsilon(1e-12));
  double err = ad::finite_difference_check(
      [&](const Matrix& m) { return plain_soft_overlap(m, 0.3, q); }, x0, grads.at(x.id),
      1e-5);
  CHECK(err <= 1e-5);
}

TEST_CASE("taped inclusion score gradient matches finite differences") {
  Rng rng(85);
  Matrix x0 = testutil::random_matrix(rng, 5, 2);
  Matrix y0 = testutil::random_matrix(rng, 5, 3);
  Regularizer rx = Regularizer::isotropic(2, 0.2);
  Regularizer ry = Regularizer::isotropic(3, 0.2);

  auto plain = [&](const Matrix& xm, const Matrix& ym) {
    Projector pc = soft_projector(SpanMatrix(xm), rx);
    Projector pt = soft_projector(SpanMatrix(ym), ry);
    return inclusion_score(pc, pt);
  };

  ad::Tape tape;
  ad::Var x = tape.leaf(x0);
  ad::Var y = tape.leaf(y0);
  ad::Var score = traced_inclusion_score(tape, traced_soft_projector(tape, x, rx),
                                         traced_soft_projector(tape, y, ry));
  ad::GradientMap grads = tape.backward(score);

  CHECK(score.scalar() == doctest::Approx(plain(x0, y0)).epsilon(1e-12));
  double err_x = ad::finite_difference_check(
      [&](const Matrix& m) { return plain(m, y0); }, x0, grads.at(x.id), 1e-5);
  double err_y = ad::finite_difference_check(
      [&](const Matrix& m) { return plain(x0, m); }, y0, grads.at(y.id), 1e-5);
  CHECK(err_x <= 1e-5);
  CHECK(err_y <= 1e-5);
}
