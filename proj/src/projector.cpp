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

#include "spanlat/projector.hpp"

#include <cmath>
#include <stdexcept>

namespace spanlat {

namespace {

constexpr double kDegenerateTrace = 1e-12;

Matrix symmetrize(const Matrix& m) { return scale(add(m, transpose(m)), 0.5); }

void require_same_dim(const Projector& p, const Projector& q, const char* op) {
  if (p.dim() != q.dim()) {
    throw std::invalid_argument(std::string(op) + ": ambient dimension mismatch " +
                                p.p.shape_str() + " vs " + q.p.shape_str());
  }
}

}  // namespace

SpanMatrix::SpanMatrix(Matrix m) : x(std::move(m)) {
  if (x.rows() < 1 || x.cols() < 1) {
    throw std::invalid_argument("SpanMatrix: dimensions must be at least 1, got " +
                                x.shape_str());
  }
  if (!all_finite(x)) {
    throw std::invalid_argument("SpanMatrix: entries must be finite");
  }
}

Regularizer Regularizer::isotropic(int n, double lambda) {
  if (n < 1) throw std::invalid_argument("Regularizer: n must be >= 1");
  return Regularizer{std::vector<double>(static_cast<std::size_t>(n), lambda)};
}

bool Regularizer::strictly_positive() const {
  if (lambda_diag.empty()) return false;
  for (double v : lambda_diag) {
    if (!(v > 0.0)) return false;
  }
  return true;
}

Matrix Regularizer::as_matrix() const { return Matrix::diag(lambda_diag); }

Projector hard_projector(const SpanMatrix& span, double rank_tol) {
  const Matrix xt = transpose(span.x);
  const Matrix gram = matmul(xt, span.x);
  const Matrix pinv = pseudoinverse(gram, rank_tol);
  return Projector{symmetrize(matmul(matmul(span.x, pinv), xt))};
}

Projector soft_projector(const SpanMatrix& span, const Regularizer& reg) {
  if (static_cast<int>(reg.lambda_diag.size()) != span.num_vectors()) {
    throw std::invalid_argument("soft_projector: regularizer length " +
                                std::to_string(reg.lambda_diag.size()) +
                                " does not match span columns " +
                                std::to_string(span.num_vectors()));
  }
  if (!reg.strictly_positive()) {
    throw std::invalid_argument("soft_projector: regularizer must be strictly positive");
  }
  const Matrix xt = transpose(span.x);
  Matrix m = matmul(xt, span.x);
  for (int i = 0; i < m.rows(); ++i) m(i, i) += reg.lambda_diag[i];
  // Solves against X^T; the inverse is never materialized on this path.
  return Projector{symmetrize(matmul(span.x, spd_solve(m, xt)))};
}

double overlap(const Projector& p, const Projector& q) {
  require_same_dim(p, q, "overlap");
  return dot(p.p, q.p);
}

double effective_dim(const Projector& p) { return trace(p.p); }

double inclusion_score(const Projector& conditioned, const Projector& target) {
  require_same_dim(conditioned, target, "inclusion_score");
  const double t = trace(conditioned.p);
  if (t <= kDegenerateTrace) {
    throw std::invalid_argument("inclusion_score: degenerate subspace, trace " +
                                std::to_string(t));
  }
  return dot(conditioned.p, target.p) / t;
}

bool is_subspace_of(const Projector& inner, const Projector& outer, double tol) {
  require_same_dim(inner, outer, "is_subspace_of");
  for (const Projector* pr : {&inner, &outer}) {
    const double resid = frobenius_norm(sub(matmul(pr->p, pr->p), pr->p));
    if (resid > tol) {
      throw std::invalid_argument(
          "is_subspace_of: operand is not idempotent (residual " + std::to_string(resid) +
          "); build it with hard_projector");
    }
  }
  return frobenius_norm(sub(matmul(outer.p, inner.p), inner.p)) <= tol;
}

ad::Var traced_soft_projector(ad::Tape& tape, ad::Var span, const Regularizer& reg) {
  const Matrix& x = span.value();
  if (static_cast<int>(reg.lambda_diag.size()) != x.cols()) {
    throw std::invalid_argument("traced_soft_projector: regularizer length mismatch");
  }
  if (!reg.strictly_positive()) {
    throw std::invalid_argument("traced_soft_projector: regularizer must be strictly positive");
  }
  ad::Var xt = tape.transpose(span);
  ad::Var m = tape.add(tape.matmul(xt, span), tape.constant(reg.as_matrix()));
  ad::Var inv = tape.spd_inverse(m);
  return tape.matmul(tape.matmul(span, inv), xt);
}

ad::Var traced_overlap(ad::Tape& tape, ad::Var p, ad::Var q) {
  return tape.trace(tape.matmul(p, q));
}

ad::Var traced_inclusion_score(ad::Tape& tape, ad::Var conditioned, ad::Var target) {
  const double t = trace(conditioned.value());
  if (t <= kDegenerateTrace) {
    throw std::invalid_argument("inclusion_score: degenerate subspace, trace " +
                                std::to_string(t));
  }
  return tape.div_scalar(tape.trace(tape.matmul(conditioned, target)),
                         tape.trace(conditioned));
}

}  // namespace spanlat
