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

#ifndef SPANLAT_PROJECTOR_HPP
#define SPANLAT_PROJECTOR_HPP

#include <vector>

#include "spanlat/autodiff.hpp"
#include "spanlat/matrix.hpp"

namespace spanlat {

/// A concept's spanning vectors: the columns of a d-by-n matrix. The column
/// span, not the individual vectors, is the representation.
struct SpanMatrix {
  Matrix x;

  explicit SpanMatrix(Matrix m);
  int ambient_dim() const { return x.rows(); }
  int num_vectors() const { return x.cols(); }
};

/// Diagonal ridge term added to the Gram matrix when building a soft
/// projector. Strictly positive entries; the all-zero case is only
/// meaningful for hard projection and is rejected by soft_projector.
struct Regularizer {
  std::vector<double> lambda_diag;

  static Regularizer isotropic(int n, double lambda);
  bool strictly_positive() const;
  Matrix as_matrix() const;
};

/// Symmetric PSD operator representing a subspace: exactly idempotent with
/// 0/1 spectrum when hard, spectrum in (0,1) when built with a positive
/// ridge.
struct Projector {
  Matrix p;

  int dim() const { return p.rows(); }
};

/// Orthogonal projector onto the column span, via the Gram pseudoinverse.
/// Rank-deficient spans are fine; the result is idempotent and its trace
/// equals the rank.
Projector hard_projector(const SpanMatrix& span, double rank_tol = 1e-10);

/// Ridge-regularized projector X (X^T X + Lambda)^-1 X^T. Not idempotent;
/// eigenvalues lie strictly below 1, which is what makes the effective
/// dimension trainable.
Projector soft_projector(const SpanMatrix& span, const Regularizer& reg);

/// tr(P Q), computed as the dot product of the vectorized operators, which
/// coincides for symmetric arguments and is exactly symmetric in p and q.
double overlap(const Projector& p, const Projector& q);

/// tr(P): rank for hard projectors, a continuous effective dimension for
/// soft ones.
double effective_dim(const Projector& p);

/// Normalized inclusion score tr(P_c P_t) / tr(P_c): how much of the
/// conditioned subspace lies within the target. Reaches 1 exactly for hard
/// projectors with conditioned contained in target. Throws on a degenerate
/// conditioned subspace (trace <= 1e-12).
double inclusion_score(const Projector& conditioned, const Projector& target);

/// Exact containment predicate for hard projectors: || P_outer P_inner -
/// P_inner ||_F <= tol. Both arguments must be idempotent within tol;
/// otherwise an error suggests hard_projector.
bool is_subspace_of(const Projector& inner, const Projector& outer, double tol = 1e-6);

// Tape-recorded counterparts used by the training losses. Values agree with
// the plain functions up to rounding; gradients flow to the span leaf.
ad::Var traced_soft_projector(ad::Tape& tape, ad::Var span, const Regularizer& reg);
ad::Var traced_overlap(ad::Tape& tape, ad::Var p, ad::Var q);
ad::Var traced_inclusion_score(ad::Tape& tape, ad::Var conditioned, ad::Var target);

}  // namespace spanlat

#endif  // SPANLAT_PROJECTOR_HPP
