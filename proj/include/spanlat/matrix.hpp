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

#ifndef SPANLAT_MATRIX_HPP
#define SPANLAT_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace spanlat {

/// Dense row-major matrix of doubles. All shapes are validated at call
/// boundaries; operations on finite inputs produce finite outputs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols);  // zero-initialized

  static Matrix identity(int n);
  static Matrix diag(const std::vector<double>& entries);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_str() const;

  bool operator==(const Matrix& other) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Serial reference kernel. Kept alongside the OpenMP path so the two can be
// checked against each other; both accumulate in identical order, so results
// are bitwise equal.
Matrix matmul_serial(const Matrix& a, const Matrix& b);

// Product a*b. Uses OpenMP over output rows when the flop count is large
// enough to pay for the fork; falls back to the serial kernel otherwise.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);
double trace(const Matrix& m);

/// Frobenius inner product; for symmetric p, q this equals tr(p*q).
double dot(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double max_asymmetry(const Matrix& m);
bool all_finite(const Matrix& m);

/// Throws std::invalid_argument when max |m_ij - m_ji| exceeds
/// tol * max(1, max|m_ij|). The message reports the asymmetry magnitude.
void require_symmetric(const Matrix& m, double tol, const char* op);

/// Lower-triangular Cholesky factor, m = L L^T.
struct CholeskyFactor {
  Matrix lower;
};

/// Factor a symmetric positive-definite matrix. Throws std::runtime_error
/// identifying the failing pivot index when a pivot is <= 0. Symmetry is
/// checked to 1e-10.
CholeskyFactor cholesky(const Matrix& m);

/// Solve L L^T z = rhs given the factor.
Matrix chol_solve(const CholeskyFactor& factor, const Matrix& rhs);

/// Solve m z = rhs for symmetric positive-definite m via Cholesky.
Matrix spd_solve(const Matrix& m, const Matrix& rhs);

/// Explicit inverse of a symmetric positive-definite matrix.
Matrix spd_inverse(const Matrix& m);

/// Eigenvalues in descending order; eigenvectors as orthonormal columns,
/// m = V diag(w) V^T.
struct EigenDecomposition {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Dense and exact
/// to near machine precision; intended for dimensions up to a few hundred.
EigenDecomposition sym_eig(const Matrix& m);

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix. Eigenvalues below
/// rank_tol times the largest eigenvalue are treated as zero.
Matrix pseudoinverse(const Matrix& m, double rank_tol = 1e-10);

}  // namespace spanlat

#endif  // SPANLAT_MATRIX_HPP
