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

#include "spanlat/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spanlat {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
  }
}

void require_square(const Matrix& m, const char* op) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(op) + ": matrix must be square, got " +
                                m.shape_str());
  }
}

// Below this flop count the OpenMP fork costs more than the multiply.
constexpr std::size_t kParallelMatmulFlops = std::size_t{1} << 18;

}  // namespace

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) {
    throw std::invalid_argument("Matrix: negative dimension");
  }
  data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diag(const std::vector<double>& entries) {
  const int n = static_cast<int>(entries.size());
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = entries[i];
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) {
      throw std::invalid_argument("Matrix::from_rows: ragged rows");
    }
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

namespace {

// Row i of c accumulates a(i,k)*b(k,:) over k in increasing order. The
// parallel path distributes rows across threads without changing the
// per-element accumulation order.
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, int i) {
  const int inner = a.cols();
  const int cols = b.cols();
  double* crow = c.data() + static_cast<std::size_t>(i) * cols;
  const double* arow = a.data() + static_cast<std::size_t>(i) * inner;
  for (int k = 0; k < inner; ++k) {
    const double aik = arow[k];
    if (aik == 0.0) continue;
    const double* brow = b.data() + static_cast<std::size_t>(k) * cols;
    for (int j = 0; j < cols; ++j) crow[j] += aik * brow[j];
  }
}

void check_matmul_shapes(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: dimension mismatch " + a.shape_str() + " * " +
                                b.shape_str());
  }
}

}  // namespace

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  check_matmul_shapes(a, b);
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) matmul_row(a, b, c, i);
  return c;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_matmul_shapes(a, b);
  const std::size_t flops = static_cast<std::size_t>(a.rows()) * a.cols() * b.cols();
  if (flops < kParallelMatmulFlops) {
    return matmul_serial(a, b);
  }
  Matrix c(a.rows(), b.cols());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows(); ++i) matmul_row(a, b, c, i);
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = a.data()[i] + b.data()[i];
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = a.data()[i] - b.data()[i];
  return c;
}

Matrix scale(const Matrix& m, double factor) {
  Matrix c(m.rows(), m.cols());
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = m.data()[i] * factor;
  return c;
}

double trace(const Matrix& m) {
  require_square(m, "trace");
  double t = 0.0;
  for (int i = 0; i < m.rows(); ++i) t += m(i, i);
  return t;
}

double dot(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
  return std::sqrt(s);
}

double max_abs(const Matrix& m) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) v = std::max(v, std::fabs(m.data()[i]));
  return v;
}

double max_asymmetry(const Matrix& m) {
  double v = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = i + 1; j < m.cols(); ++j) v = std::max(v, std::fabs(m(i, j) - m(j, i)));
  return v;
}

bool all_finite(const Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i])) return false;
  }
  return true;
}

void require_symmetric(const Matrix& m, double tol, const char* op) {
  require_square(m, op);
  const double asym = max_asymmetry(m);
  if (asym > tol * std::max(1.0, max_abs(m))) {
    throw std::invalid_argument(std::string(op) + ": matrix not symmetric, max asymmetry " +
                                std::to_string(asym));
  }
}

CholeskyFactor cholesky(const Matrix& m) {
  require_symmetric(m, 1e-10, "cholesky");
  const int n = m.rows();
  Matrix lower(n, n);
  for (int j = 0; j < n; ++j) {
    double d = m(j, j);
    for (int k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
    if (d <= 0.0) {
      throw std::runtime_error("cholesky: matrix not positive-definite, pivot " +
                               std::to_string(j) + " = " + std::to_string(d));
    }
    lower(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / lower(j, j);
    }
  }
  return CholeskyFactor{std::move(lower)};
}

Matrix chol_solve(const CholeskyFactor& factor, const Matrix& rhs) {
  const Matrix& lower = factor.lower;
  const int n = lower.rows();
  if (rhs.rows() != n) {
    throw std::invalid_argument("chol_solve: rhs rows " + rhs.shape_str() +
                                " do not match factor " + lower.shape_str());
  }
  Matrix z = rhs;
  // Forward substitution L y = rhs, column by column.
  for (int c = 0; c < z.cols(); ++c) {
    for (int i = 0; i < n; ++i) {
      double s = z(i, c);
      for (int k = 0; k < i; ++k) s -= lower(i, k) * z(k, c);
      z(i, c) = s / lower(i, i);
    }
    // Back substitution L^T z = y.
    for (int i = n - 1; i >= 0; --i) {
      double s = z(i, c);
      for (int k = i + 1; k < n; ++k) s -= lower(k, i) * z(k, c);
      z(i, c) = s / lower(i, i);
    }
  }
  return z;
}

Matrix spd_solve(const Matrix& m, const Matrix& rhs) {
  return chol_solve(cholesky(m), rhs);
}

Matrix spd_inverse(const Matrix& m) {
  return chol_solve(cholesky(m), Matrix::identity(m.rows()));
}

EigenDecomposition sym_eig(const Matrix& m) {
  require_symmetric(m, 1e-10, "sym_eig");
  const int n = m.rows();
  Matrix a = m;
  Matrix v = Matrix::identity(n);

  const double norm_ref = std::max(frobenius_norm(a), 1e-300);
  constexpr int kMaxSweeps = 64;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= 1e-15 * norm_ref) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = akp - s * (akq + tau * akp);
          a(p, k) = a(k, p);
          a(k, q) = akq + s * (akp - tau * akq);
          a(q, k) = a(k, q);
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = vkp - s * (vkq + tau * vkp);
          v(k, q) = vkq + s * (vkp - tau * vkq);
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&a](int x, int y) { return a(x, x) > a(y, y); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    out.eigenvalues[j] = a(order[j], order[j]);
    for (int i = 0; i < n; ++i) out.eigenvectors(i, j) = v(i, order[j]);
  }
  return out;
}

Matrix pseudoinverse(const Matrix& m, double rank_tol) {
  EigenDecomposition eig = sym_eig(m);
  const int n = m.rows();
  double wmax = 0.0;
  for (double w : eig.eigenvalues) wmax = std::max(wmax, w);
  if (wmax <= 0.0) return Matrix(n, n);

  const double cutoff = rank_tol * wmax;
  std::vector<double> inv(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (eig.eigenvalues[i] > cutoff) inv[i] = 1.0 / eig.eigenvalues[i];
  }
  const Matrix vt = transpose(eig.eigenvectors);
  return matmul(matmul(eig.eigenvectors, Matrix::diag(inv)), vt);
}

}  // namespace spanlat
