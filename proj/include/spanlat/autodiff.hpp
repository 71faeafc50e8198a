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

#ifndef SPANLAT_AUTODIFF_HPP
#define SPANLAT_AUTODIFF_HPP

#include <functional>
#include <unordered_map>
#include <vector>

#include "spanlat/matrix.hpp"

namespace spanlat::ad {

class Tape;

/// Handle to a recorded value. Cheap to copy; owned by the Tape.
struct Var {
  int id = -1;
  Tape* tape = nullptr;

  const Matrix& value() const;
  double scalar() const;  // value()(0,0); requires 1x1
};

/// Gradients keyed by leaf node id.
using GradientMap = std::unordered_map<int, Matrix>;

/// Reverse-mode tape over the matrix primitives used by the losses. A tape
/// records one loss evaluation, runs a single backward pass, and is then
/// discarded. Construction and backward are single-threaded; independent
/// tapes may run concurrently on different threads.
///
/// Nodes are stored in topological order by construction: every operation
/// takes existing Vars and appends one node.
class Tape {
 public:
  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }
  Var scalar_constant(double v);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double factor);
  Var transpose(Var a);
  Var trace(Var a);  // 1x1 result

  // Value is M^-1, materialized via the Cholesky factor. The backward rule
  // is dM = -M^-1 dM^-1_adj M^-1; it reuses the forward inverse, never
  // re-factorizing.
  Var spd_inverse(Var m);

  // Elementwise. The hinge subgradient at exactly 0 is taken as 0.
  Var hinge(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sigmoid(Var a);

  // 1x1 / 1x1.
  Var div_scalar(Var a, Var b);

  const Matrix& value(int id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse pass from a scalar loss. Returns gradients for every
  /// requires_grad leaf (zero matrices for leaves the loss does not reach).
  /// Deterministic: identical tapes produce bitwise-identical gradients.
  GradientMap backward(Var loss) const;

 private:
  enum class Op {
    kLeaf,
    kMatMul,
    kAdd,
    kSub,
    kScale,
    kTranspose,
    kTrace,
    kSpdInverse,
    kHinge,
    kExp,
    kLog,
    kSigmoid,
    kDivScalar,
  };
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double factor = 0.0;
    Matrix value;
    bool requires_grad = false;
  };

  Var push(Node node);
  void check_owned(Var v, const char* op) const;

  std::vector<Node> nodes_;
};

/// Compares the analytic gradient against central finite differences of f,
/// entry by entry, with step h. Returns the max relative error, with
/// denominator max(|g|, 1e-8) for analytic entry g.
double finite_difference_check(const std::function<double(const Matrix&)>& f,
                               const Matrix& x, const Matrix& analytic_grad,
                               double step);

}  // namespace spanlat::ad

#endif  // SPANLAT_AUTODIFF_HPP
