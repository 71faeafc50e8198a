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

#include "spanlat/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace spanlat::ad {

const Matrix& Var::value() const {
  if (tape == nullptr) throw std::logic_error("Var: not bound to a tape");
  return tape->value(id);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw std::invalid_argument("Var::scalar: value is " + v.shape_str() + ", expected 1x1");
  }
  return v(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1, this};
}

void Tape::check_owned(Var v, const char* op) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw std::logic_error(std::string(op) + ": Var does not belong to this tape");
  }
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::scalar_constant(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Tape::matmul(Var a, Var b) {
  check_owned(a, "matmul");
  check_owned(b, "matmul");
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = spanlat::matmul(nodes_[a.id].value, nodes_[b.id].value);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check_owned(a, "add");
  check_owned(b, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = spanlat::add(nodes_[a.id].value, nodes_[b.id].value);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check_owned(a, "sub");
  check_owned(b, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = spanlat::sub(nodes_[a.id].value, nodes_[b.id].value);
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  check_owned(a, "scale");
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.factor = factor;
  n.value = spanlat::scale(nodes_[a.id].value, factor);
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  check_owned(a, "transpose");
  Node n;
  n.op = Op::kTranspose;
  n.a = a.id;
  n.value = spanlat::transpose(nodes_[a.id].value);
  return push(std::move(n));
}

Var Tape::trace(Var a) {
  check_owned(a, "trace");
  Node n;
  n.op = Op::kTrace;
  n.a = a.id;
  n.value = Matrix(1, 1);
  n.value(0, 0) = spanlat::trace(nodes_[a.id].value);
  return push(std::move(n));
}

Var Tape::spd_inverse(Var m) {
  check_owned(m, "spd_inverse");
  Node n;
  n.op = Op::kSpdInverse;
  n.a = m.id;
  n.value = spanlat::spd_inverse(nodes_[m.id].value);
  return push(std::move(n));
}

Var Tape::hinge(Var a) {
  check_owned(a, "hinge");
  Node n;
  n.op = Op::kHinge;
  n.a = a.id;
  const Matrix& x = nodes_[a.id].value;
  n.value = Matrix(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i)
    n.value.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  check_owned(a, "exp");
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  const Matrix& x = nodes_[a.id].value;
  n.value = Matrix(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) n.value.data()[i] = std::exp(x.data()[i]);
  return push(std::move(n));
}

Var Tape::log(Var a) {
  check_owned(a, "log");
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  const Matrix& x = nodes_[a.id].value;
  n.value = Matrix(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.data()[i] <= 0.0) throw std::domain_error("log: nonpositive input");
    n.value.data()[i] = std::log(x.data()[i]);
  }
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  check_owned(a, "sigmoid");
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id;
  const Matrix& x = nodes_[a.id].value;
  n.value = Matrix(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i)
    n.value.data()[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  return push(std::move(n));
}

Var Tape::div_scalar(Var a, Var b) {
  check_owned(a, "div_scalar");
  check_owned(b, "div_scalar");
  const Matrix& av = nodes_[a.id].value;
  const Matrix& bv = nodes_[b.id].value;
  if (av.size() != 1 || bv.size() != 1) {
    throw std::invalid_argument("div_scalar: operands must be 1x1, got " + av.shape_str() +
                                " / " + bv.shape_str());
  }
  Node n;
  n.op = Op::kDivScalar;
  n.a = a.id;
  n.b = b.id;
  n.value = Matrix(1, 1);
  n.value(0, 0) = av(0, 0) / bv(0, 0);
  return push(std::move(n));
}

GradientMap Tape::backward(Var loss) const {
  check_owned(loss, "backward");
  const Matrix& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw std::invalid_argument("backward: loss must be 1x1 scalar, got " + lv.shape_str());
  }

  std::vector<Matrix> adj(nodes_.size());
  std::vector<char> has(nodes_.size(), 0);
  auto accum = [&](int id, const Matrix& delta) {
    if (!has[id]) {
      adj[id] = delta;
      has[id] = 1;
    } else {
      adj[id] = spanlat::add(adj[id], delta);
    }
  };

  Matrix seed(1, 1);
  seed(0, 0) = 1.0;
  accum(loss.id, seed);

  for (int id = loss.id; id >= 0; --id) {
    if (!has[id]) continue;
    const Node& n = nodes_[id];
    const Matrix& g = adj[id];
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul:
        accum(n.a, spanlat::matmul(g, spanlat::transpose(nodes_[n.b].value)));
        accum(n.b, spanlat::matmul(spanlat::transpose(nodes_[n.a].value), g));
        break;
      case Op::kAdd:
        accum(n.a, g);
        accum(n.b, g);
        break;
      case Op::kSub:
        accum(n.a, g);
        accum(n.b, spanlat::scale(g, -1.0));
        break;
      case Op::kScale:
        accum(n.a, spanlat::scale(g, n.factor));
        break;
      case Op::kTranspose:
        accum(n.a, spanlat::transpose(g));
        break;
      case Op::kTrace:
        accum(n.a, spanlat::scale(Matrix::identity(nodes_[n.a].value.rows()), g(0, 0)));
        break;
      case Op::kSpdInverse: {
        // dM = -W g W with W = M^-1 (cached as this node's value).
        const Matrix& w = n.value;
        accum(n.a, spanlat::scale(spanlat::matmul(spanlat::matmul(w, g), w), -1.0));
        break;
      }
      case Op::kHinge: {
        const Matrix& x = nodes_[n.a].value;
        Matrix d(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i)
          d.data()[i] = x.data()[i] > 0.0 ? g.data()[i] : 0.0;
        accum(n.a, d);
        break;
      }
      case Op::kExp: {
        Matrix d(n.value.rows(), n.value.cols());
        for (std::size_t i = 0; i < d.size(); ++i)
          d.data()[i] = g.data()[i] * n.value.data()[i];
        accum(n.a, d);
        break;
      }
      case Op::kLog: {
        const Matrix& x = nodes_[n.a].value;
        Matrix d(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i) d.data()[i] = g.data()[i] / x.data()[i];
        accum(n.a, d);
        break;
      }
      case Op::kSigmoid: {
        Matrix d(n.value.rows(), n.value.cols());
        for (std::size_t i = 0; i < d.size(); ++i) {
          const double s = n.value.data()[i];
          d.data()[i] = g.data()[i] * s * (1.0 - s);
        }
        accum(n.a, d);
        break;
      }
      case Op::kDivScalar: {
        const double av = nodes_[n.a].value(0, 0);
        const double bv = nodes_[n.b].value(0, 0);
        Matrix da(1, 1), db(1, 1);
        da(0, 0) = g(0, 0) / bv;
        db(0, 0) = -g(0, 0) * av / (bv * bv);
        accum(n.a, da);
        accum(n.b, db);
        break;
      }
    }
  }

  GradientMap grads;
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
    const Node& n = nodes_[id];
    if (n.op == Op::kLeaf && n.requires_grad) {
      grads[id] = has[id] ? std::move(adj[id]) : Matrix(n.value.rows(), n.value.cols());
    }
  }
  return grads;
}

double finite_difference_check(const std::function<double(const Matrix&)>& f,
                               const Matrix& x, const Matrix& analytic_grad,
                               double step) {
  if (!x.same_shape(analytic_grad)) {
    throw std::invalid_argument("finite_difference_check: gradient shape " +
                                analytic_grad.shape_str() + " does not match input " +
                                x.shape_str());
  }
  double max_rel = 0.0;
  Matrix probe = x;
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + step;
      const double up = f(probe);
      probe(i, j) = orig - step;
      const double down = f(probe);
      probe(i, j) = orig;
      const double fd = (up - down) / (2.0 * step);
      const double g = analytic_grad(i, j);
      const double rel = std::fabs(fd - g) / std::max(std::fabs(g), 1e-8);
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace spanlat::ad
