// SPDX-License-Identifier: Apache-2.0
#include "kane/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kane/error.hpp"

namespace kane::ad {

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > 2) throw ShapeError("tensor rank must be 1 or 2");
  for (auto d : dims_) {
    if (d == 0) throw ShapeError("tensor dimensions must be >= 1");
  }
}

std::size_t Shape::size() const {
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::string Shape::str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims_[i]);
  }
  return s + ")";
}

Parameter::Parameter(std::string n, Shape s)
    : name(std::move(n)), shape(std::move(s)), value(shape.size(), 0.0), grad(shape.size(), 0.0) {}

Parameter::Parameter(std::string n, Shape s, std::vector<double> v)
    : name(std::move(n)), shape(std::move(s)), value(std::move(v)), grad(shape.size(), 0.0) {
  if (value.size() != shape.size()) {
    throw ShapeError("parameter " + name + ": value length does not match shape " + shape.str());
  }
}

const Shape& Var::shape() const { return tape_->shape(id_); }
std::span<const double> Var::value() const { return tape_->value(id_); }

double Var::item() const {
  auto v = value();
  if (v.size() != 1) throw ContractError("item() on tensor of shape " + shape().str());
  return v[0];
}

Var Tape::constant(Shape shape, std::vector<double> value) {
  if (value.size() != shape.size()) {
    throw ShapeError("constant: " + std::to_string(value.size()) + " values for shape " +
                     shape.str());
  }
  return push(std::move(shape), std::move(value), {}, nullptr);
}

Var Tape::constant(std::vector<double> value) {
  if (value.empty()) throw ShapeError("constant: empty value");
  Shape shape{value.size()};
  return constant(std::move(shape), std::move(value));
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.shape, p.value, {}, {}, nullptr, &p, -1, true});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::row(Parameter& p, std::size_t i) {
  if (p.shape.rank() != 2) throw ShapeError("row: parameter " + p.name + " is not a matrix");
  if (i >= p.rows()) {
    throw LookupError("row " + std::to_string(i) + " out of range for " + p.name + " " +
                      p.shape.str());
  }
  auto r = p.row(i);
  nodes_.push_back(Node{Shape{p.cols()}, std::vector<double>(r.begin(), r.end()), {}, {},
                        nullptr, &p, static_cast<std::ptrdiff_t>(i), true});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::push(Shape shape, std::vector<double> value, std::vector<int> parents, BackwardFn fn) {
  bool tracked = false;
  for (int p : parents) tracked = tracked || nodes_[p].requires_grad;
  nodes_.push_back(Node{std::move(shape), std::move(value), {}, std::move(parents),
                        tracked ? std::move(fn) : nullptr, nullptr, -1, tracked});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw ContractError("backward: root belongs to another tape");
  if (!nodes_[root.id()].shape.is_scalar()) {
    throw ContractError("backward: root must be scalar, got shape " +
                        nodes_[root.id()].shape.str());
  }
  for (auto& n : nodes_) {
    if (n.requires_grad) {
      n.grad.assign(n.value.size(), 0.0);
    } else {
      n.grad.clear();
    }
  }
  if (!nodes_[root.id()].requires_grad) return;
  nodes_[root.id()].grad[0] = 1.0;
  for (int i = root.id(); i >= 0; --i) {
    auto& n = nodes_[i];
    if (!n.requires_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) {
      auto& p = *n.param;
      if (p.grad.size() != p.value.size()) p.grad.assign(p.value.size(), 0.0);
      const std::size_t offset = n.param_row < 0 ? 0 : static_cast<std::size_t>(n.param_row) * p.cols();
      for (std::size_t k = 0; k < n.grad.size(); ++k) p.grad[offset + k] += n.grad[k];
    }
  }
}

std::span<const double> Tape::grad(Var v) const {
  if (v.tape() != this) throw ContractError("grad: variable belongs to another tape");
  return nodes_[v.id()].grad;
}

void Tape::clear() { nodes_.clear(); }

namespace {

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const auto& v : vars) {
    if (!v.valid()) throw ContractError("operation on an unset variable");
    if (t && v.tape() != t) throw ContractError("operands live on different tapes");
    t = v.tape();
  }
  return *t;
}

Tape& tape_of(std::span<const Var> vars) {
  if (vars.empty()) throw ShapeError("operation needs at least one operand");
  Tape* t = vars[0].tape();
  for (const auto& v : vars) {
    if (!v.valid()) throw ContractError("operation on an unset variable");
    if (v.tape() != t) throw ContractError("operands live on different tapes");
  }
  return *t;
}

void require_same(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + a.shape().str() + " does not match " +
                     b.shape().str());
  }
}

void require_vector(const char* op, Var v) {
  if (v.shape().rank() != 1) {
    throw ShapeError(std::string(op) + ": expected a vector, got " + v.shape().str());
  }
}

template <typename F>
Var unary(Var a, F&& forward, std::function<double(double x, double y)> derivative) {
  auto& t = tape_of({a});
  auto in = a.value();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  const int ia = a.id();
  return t.push(a.shape(), std::move(out), {ia},
                [ia, derivative = std::move(derivative)](Tape& tp, int self) {
                  auto ga = tp.grad_buffer(ia);
                  if (ga.empty()) return;
                  auto x = tp.value(ia);
                  auto y = tp.value(self);
                  auto g = tp.grad_buffer(self);
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * derivative(x[i], y[i]);
                });
}

}  // namespace

Var add(Var a, Var b) {
  auto& t = tape_of({a, b});
  require_same("add", a, b);
  auto x = a.value(), y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  const int ia = a.id(), ib = b.id();
  return t.push(a.shape(), std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    auto g = tp.grad_buffer(self);
    for (int p : {ia, ib}) {
      auto gp = tp.grad_buffer(p);
      if (gp.empty()) continue;
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  auto& t = tape_of({a, b});
  require_same("sub", a, b);
  auto x = a.value(), y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  const int ia = a.id(), ib = b.id();
  return t.push(a.shape(), std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    auto g = tp.grad_buffer(self);
    auto ga = tp.grad_buffer(ia);
    auto gb = tp.grad_buffer(ib);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
  });
}

Var scale(Var a, double c) {
  return unary(
      a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var mul(Var a, Var b) {
  auto& t = tape_of({a, b});
  require_same("mul", a, b);
  auto x = a.value(), y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  const int ia = a.id(), ib = b.id();
  return t.push(a.shape(), std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    auto g = tp.grad_buffer(self);
    auto x = tp.value(ia), y = tp.value(ib);
    auto ga = tp.grad_buffer(ia);
    auto gb = tp.grad_buffer(ib);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * x[i];
  });
}

Var dot(Var a, Var b) {
  auto& t = tape_of({a, b});
  require_vector("dot", a);
  require_same("dot", a, b);
  auto x = a.value(), y = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  const int ia = a.id(), ib = b.id();
  return t.push(Shape{1}, {s}, {ia, ib}, [ia, ib](Tape& tp, int self) {
    const double g = tp.grad_buffer(self)[0];
    auto x = tp.value(ia), y = tp.value(ib);
    auto ga = tp.grad_buffer(ia);
    auto gb = tp.grad_buffer(ib);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * y[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * x[i];
  });
}

Var matvec(Var m, Var v) {
  auto& t = tape_of({m, v});
  require_vector("matvec", v);
  if (m.shape().rank() != 2 || m.shape()[1] != v.shape()[0]) {
    throw ShapeError("matvec: shape " + m.shape().str() + " incompatible with " + v.shape().str());
  }
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  auto a = m.value(), x = v.value();
  std::vector<double> out(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a.data() + i * cols;
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += row[j] * x[j];
    out[i] = s;
  }
  const int im = m.id(), iv = v.id();
  return t.push(Shape{rows}, std::move(out), {im, iv}, [im, iv, rows, cols](Tape& tp, int self) {
    auto g = tp.grad_buffer(self);
    auto gm = tp.grad_buffer(im);
    auto gv = tp.grad_buffer(iv);
    auto a = tp.value(im), x = tp.value(iv);
    if (!gm.empty()) {
      for (std::size_t i = 0; i < rows; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        double* grow = gm.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) grow[j] += gi * x[j];
      }
    }
    if (!gv.empty()) {
      for (std::size_t i = 0; i < rows; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        const double* row = a.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) gv[j] += gi * row[j];
      }
    }
  });
}

Var matmul(Var a, Var b) {
  auto& t = tape_of({a, b});
  if (a.shape().rank() != 2 || b.shape().rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: shape " + a.shape().str() + " incompatible with " + b.shape().str());
  }
  const std::size_t n = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
  auto x = a.value(), y = b.value();
  std::vector<double> out(n * p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double xil = x[i * k + l];
      for (std::size_t j = 0; j < p; ++j) out[i * p + j] += xil * y[l * p + j];
    }
  }
  const int ia = a.id(), ib = b.id();
  return t.push(Shape{n, p}, std::move(out), {ia, ib}, [ia, ib, n, k, p](Tape& tp, int self) {
    auto g = tp.grad_buffer(self);
    auto x = tp.value(ia), y = tp.value(ib);
    auto ga = tp.grad_buffer(ia);
    auto gb = tp.grad_buffer(ib);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < k; ++l) {
        double acc = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          const double gij = g[i * p + j];
          acc += gij * y[l * p + j];
          if (!gb.empty()) gb[l * p + j] += x[i * k + l] * gij;
        }
        if (!ga.empty()) ga[i * k + l] += acc;
      }
    }
  });
}

Var concat(std::span<const Var> parts) {
  auto& t = tape_of(parts);
  std::vector<double> out;
  std::vector<int> ids;
  for (const auto& v : parts) {
    require_vector("concat", v);
    auto x = v.value();
    out.insert(out.end(), x.begin(), x.end());
    ids.push_back(v.id());
  }
  const std::size_t n = out.size();
  auto parents = ids;
  return t.push(Shape{n}, std::move(out), std::move(parents), [ids](Tape& tp, int self) {
    auto g = tp.grad_buffer(self);
    std::size_t offset = 0;
    for (int p : ids) {
      const auto len = tp.value(p).size();
      auto gp = tp.grad_buffer(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
      offset += len;
    }
  });
}

Var sum_rows(Var m) {
  auto& t = tape_of({m});
  if (m.shape().rank() != 2) throw ShapeError("sum_rows: expected a matrix, got " + m.shape().str());
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  auto a = m.value();
  std::vector<double> out(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[j] += a[i * cols + j];
  }
  const int im = m.id();
  return t.push(Shape{cols}, std::move(out), {im}, [im, rows, cols](Tape& tp, int self) {
    auto g = tp.grad_buffer(self);
    auto gm = tp.grad_buffer(im);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) gm[i * cols + j] += g[j];
    }
  });
}

Var sum(std::span<const Var> parts) {
  auto& t = tape_of(parts);
  std::vector<double> out(parts[0].value().size(), 0.0);
  std::vector<int> ids;
  for (const auto& v : parts) {
    require_same("sum", parts[0], v);
    auto x = v.value();
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += x[i];
    ids.push_back(v.id());
  }
  auto parents = ids;
  return t.push(parts[0].shape(), std::move(out), std::move(parents), [ids](Tape& tp, int self) {
    auto g = tp.grad_buffer(self);
    for (int p : ids) {
      auto gp = tp.grad_buffer(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[i];
    }
  });
}

Var l1_norm(Var v) {
  auto& t = tape_of({v});
  require_vector("l1_norm", v);
  auto x = v.value();
  double s = 0.0;
  for (double xi : x) s += std::abs(xi);
  const int iv = v.id();
  return t.push(Shape{1}, {s}, {iv}, [iv](Tape& tp, int self) {
    const double g = tp.grad_buffer(self)[0];
    auto x = tp.value(iv);
    auto gv = tp.grad_buffer(iv);
    // Subgradient 0 at the kink.
    for (std::size_t i = 0; i < gv.size(); ++i) {
      gv[i] += g * (x[i] > 0 ? 1.0 : (x[i] < 0 ? -1.0 : 0.0));
    }
  });
}

Var l2_norm(Var v) {
  auto& t = tape_of({v});
  require_vector("l2_norm", v);
  auto x = v.value();
  double s = 0.0;
  for (double xi : x) s += xi * xi;
  const double n = std::sqrt(s);
  const int iv = v.id();
  return t.push(Shape{1}, {n}, {iv}, [iv](Tape& tp, int self) {
    const double norm = tp.value(self)[0];
    if (norm == 0.0) return;
    const double g = tp.grad_buffer(self)[0] / norm;
    auto x = tp.value(iv);
    auto gv = tp.grad_buffer(iv);
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g * x[i];
  });
}

Var leaky_relu(Var v, double slope) {
  return unary(
      v, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var sigmoid(Var v) {
  return unary(
      v,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var v) {
  return unary(
      v, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var log(Var v) {
  for (double x : v.value()) {
    if (!(x > 0)) throw DomainError("log of non-positive value " + std::to_string(x));
  }
  return unary(
      v, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var log_sigmoid(Var v) {
  return unary(
      v,
      [](double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); },
      [](double x, double) {
        // d/dx log sigmoid(x) = 1 - sigmoid(x) = sigmoid(-x)
        if (x >= 0) {
          const double e = std::exp(-x);
          return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(x));
      });
}

Var softmax(Var logits) {
  auto& t = tape_of({logits});
  require_vector("softmax", logits);
  auto x = logits.value();
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    z += out[i];
  }
  for (auto& o : out) o /= z;
  const int il = logits.id();
  return t.push(logits.shape(), std::move(out), {il}, [il](Tape& tp, int self) {
    auto g = tp.grad_buffer(self);
    auto y = tp.value(self);
    auto gl = tp.grad_buffer(il);
    double inner = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) inner += g[i] * y[i];
    for (std::size_t i = 0; i < y.size(); ++i) gl[i] += y[i] * (g[i] - inner);
  });
}

Var weighted_sum(Var weights, std::span<const Var> vectors) {
  auto& t = tape_of(vectors);
  tape_of({weights, vectors[0]});
  require_vector("weighted_sum", weights);
  if (weights.shape()[0] != vectors.size()) {
    throw ShapeError("weighted_sum: " + weights.shape().str() + " weights for " +
                     std::to_string(vectors.size()) + " vectors");
  }
  auto w = weights.value();
  std::vector<double> out(vectors[0].value().size(), 0.0);
  std::vector<int> ids{weights.id()};
  for (std::size_t n = 0; n < vectors.size(); ++n) {
    require_vector("weighted_sum", vectors[n]);
    require_same("weighted_sum", vectors[0], vectors[n]);
    auto x = vectors[n].value();
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += w[n] * x[i];
    ids.push_back(vectors[n].id());
  }
  auto parents = ids;
  return t.push(vectors[0].shape(), std::move(out), std::move(parents), [ids](Tape& tp, int self) {
    auto g = tp.grad_buffer(self);
    auto w = tp.value(ids[0]);
    auto gw = tp.grad_buffer(ids[0]);
    for (std::size_t n = 1; n < ids.size(); ++n) {
      auto x = tp.value(ids[n]);
      auto gx = tp.grad_buffer(ids[n]);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        acc += g[i] * x[i];
        if (!gx.empty()) gx[i] += w[n - 1] * g[i];
      }
      if (!gw.empty()) gw[n - 1] += acc;
    }
  });
}

}  // namespace kane::ad
