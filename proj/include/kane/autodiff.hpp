// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over dense row-major float64 tensors of rank 1
// or 2. Every op records a node on the tape its inputs live on; `backward`
// walks the tape in reverse and accumulates gradients into the Parameter
// objects that were read through `Tape::parameter` or `Tape::row`.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace kane::ad {

class Shape {
 public:
  Shape() : dims_{1} {}
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  static Shape vector(std::size_t n) { return Shape{n}; }
  static Shape matrix(std::size_t rows, std::size_t cols) { return Shape{rows, cols}; }

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  std::size_t size() const;
  bool is_scalar() const { return size() == 1; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::string str() const;

  bool operator==(const Shape&) const = default;

 private:
  std::vector<std::size_t> dims_;
};

/// Trainable tensor with a gradient accumulator of the same shape.
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Shape s);
  Parameter(std::string n, Shape s, std::vector<double> v);

  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t rows() const { return shape[0]; }
  std::size_t cols() const { return shape.rank() == 2 ? shape[1] : 1; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(value).subspan(i * cols(), cols());
  }
  std::span<double> row(std::size_t i) { return std::span<double>(value).subspan(i * cols(), cols()); }
  void zero_grad() { grad.assign(value.size(), 0.0); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;

  const Shape& shape() const;
  std::span<const double> value() const;
  /// Value of a single-element tensor.
  double item() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Shape shape, std::vector<double> value);
  Var constant(std::vector<double> value);
  Var scalar(double v) { return constant(Shape{1}, {v}); }
  /// Whole-parameter leaf.
  Var parameter(Parameter& p);
  /// Row `i` of a rank-2 parameter as a vector leaf; gradients land in that row only.
  Var row(Parameter& p, std::size_t i);

  /// Propagates d(root)/d(node) through the tape and adds parameter
  /// gradients into each Parameter::grad. Root must be a single element.
  void backward(Var root);

  /// Gradient held by a node after `backward`; empty for nodes that do not
  /// depend on any parameter.
  std::span<const double> grad(Var v) const;

  void clear();
  std::size_t size() const { return nodes_.size(); }

  // Op-construction interface.
  Var push(Shape shape, std::vector<double> value, std::vector<int> parents, BackwardFn fn);
  const Shape& shape(int id) const { return nodes_[id].shape; }
  std::span<const double> value(int id) const { return nodes_[id].value; }
  /// Gradient buffer of node `id`, empty when the node needs none.
  std::span<double> grad_buffer(int id) { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].requires_grad; }
  const std::vector<int>& parents(int id) const { return nodes_[id].parents; }
  Var handle(int id) { return Var(this, id); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<int> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    std::ptrdiff_t param_row = -1;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Shape-checked ops. Scalars are rank-1 tensors of size 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
Var mul(Var a, Var b);  // elementwise
Var dot(Var a, Var b);
Var matvec(Var m, Var v);
Var matmul(Var a, Var b);
Var concat(std::span<const Var> parts);
Var sum_rows(Var m);
/// Elementwise sum of same-shaped tensors.
Var sum(std::span<const Var> parts);
Var l1_norm(Var v);
Var l2_norm(Var v);
Var leaky_relu(Var v, double slope);
Var sigmoid(Var v);
Var tanh(Var v);
/// Throws DomainError on any non-positive input.
Var log(Var v);
/// log(sigmoid(x)) evaluated without overflow.
Var log_sigmoid(Var v);
/// Softmax over all elements of a rank-1 tensor, max-subtracted.
Var softmax(Var logits);
/// sum_i weights[i] * vectors[i].
Var weighted_sum(Var weights, std::span<const Var> vectors);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

}  // namespace kane::ad
