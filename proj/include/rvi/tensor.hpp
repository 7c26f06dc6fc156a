#pragma once

// Dense tensors with a reverse-mode tape.
//
// A Tensor is an immutable row-major array of doubles. Tensors created by a
// Tape (variables) or computed from tape tensors while the tape is recording
// carry a node id; everything else is a detached constant. Backward rules are
// themselves written with the differentiable ops below, so a gradient taken
// with create_graph=true can be differentiated again (Hessian-vector products).

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rvi/errors.hpp"

namespace rvi {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

class Tensor {
 public:
  /// Scalar zero constant.
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_->size(); }
  std::span<const double> values() const noexcept { return {data_->data(), data_->size()}; }
  std::vector<double> to_vector() const { return *data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  /// Value of a one-element tensor.
  double item() const;

  bool on_tape() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  int node() const noexcept { return node_; }
  /// Same values, no tape membership.
  Tensor detach() const;

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

enum class OpKind : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  div,
  neg,
  matmul,
  transpose,
  sum,
  sum_to,
  broadcast_to,
  sum_last,
  expand_last,
  exp,
  log,
  pow,
  tanh,
  relu,
  sigmoid,
  softplus,
  slice,
  pad,
  reshape,
};

const char* op_name(OpKind op);

/// Extra per-op data: exponent for pow, offsets for slice/pad, target shape.
struct OpAttr {
  double scalar = 0.0;
  std::size_t offset = 0;
  std::size_t length = 0;
  Shape shape;
};

/// Single-owner record of primitive operations in topological order.
/// Not thread-safe; use one tape per worker.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a differentiable leaf.
  Tensor variable(const Tensor& value);
  Tensor variable(Shape shape, std::vector<double> values);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return recording_; }
  OpKind op(int node) const { return nodes_.at(static_cast<std::size_t>(node)).op; }

  /// Reverse-mode gradient of a one-element output. Tensors in `wrt` that the
  /// output does not depend on (or that are constants) receive zeros. With
  /// create_graph the returned gradients are themselves tape tensors.
  std::vector<Tensor> gradient(const Tensor& output, std::span<const Tensor> wrt,
                               bool create_graph = false);

  /// Recomputes every node from the recorded leaf values.
  std::vector<std::vector<double>> replay() const;

  /// Internal: records an op whose output values were already computed.
  Tensor record(OpKind op, const Tensor& a, const Tensor* b, const OpAttr& attr, Shape shape,
                std::vector<double> values);

 private:
  struct Node {
    OpKind op = OpKind::leaf;
    Tensor a;
    Tensor b;
    bool binary = false;
    OpAttr attr;
    Tensor out;
  };

  void backprop(const Node& node, const Tensor& grad, std::vector<Tensor>& adjoint,
                std::vector<bool>& has_adjoint) const;

  std::vector<Node> nodes_;
  bool recording_ = true;
};

/// Differentiates <grad(output), v> a second time. No Hessian is formed.
std::vector<Tensor> hessian_vector_product(const Tensor& output, std::span<const Tensor> params,
                                           std::span<const Tensor> v);

// Elementwise binary ops broadcast a smaller operand whose shape (after
// dropping leading 1s) is a suffix of the larger operand's shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Sum of all elements, shape {}.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
/// Sums tile-broadcast copies back down to `shape`.
Tensor sum_to(const Tensor& a, const Shape& shape);
Tensor broadcast_to(const Tensor& a, const Shape& shape);
/// Reduces the trailing axis: [.., k] -> [..].
Tensor sum_last(const Tensor& a);
Tensor expand_last(const Tensor& a, std::size_t k);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor pow(const Tensor& a, double exponent);
Tensor square(const Tensor& a);
Tensor tanh(const Tensor& a);
/// max(x, 0); derivative at 0 is taken as 0.
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// log(1 + e^x), evaluated without overflow.
Tensor softplus(const Tensor& a);
Tensor log_sigmoid(const Tensor& a);

/// Flat view [offset, offset+length) of any tensor, shape {length}.
Tensor slice(const Tensor& a, std::size_t offset, std::size_t length);
/// Embeds a flat tensor into zeros of length `total` at `offset`.
Tensor pad(const Tensor& a, std::size_t offset, std::size_t total);
Tensor reshape(const Tensor& a, Shape shape);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator+(const Tensor& a, double b);
Tensor operator+(double a, const Tensor& b);
Tensor operator-(const Tensor& a, double b);
Tensor operator-(double a, const Tensor& b);
Tensor operator*(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(const Tensor& a, double b);
Tensor operator/(double a, const Tensor& b);

}  // namespace rvi
