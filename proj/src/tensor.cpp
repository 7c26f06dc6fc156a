#include "rvi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace rvi {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::neg: return "neg";
    case OpKind::matmul: return "matmul";
    case OpKind::transpose: return "transpose";
    case OpKind::sum: return "sum";
    case OpKind::sum_to: return "sum_to";
    case OpKind::broadcast_to: return "broadcast_to";
    case OpKind::sum_last: return "sum_last";
    case OpKind::expand_last: return "expand_last";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::pow: return "pow";
    case OpKind::tanh: return "tanh";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::softplus: return "softplus";
    case OpKind::slice: return "slice";
    case OpKind::pad: return "pad";
    case OpKind::reshape: return "reshape";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (shape_size(shape_) != values.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("tensor constructed with a non-finite value");
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }
Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return (*data_)[0];
}

Tensor Tensor::detach() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = data_;
  return t;
}

// ---------------------------------------------------------------------------
// Forward kernels

namespace {

struct Result {
  Shape shape;
  std::vector<double> values;
};

Shape strip_leading_ones(const Shape& s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 1) ++i;
  return Shape(s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// `small` may be tiled into `big` when its non-trivial trailing dims match.
bool tiles_into(const Shape& small, const Shape& big) {
  return is_suffix(strip_leading_ones(small), big);
}

Shape broadcast_shape(const Shape& a, const Shape& b, OpKind op) {
  if (a == b) return a;
  const auto na = shape_size(a);
  const auto nb = shape_size(b);
  if (na <= nb && tiles_into(a, b)) return (na == nb && a.size() > b.size()) ? a : b;
  if (nb <= na && tiles_into(b, a)) return a;
  throw ShapeError(std::string(op_name(op)) + ": cannot broadcast " + shape_string(a) + " with " +
                   shape_string(b));
}

template <class F>
std::vector<double> binary_kernel(std::span<const double> a, std::span<const double> b,
                                  std::size_t n, F f) {
  std::vector<double> out(n);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  if (na == n && nb == n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
  } else if (na == n) {
    for (std::size_t blk = 0; blk < n; blk += nb)
      for (std::size_t j = 0; j < nb; ++j) out[blk + j] = f(a[blk + j], b[j]);
  } else {
    for (std::size_t blk = 0; blk < n; blk += na)
      for (std::size_t j = 0; j < na; ++j) out[blk + j] = f(a[j], b[blk + j]);
  }
  return out;
}

template <class F>
std::vector<double> unary_kernel(std::span<const double> a, F f) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

bool is_integer(double x) { return std::floor(x) == x; }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Result evaluate(OpKind op, const Tensor& a, const Tensor* b, const OpAttr& attr) {
  const auto av = a.values();
  switch (op) {
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul:
    case OpKind::div: {
      Shape shape = broadcast_shape(a.shape(), b->shape(), op);
      const auto n = shape_size(shape);
      const auto bv = b->values();
      std::vector<double> out;
      if (op == OpKind::add) out = binary_kernel(av, bv, n, [](double x, double y) { return x + y; });
      if (op == OpKind::sub) out = binary_kernel(av, bv, n, [](double x, double y) { return x - y; });
      if (op == OpKind::mul) out = binary_kernel(av, bv, n, [](double x, double y) { return x * y; });
      if (op == OpKind::div) {
        for (double y : bv)
          if (y == 0.0) throw NumericError("div: division by zero");
        out = binary_kernel(av, bv, n, [](double x, double y) { return x / y; });
      }
      return {std::move(shape), std::move(out)};
    }
    case OpKind::neg:
      return {a.shape(), unary_kernel(av, [](double x) { return -x; })};
    case OpKind::matmul: {
      if (a.rank() != 2 || b->rank() != 2 || a.shape()[1] != b->shape()[0]) {
        throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b->shape()));
      }
      const std::size_t m = a.shape()[0], k = a.shape()[1], n = b->shape()[1];
      const auto bv = b->values();
      std::vector<double> out(m * n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          const double* brow = bv.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
        }
      }
      return {{m, n}, std::move(out)};
    }
    case OpKind::transpose: {
      if (a.rank() != 2) throw ShapeError("transpose: rank-2 tensor required");
      const std::size_t m = a.shape()[0], n = a.shape()[1];
      std::vector<double> out(m * n);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
      return {{n, m}, std::move(out)};
    }
    case OpKind::sum: {
      double s = 0.0;
      for (double x : av) s += x;
      return {{}, {s}};
    }
    case OpKind::sum_to: {
      if (!tiles_into(attr.shape, a.shape())) {
        throw ShapeError("sum_to: cannot reduce " + shape_string(a.shape()) + " to " +
                         shape_string(attr.shape));
      }
      const auto m = shape_size(attr.shape);
      std::vector<double> out(m, 0.0);
      for (std::size_t blk = 0; blk < av.size(); blk += m)
        for (std::size_t j = 0; j < m; ++j) out[j] += av[blk + j];
      return {attr.shape, std::move(out)};
    }
    case OpKind::broadcast_to: {
      if (!tiles_into(a.shape(), attr.shape)) {
        throw ShapeError("broadcast_to: cannot tile " + shape_string(a.shape()) + " into " +
                         shape_string(attr.shape));
      }
      const auto n = shape_size(attr.shape);
      const auto m = av.size();
      std::vector<double> out(n);
      for (std::size_t blk = 0; blk < n; blk += m) std::copy(av.begin(), av.end(), out.begin() + static_cast<std::ptrdiff_t>(blk));
      return {attr.shape, std::move(out)};
    }
    case OpKind::sum_last: {
      if (a.rank() == 0) throw ShapeError("sum_last: scalar input");
      const std::size_t k = a.shape().back();
      Shape shape(a.shape().begin(), a.shape().end() - 1);
      const auto rows = shape_size(shape);
      std::vector<double> out(rows, 0.0);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < k; ++j) out[i] += av[i * k + j];
      return {std::move(shape), std::move(out)};
    }
    case OpKind::expand_last: {
      const std::size_t k = attr.length;
      Shape shape = a.shape();
      shape.push_back(k);
      std::vector<double> out(av.size() * k);
      for (std::size_t i = 0; i < av.size(); ++i)
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] = av[i];
      return {std::move(shape), std::move(out)};
    }
    case OpKind::exp:
      return {a.shape(), unary_kernel(av, [](double x) { return std::exp(x); })};
    case OpKind::log:
      for (double x : av)
        if (!(x > 0.0)) throw NumericError("log: non-positive argument");
      return {a.shape(), unary_kernel(av, [](double x) { return std::log(x); })};
    case OpKind::pow: {
      const double p = attr.scalar;
      if (!is_integer(p)) {
        for (double x : av) {
          if (x < 0.0 || (x == 0.0 && p < 0.0)) {
            throw NumericError("pow: non-positive base with exponent " + std::to_string(p));
          }
        }
      } else if (p < 0.0) {
        for (double x : av)
          if (x == 0.0) throw NumericError("pow: zero base with negative exponent");
      }
      return {a.shape(), unary_kernel(av, [p](double x) { return std::pow(x, p); })};
    }
    case OpKind::tanh:
      return {a.shape(), unary_kernel(av, [](double x) { return std::tanh(x); })};
    case OpKind::relu:
      return {a.shape(), unary_kernel(av, [](double x) { return x > 0.0 ? x : 0.0; })};
    case OpKind::sigmoid:
      return {a.shape(), unary_kernel(av, stable_sigmoid)};
    case OpKind::softplus:
      return {a.shape(), unary_kernel(av, stable_softplus)};
    case OpKind::slice: {
      if (attr.offset + attr.length > av.size()) {
        throw ShapeError("slice: range [" + std::to_string(attr.offset) + ", " +
                         std::to_string(attr.offset + attr.length) + ") exceeds " +
                         std::to_string(av.size()));
      }
      const auto first = av.begin() + static_cast<std::ptrdiff_t>(attr.offset);
      return {{attr.length}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(attr.length))};
    }
    case OpKind::pad: {
      if (attr.offset + av.size() > attr.length) throw ShapeError("pad: input does not fit");
      std::vector<double> out(attr.length, 0.0);
      std::copy(av.begin(), av.end(), out.begin() + static_cast<std::ptrdiff_t>(attr.offset));
      return {{attr.length}, std::move(out)};
    }
    case OpKind::reshape:
      if (shape_size(attr.shape) != av.size()) {
        throw ShapeError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(attr.shape));
      }
      return {attr.shape, std::vector<double>(av.begin(), av.end())};
    case OpKind::leaf:
      break;
  }
  throw std::logic_error("evaluate: unexpected op");
}

void check_finite(const std::vector<double>& values, OpKind op) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op_name(op));
  }
}

Tensor apply(OpKind op, const Tensor& a, const Tensor* b, OpAttr attr = {}) {
  Result r = evaluate(op, a, b, attr);
  check_finite(r.values, op);
  Tape* tape = a.tape();
  if (b != nullptr && b->tape() != nullptr) {
    if (tape != nullptr && tape != b->tape()) throw std::logic_error("operands live on different tapes");
    tape = b->tape();
  }
  if (tape != nullptr && tape->recording()) {
    return tape->record(op, a, b, attr, std::move(r.shape), std::move(r.values));
  }
  return Tensor(std::move(r.shape), std::move(r.values));
}

Tensor unary(OpKind op, const Tensor& a, OpAttr attr = {}) { return apply(op, a, nullptr, std::move(attr)); }
Tensor binary(OpKind op, const Tensor& a, const Tensor& b) { return apply(op, a, &b); }

// Reduces a broadcast gradient back to the operand's shape.
Tensor reduce_like(const Tensor& grad, const Shape& shape) {
  if (grad.shape() == shape) return grad;
  if (shape_size(grad.shape()) == shape_size(shape)) return reshape(grad, shape);
  return sum_to(grad, shape);
}

struct RecordingGuard {
  RecordingGuard(bool& flag, bool value) : flag_(flag), saved_(flag) { flag_ = value; }
  ~RecordingGuard() { flag_ = saved_; }
  RecordingGuard(const RecordingGuard&) = delete;
  RecordingGuard& operator=(const RecordingGuard&) = delete;
  bool& flag_;
  bool saved_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::variable(const Tensor& value) {
  Node node;
  node.op = OpKind::leaf;
  node.out = value.detach();
  node.out.tape_ = this;
  node.out.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  return node.out;
}

Tensor Tape::variable(Shape shape, std::vector<double> values) {
  return variable(Tensor(std::move(shape), std::move(values)));
}

Tensor Tape::record(OpKind op, const Tensor& a, const Tensor* b, const OpAttr& attr, Shape shape,
                    std::vector<double> values) {
  Node node;
  node.op = op;
  node.a = a;
  node.binary = b != nullptr;
  if (b != nullptr) node.b = *b;
  node.attr = attr;
  node.out.shape_ = std::move(shape);
  node.out.data_ = std::make_shared<const std::vector<double>>(std::move(values));
  node.out.tape_ = this;
  node.out.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  return node.out;
}

void Tape::backprop(const Node& n, const Tensor& g, std::vector<Tensor>& adjoint,
                    std::vector<bool>& has_adjoint) const {
  auto accumulate = [&](const Tensor& input, const Tensor& contribution) {
    if (input.tape() != this) return;
    const auto idx = static_cast<std::size_t>(input.node());
    if (has_adjoint[idx]) {
      adjoint[idx] = adjoint[idx] + contribution;
    } else {
      adjoint[idx] = contribution;
      has_adjoint[idx] = true;
    }
  };
  const Tensor& a = n.a;
  const Tensor& b = n.b;
  const bool need_a = a.tape() == this;
  const bool need_b = n.binary && b.tape() == this;

  switch (n.op) {
    case OpKind::leaf:
      return;
    case OpKind::add:
      if (need_a) accumulate(a, reduce_like(g, a.shape()));
      if (need_b) accumulate(b, reduce_like(g, b.shape()));
      return;
    case OpKind::sub:
      if (need_a) accumulate(a, reduce_like(g, a.shape()));
      if (need_b) accumulate(b, reduce_like(-g, b.shape()));
      return;
    case OpKind::mul:
      if (need_a) accumulate(a, reduce_like(g * b, a.shape()));
      if (need_b) accumulate(b, reduce_like(g * a, b.shape()));
      return;
    case OpKind::div:
      if (need_a) accumulate(a, reduce_like(g / b, a.shape()));
      if (need_b) accumulate(b, reduce_like(-(g * n.out) / b, b.shape()));
      return;
    case OpKind::neg:
      accumulate(a, -g);
      return;
    case OpKind::matmul:
      if (need_a) accumulate(a, matmul(g, transpose(b)));
      if (need_b) accumulate(b, matmul(transpose(a), g));
      return;
    case OpKind::transpose:
      accumulate(a, transpose(g));
      return;
    case OpKind::sum:
      accumulate(a, broadcast_to(reshape(g, {}), a.shape()));
      return;
    case OpKind::sum_to:
      accumulate(a, broadcast_to(g, a.shape()));
      return;
    case OpKind::broadcast_to:
      accumulate(a, sum_to(g, a.shape()));
      return;
    case OpKind::sum_last:
      accumulate(a, expand_last(g, a.shape().back()));
      return;
    case OpKind::expand_last:
      accumulate(a, sum_last(g));
      return;
    case OpKind::exp:
      accumulate(a, g * n.out);
      return;
    case OpKind::log:
      accumulate(a, g / a);
      return;
    case OpKind::pow: {
      const double p = n.attr.scalar;
      if (p == 1.0) {
        accumulate(a, g);
      } else if (p == 2.0) {
        accumulate(a, g * (2.0 * a));
      } else {
        accumulate(a, g * (p * pow(a, p - 1.0)));
      }
      return;
    }
    case OpKind::tanh:
      accumulate(a, g * (1.0 - square(n.out)));
      return;
    case OpKind::relu: {
      std::vector<double> mask(a.size());
      const auto av = a.values();
      for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = av[i] > 0.0 ? 1.0 : 0.0;
      accumulate(a, g * Tensor(a.shape(), std::move(mask)));
      return;
    }
    case OpKind::sigmoid:
      accumulate(a, g * (n.out * (1.0 - n.out)));
      return;
    case OpKind::softplus:
      accumulate(a, g * sigmoid(a));
      return;
    case OpKind::slice:
      accumulate(a, reshape(pad(g, n.attr.offset, a.size()), a.shape()));
      return;
    case OpKind::pad:
      accumulate(a, reshape(slice(g, n.attr.offset, a.size()), a.shape()));
      return;
    case OpKind::reshape:
      accumulate(a, reshape(g, a.shape()));
      return;
  }
}

std::vector<Tensor> Tape::gradient(const Tensor& output, std::span<const Tensor> wrt, bool create_graph) {
  if (output.tape() != this) throw std::invalid_argument("gradient: output is not on this tape");
  if (output.size() != 1) {
    throw ShapeError("gradient: output must have one element, got " + shape_string(output.shape()));
  }
  RecordingGuard guard(recording_, create_graph);

  const auto top = static_cast<std::size_t>(output.node());
  std::vector<Tensor> adjoint(top + 1);
  std::vector<bool> has_adjoint(top + 1, false);
  adjoint[top] = Tensor::full(output.shape(), 1.0);
  has_adjoint[top] = true;

  for (std::size_t i = top + 1; i-- > 0;) {
    if (!has_adjoint[i] || nodes_[i].op == OpKind::leaf) continue;
    const Node node = nodes_[i];  // recording may reallocate nodes_
    backprop(node, adjoint[i], adjoint, has_adjoint);
  }

  std::vector<Tensor> grads;
  grads.reserve(wrt.size());
  for (const Tensor& w : wrt) {
    const bool reached = w.tape() == this && static_cast<std::size_t>(w.node()) <= top &&
                         has_adjoint[static_cast<std::size_t>(w.node())];
    grads.push_back(reached ? adjoint[static_cast<std::size_t>(w.node())] : Tensor::zeros(w.shape()));
  }
  return grads;
}

std::vector<std::vector<double>> Tape::replay() const {
  std::vector<std::vector<double>> values(nodes_.size());
  auto input = [&](const Tensor& t) {
    if (t.tape() == this) return Tensor(t.shape(), values[static_cast<std::size_t>(t.node())]);
    return t;
  };
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == OpKind::leaf) {
      values[i] = n.out.to_vector();
      continue;
    }
    const Tensor a = input(n.a);
    if (n.binary) {
      const Tensor b = input(n.b);
      values[i] = evaluate(n.op, a, &b, n.attr).values;
    } else {
      values[i] = evaluate(n.op, a, nullptr, n.attr).values;
    }
  }
  return values;
}

std::vector<Tensor> hessian_vector_product(const Tensor& output, std::span<const Tensor> params,
                                           std::span<const Tensor> v) {
  Tape* tape = output.tape();
  if (tape == nullptr) throw std::invalid_argument("hessian_vector_product: output is not on a tape");
  if (params.size() != v.size()) throw ShapeError("hessian_vector_product: params/v count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != v[i].size()) {
      throw ShapeError("hessian_vector_product: v shape " + shape_string(v[i].shape()) +
                       " does not match parameter " + shape_string(params[i].shape()));
    }
  }
  const auto grads = tape->gradient(output, params, /*create_graph=*/true);
  Tensor inner = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    inner = inner + dot(grads[i], reshape(v[i].detach(), grads[i].shape()));
  }
  if (!inner.on_tape()) {
    std::vector<Tensor> zeros;
    for (const auto& p : params) zeros.push_back(Tensor::zeros(p.shape()));
    return zeros;
  }
  return tape->gradient(inner, params, /*create_graph=*/false);
}

// ---------------------------------------------------------------------------
// Op front-ends

Tensor add(const Tensor& a, const Tensor& b) { return binary(OpKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(OpKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(OpKind::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(OpKind::div, a, b); }
Tensor neg(const Tensor& a) { return unary(OpKind::neg, a); }
Tensor matmul(const Tensor& a, const Tensor& b) { return binary(OpKind::matmul, a, b); }
Tensor transpose(const Tensor& a) { return unary(OpKind::transpose, a); }
Tensor sum(const Tensor& a) { return unary(OpKind::sum, a); }

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean of empty tensor");
  return sum(a) * (1.0 / static_cast<double>(a.size()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
  return sum(mul(a, b.shape() == a.shape() ? b : reshape(b, a.shape())));
}

Tensor sum_to(const Tensor& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  OpAttr attr;
  attr.shape = shape;
  return unary(OpKind::sum_to, a, attr);
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  OpAttr attr;
  attr.shape = shape;
  return unary(OpKind::broadcast_to, a, attr);
}

Tensor sum_last(const Tensor& a) { return unary(OpKind::sum_last, a); }

Tensor expand_last(const Tensor& a, std::size_t k) {
  OpAttr attr;
  attr.length = k;
  return unary(OpKind::expand_last, a, attr);
}

Tensor exp(const Tensor& a) { return unary(OpKind::exp, a); }
Tensor log(const Tensor& a) { return unary(OpKind::log, a); }

Tensor pow(const Tensor& a, double exponent) {
  OpAttr attr;
  attr.scalar = exponent;
  return unary(OpKind::pow, a, attr);
}

Tensor square(const Tensor& a) { return mul(a, a); }
Tensor tanh(const Tensor& a) { return unary(OpKind::tanh, a); }
Tensor relu(const Tensor& a) { return unary(OpKind::relu, a); }
Tensor sigmoid(const Tensor& a) { return unary(OpKind::sigmoid, a); }
Tensor softplus(const Tensor& a) { return unary(OpKind::softplus, a); }
Tensor log_sigmoid(const Tensor& a) { return -softplus(-a); }

Tensor slice(const Tensor& a, std::size_t offset, std::size_t length) {
  OpAttr attr;
  attr.offset = offset;
  attr.length = length;
  return unary(OpKind::slice, a, attr);
}

Tensor pad(const Tensor& a, std::size_t offset, std::size_t total) {
  OpAttr attr;
  attr.offset = offset;
  attr.length = total;
  return unary(OpKind::pad, a, attr);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (a.shape() == shape) return a;
  OpAttr attr;
  attr.shape = std::move(shape);
  return unary(OpKind::reshape, a, attr);
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator-(const Tensor& a) { return neg(a); }
Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor operator+(double a, const Tensor& b) { return add(Tensor::scalar(a), b); }
Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
Tensor operator/(double a, const Tensor& b) { return div(Tensor::scalar(a), b); }

}  // namespace rvi
