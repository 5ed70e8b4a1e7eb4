#include "disent/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace disent {

namespace {

void check_finite(const std::vector<double>& values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by op '") + op + "'");
    }
  }
}

bool any_requires_grad(const std::vector<Tensor>& inputs) {
  for (const auto& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

// Accumulating matrix kernels, row-major. c must be pre-sized.
// c[N x M] += a[N x K] . b[K x M]
void mm_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
            std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[N x M] += a[N x K] . b[M x K]^T
void mm_nt_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
               std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// c[M x K] += a[N x M]^T . b[N x K]
void mm_tn_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t m,
               std::size_t k) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * m;
    const double* bi = b + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double av = ai[j];
      if (av == 0.0) continue;
      double* cj = c + j * k;
      for (std::size_t p = 0; p < k; ++p) cj[p] += av * bi[p];
    }
  }
}

Tensor make_op(Shape shape, std::vector<double> values, const char* op,
               std::vector<Tensor> inputs, std::function<void(TensorNode&)> backprop) {
  check_finite(values, op);
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->op = op;
  if (any_requires_grad(inputs)) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node_ptr());
    node->backprop = std::move(backprop);
  }
  return wrap_node(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes do not match");
  }
}

void require_2d(const Tensor& a, const char* op) {
  if (a.shape().size() != 2) throw ShapeError(std::string(op) + ": expected a 2-d tensor");
}

// grad accumulation guard: constants never receive gradients
bool wants_grad(const TensorNode& n) { return n.requires_grad; }

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero dimension in shape");
    n *= d;
  }
  return n;
}

Tensor wrap_node(std::shared_ptr<TensorNode> node) { return Tensor(std::move(node)); }

TensorNode& Tensor::node() const {
  if (!node_) throw ShapeError("use of an undefined tensor");
  return *node_;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: shape does not match number of values");
  }
  check_finite(values, "leaf");
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t i) const {
  if (i >= shape().size()) throw ShapeError("dim index out of range");
  return shape()[i];
}

std::size_t Tensor::rows() const {
  require_2d(*this, "rows");
  return shape()[0];
}

std::size_t Tensor::cols() const {
  require_2d(*this, "cols");
  return shape()[1];
}

std::vector<double>& Tensor::values_mut() {
  TensorNode& n = node();
  if (!n.inputs.empty()) {
    throw ShapeError("values_mut: only leaf tensors may be mutated");
  }
  return n.values;
}

const std::vector<double>& Tensor::grad() const {
  const TensorNode& n = node();
  if (n.grad.empty()) throw ShapeError("grad: no gradient computed for this tensor");
  return n.grad;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor is not scalar");
  return values()[0];
}

Tensor Tensor::detached() const {
  return Tensor::from(shape(), values(), false);
}

void Tensor::backward() const {
  const TensorNode& root = node();
  if (root.numel() != 1) throw ShapeError("backward: loss must be a scalar");
  if (!root.requires_grad) {
    throw ShapeError("backward: loss does not depend on any requires_grad tensor");
  }

  // Post-order DFS over requires_grad inputs. Iterative so graph depth is
  // unbounded; the visit order is a function of the graph structure only,
  // which keeps repeated backward passes bitwise identical.
  std::vector<TensorNode*> topo;
  std::unordered_set<TensorNode*> visited;
  struct Frame {
    TensorNode* node;
    std::size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      TensorNode* in = f.node->inputs[f.next_input++].get();
      if (in->requires_grad && !visited.count(in)) {
        visited.insert(in);
        stack.push_back({in, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  for (TensorNode* n : topo) n->grad.assign(n->numel(), 0.0);
  node_->grad[0] = 1.0;
  // topo is post-order: inputs first, root last. Walk in reverse.
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op(a.shape(), std::move(out), "add", {a, b}, [](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i];
    if (wants_grad(y))
      for (std::size_t i = 0; i < o.grad.size(); ++i) y.grad[i] += o.grad[i];
  });
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_op(a.shape(), std::move(out), "sub", {a, b}, [](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i];
    if (wants_grad(y))
      for (std::size_t i = 0; i < o.grad.size(); ++i) y.grad[i] -= o.grad[i];
  });
}

Tensor operator*(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op(a.shape(), std::move(out), "mul", {a, b}, [](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i] * y.values[i];
    if (wants_grad(y))
      for (std::size_t i = 0; i < o.grad.size(); ++i) y.grad[i] += o.grad[i] * x.values[i];
  });
}

Tensor operator-(const Tensor& a) { return a * -1.0; }

Tensor operator*(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  return make_op(a.shape(), std::move(out), "scale", {a}, [c](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i] * c;
  });
}

Tensor operator*(double c, const Tensor& a) { return a * c; }

Tensor operator+(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
  return make_op(a.shape(), std::move(out), "shift", {a}, [](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i];
  });
}

Tensor operator-(const Tensor& a, double c) { return a + (-c); }

Tensor Tensor::exp() const {
  std::vector<double> out(numel());
  const auto& av = values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  return make_op(shape(), std::move(out), "exp", {*this}, [](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i] * o.values[i];
  });
}

Tensor Tensor::log() const {
  std::vector<double> out(numel());
  const auto& av = values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(av[i]);
  return make_op(shape(), std::move(out), "log", {*this}, [](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i] / x.values[i];
  });
}

Tensor Tensor::relu() const {
  std::vector<double> out(numel());
  const auto& av = values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  return make_op(shape(), std::move(out), "relu", {*this}, [](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      // subgradient at 0 is 0
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        if (x.values[i] > 0.0) x.grad[i] += o.grad[i];
  });
}

Tensor Tensor::square() const { return (*this) * (*this); }

Tensor Tensor::pow(double exponent) const {
  std::vector<double> out(numel());
  const auto& av = values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::pow(av[i], exponent);
  return make_op(shape(), std::move(out), "pow", {*this}, [exponent](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        x.grad[i] += o.grad[i] * exponent * std::pow(x.values[i], exponent - 1.0);
  });
}

Tensor Tensor::clamp(double lo, double hi) const {
  std::vector<double> out(numel());
  const auto& av = values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(av[i], lo), hi);
  return make_op(shape(), std::move(out), "clamp", {*this}, [lo, hi](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        if (x.values[i] > lo && x.values[i] < hi) x.grad[i] += o.grad[i];
  });
}

// ---------------------------------------------------------------------------
// reductions

Tensor Tensor::sum() const {
  double acc = 0.0;
  for (double v : values()) acc += v;
  return make_op({1}, {acc}, "sum", {*this}, [](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < x.grad.size(); ++i) x.grad[i] += o.grad[0];
  });
}

Tensor Tensor::mean() const {
  double acc = 0.0;
  for (double v : values()) acc += v;
  const double inv = 1.0 / static_cast<double>(numel());
  return make_op({1}, {acc * inv}, "mean", {*this}, [inv](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < x.grad.size(); ++i) x.grad[i] += o.grad[0] * inv;
  });
}

Tensor Tensor::row_sum() const {
  require_2d(*this, "row_sum");
  const std::size_t n = rows(), d = cols();
  std::vector<double> out(n, 0.0);
  const auto& av = values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i] += av[i * d + j];
  return make_op({n}, std::move(out), "row_sum", {*this}, [n, d](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x.grad[i * d + j] += o.grad[i];
  });
}

Tensor Tensor::col_sum() const {
  require_2d(*this, "col_sum");
  const std::size_t n = rows(), d = cols();
  std::vector<double> out(d, 0.0);
  const auto& av = values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += av[i * d + j];
  return make_op({d}, std::move(out), "col_sum", {*this}, [n, d](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x.grad[i * d + j] += o.grad[j];
  });
}

Tensor Tensor::col_mean() const {
  require_2d(*this, "col_mean");
  const std::size_t n = rows(), d = cols();
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<double> out(d, 0.0);
  const auto& av = values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += av[i * d + j];
  for (std::size_t j = 0; j < d; ++j) out[j] *= inv;
  return make_op({d}, std::move(out), "col_mean", {*this}, [n, d, inv](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (wants_grad(x))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x.grad[i * d + j] += o.grad[j] * inv;
  });
}

// ---------------------------------------------------------------------------
// softmax family

Tensor Tensor::softmax() const {
  require_2d(*this, "softmax");
  const std::size_t n = rows(), c = cols();
  std::vector<double> out(n * c);
  const auto& zv = values();
  for (std::size_t i = 0; i < n; ++i) {
    const double* zi = zv.data() + i * c;
    double m = zi[0];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, zi[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = std::exp(zi[j] - m);
      denom += out[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= denom;
  }
  return make_op(shape(), std::move(out), "softmax", {*this}, [n, c](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (!wants_grad(x)) return;
    for (std::size_t i = 0; i < n; ++i) {
      const double* yi = o.values.data() + i * c;
      const double* gi = o.grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += gi[j] * yi[j];
      for (std::size_t j = 0; j < c; ++j) x.grad[i * c + j] += yi[j] * (gi[j] - dot);
    }
  });
}

Tensor Tensor::log_softmax() const {
  require_2d(*this, "log_softmax");
  const std::size_t n = rows(), c = cols();
  std::vector<double> out(n * c);
  const auto& zv = values();
  for (std::size_t i = 0; i < n; ++i) {
    const double* zi = zv.data() + i * c;
    double m = zi[0];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, zi[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(zi[j] - m);
    const double lse = m + std::log(denom);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = zi[j] - lse;
  }
  return make_op(shape(), std::move(out), "log_softmax", {*this}, [n, c](TensorNode& o) {
    auto& x = *o.inputs[0];
    if (!wants_grad(x)) return;
    for (std::size_t i = 0; i < n; ++i) {
      const double* yi = o.values.data() + i * c;
      const double* gi = o.grad.data() + i * c;
      double gsum = 0.0;
      for (std::size_t j = 0; j < c; ++j) gsum += gi[j];
      for (std::size_t j = 0; j < c; ++j)
        x.grad[i * c + j] += gi[j] - std::exp(yi[j]) * gsum;
    }
  });
}

// ---------------------------------------------------------------------------
// matrix products

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) throw ShapeError("matmul: inner dimensions do not match");
  std::vector<double> out(n * m, 0.0);
  mm_acc(a.values().data(), b.values().data(), out.data(), n, k, m);
  return make_op({n, m}, std::move(out), "matmul", {a, b}, [n, k, m](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x)) mm_nt_acc(o.grad.data(), y.values.data(), x.grad.data(), n, m, k);
    if (wants_grad(y)) mm_tn_acc(x.values.data(), o.grad.data(), y.grad.data(), n, k, m);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k) throw ShapeError("matmul_nt: inner dimensions do not match");
  std::vector<double> out(n * m, 0.0);
  mm_nt_acc(a.values().data(), b.values().data(), out.data(), n, k, m);
  return make_op({n, m}, std::move(out), "matmul_nt", {a, b}, [n, k, m](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x)) mm_acc(o.grad.data(), y.values.data(), x.grad.data(), n, m, k);
    if (wants_grad(y)) mm_tn_acc(o.grad.data(), x.values.data(), y.grad.data(), n, m, k);
  });
}

// ---------------------------------------------------------------------------
// broadcasts

Tensor add_row(const Tensor& a, const Tensor& v) {
  require_2d(a, "add_row");
  const std::size_t n = a.rows(), d = a.cols();
  if (v.shape() != Shape{d}) throw ShapeError("add_row: vector length must equal column count");
  std::vector<double> out(n * d);
  const auto& av = a.values();
  const auto& vv = v.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = av[i * d + j] + vv[j];
  return make_op(a.shape(), std::move(out), "add_row", {a, v}, [n, d](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i];
    if (wants_grad(y))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) y.grad[j] += o.grad[i * d + j];
  });
}

Tensor mul_row(const Tensor& a, const Tensor& v) {
  require_2d(a, "mul_row");
  const std::size_t n = a.rows(), d = a.cols();
  if (v.shape() != Shape{d}) throw ShapeError("mul_row: vector length must equal column count");
  std::vector<double> out(n * d);
  const auto& av = a.values();
  const auto& vv = v.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = av[i * d + j] * vv[j];
  return make_op(a.shape(), std::move(out), "mul_row", {a, v}, [n, d](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x.grad[i * d + j] += o.grad[i * d + j] * y.values[j];
    if (wants_grad(y))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) y.grad[j] += o.grad[i * d + j] * x.values[i * d + j];
  });
}

Tensor add_col(const Tensor& a, const Tensor& v) {
  require_2d(a, "add_col");
  const std::size_t n = a.rows(), d = a.cols();
  if (v.shape() != Shape{n}) throw ShapeError("add_col: vector length must equal row count");
  std::vector<double> out(n * d);
  const auto& av = a.values();
  const auto& vv = v.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = av[i * d + j] + vv[i];
  return make_op(a.shape(), std::move(out), "add_col", {a, v}, [n, d](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i];
    if (wants_grad(y))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) y.grad[i] += o.grad[i * d + j];
  });
}

Tensor mul_col(const Tensor& a, const Tensor& v) {
  require_2d(a, "mul_col");
  const std::size_t n = a.rows(), d = a.cols();
  if (v.shape() != Shape{n}) throw ShapeError("mul_col: vector length must equal row count");
  std::vector<double> out(n * d);
  const auto& av = a.values();
  const auto& vv = v.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = av[i * d + j] * vv[i];
  return make_op(a.shape(), std::move(out), "mul_col", {a, v}, [n, d](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x.grad[i * d + j] += o.grad[i * d + j] * y.values[i];
    if (wants_grad(y))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) y.grad[i] += o.grad[i * d + j] * x.values[i * d + j];
  });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) throw ShapeError("mul_scalar: scalar operand must have one element");
  const double sv = s.values()[0];
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * sv;
  return make_op(a.shape(), std::move(out), "mul_scalar", {a, s}, [](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i] * y.values[0];
    if (wants_grad(y))
      for (std::size_t i = 0; i < o.grad.size(); ++i) y.grad[0] += o.grad[i] * x.values[i];
  });
}

Tensor add_scalar(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) throw ShapeError("add_scalar: scalar operand must have one element");
  const double sv = s.values()[0];
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + sv;
  return make_op(a.shape(), std::move(out), "add_scalar", {a, s}, [](TensorNode& o) {
    auto& x = *o.inputs[0];
    auto& y = *o.inputs[1];
    if (wants_grad(x))
      for (std::size_t i = 0; i < o.grad.size(); ++i) x.grad[i] += o.grad[i];
    if (wants_grad(y))
      for (std::size_t i = 0; i < o.grad.size(); ++i) y.grad[0] += o.grad[i];
  });
}

// ---------------------------------------------------------------------------
// indexed selection

Tensor take_rows(const Tensor& a, const std::vector<std::size_t>& idx) {
  require_2d(a, "take_rows");
  const std::size_t n = a.rows(), d = a.cols(), m = idx.size();
  for (std::size_t i : idx)
    if (i >= n) throw ShapeError("take_rows: row index out of range");
  std::vector<double> out(m * d);
  const auto& av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(av.data() + idx[i] * d, d, out.data() + i * d);
  auto indices = idx;
  return make_op({m, d}, std::move(out), "take_rows", {a},
                 [d, m, indices = std::move(indices)](TensorNode& o) {
                   auto& x = *o.inputs[0];
                   if (wants_grad(x))
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t j = 0; j < d; ++j)
                         x.grad[indices[i] * d + j] += o.grad[i * d + j];
                 });
}

Tensor pick(const Tensor& a, const std::vector<std::size_t>& idx) {
  require_2d(a, "pick");
  const std::size_t n = a.rows(), c = a.cols();
  if (idx.size() != n) throw ShapeError("pick: need one index per row");
  for (std::size_t i : idx)
    if (i >= c) throw ConfigError("pick: label out of range");
  std::vector<double> out(n);
  const auto& av = a.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = av[i * c + idx[i]];
  auto indices = idx;
  return make_op({n}, std::move(out), "pick", {a},
                 [c, indices = std::move(indices)](TensorNode& o) {
                   auto& x = *o.inputs[0];
                   if (wants_grad(x))
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       x.grad[i * c + indices[i]] += o.grad[i];
                 });
}

Tensor take_cols(const Tensor& a, const std::vector<std::size_t>& idx) {
  require_2d(a, "take_cols");
  const std::size_t n = a.rows(), c = a.cols(), m = idx.size();
  for (std::size_t i : idx)
    if (i >= c) throw ConfigError("take_cols: label out of range");
  std::vector<double> out(n * m);
  const auto& av = a.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = av[i * c + idx[j]];
  auto indices = idx;
  return make_op({n, m}, std::move(out), "take_cols", {a},
                 [n, c, m, indices = std::move(indices)](TensorNode& o) {
                   auto& x = *o.inputs[0];
                   if (wants_grad(x))
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < m; ++j)
                         x.grad[i * c + indices[j]] += o.grad[i * m + j];
                 });
}

Tensor where_mask(const std::vector<double>& mask, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "where_mask");
  if (mask.size() != a.numel()) throw ShapeError("where_mask: mask size mismatch");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] != 0.0 ? av[i] : bv[i];
  auto m = mask;
  return make_op(a.shape(), std::move(out), "where_mask", {a, b},
                 [m = std::move(m)](TensorNode& o) {
                   auto& x = *o.inputs[0];
                   auto& y = *o.inputs[1];
                   if (wants_grad(x))
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       if (m[i] != 0.0) x.grad[i] += o.grad[i];
                   if (wants_grad(y))
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       if (m[i] == 0.0) y.grad[i] += o.grad[i];
                 });
}

Tensor l2_normalize_rows(const Tensor& a) {
  require_2d(a, "l2_normalize_rows");
  Tensor sq = a.square().row_sum();
  for (double v : sq.values()) {
    if (v <= 0.0) throw NumericError("l2_normalize_rows: zero-norm row");
  }
  Tensor inv = sq.pow(-0.5);
  return mul_col(a, inv);
}

// ---------------------------------------------------------------------------
// finite differences

GradCheckResult finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double eps) {
  Tensor loss = f();
  if (loss.numel() != 1) throw ShapeError("finite_diff_check: loss must be scalar");
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    if (!p.requires_grad()) {
      throw ShapeError("finite_diff_check: parameter '" + name + "' does not require grad");
    }
    analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.numel(), 0.0));
  }

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi].second;
    auto& v = p.values_mut();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + eps;
      const double up = f().item();
      v[i] = saved - eps;
      const double down = f().item();
      v[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_coord = params[pi].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace disent
