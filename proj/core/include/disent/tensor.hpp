#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "disent/common.hpp"

namespace disent {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);

// One node of the define-by-run compute graph. Nodes are created by the op
// functions below and linked through `inputs`; the graph is rebuilt for every
// batch and torn down when the last Tensor handle goes out of scope.
struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized during backward, empty before
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void(TensorNode&)> backprop;

  std::size_t numel() const { return values.size(); }
};

// Shared handle to a graph node. Copying a Tensor shares the node, so model
// parameters can live in module structs while also appearing in optimizer
// parameter lists. Values are immutable after construction except through
// values_mut(), which is restricted to leaves and must only be used between
// forward/backward passes (optimizer updates, finite differencing).
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node().shape; }
  std::size_t numel() const { return node().numel(); }
  std::size_t dim(std::size_t i) const;
  // 2-d accessors
  std::size_t rows() const;
  std::size_t cols() const;

  const std::vector<double>& values() const { return node().values; }
  std::vector<double>& values_mut();
  const std::vector<double>& grad() const;
  bool has_grad() const { return !node().grad.empty(); }
  bool requires_grad() const { return node().requires_grad; }
  double item() const;

  // Constant leaf holding a copy of this tensor's values; cuts the graph.
  Tensor detached() const;

  // Reverse-mode pass from a scalar loss. Grads of every reachable
  // requires_grad node are overwritten (zeroed then accumulated), so repeated
  // calls never accumulate across passes.
  void backward() const;

  // elementwise, same shape
  Tensor exp() const;
  Tensor log() const;
  Tensor relu() const;
  Tensor square() const;
  Tensor pow(double exponent) const;
  Tensor clamp(double lo, double hi) const;

  // reductions
  Tensor sum() const;
  Tensor mean() const;
  Tensor row_sum() const;   // [N x D] -> [N]
  Tensor col_sum() const;   // [N x D] -> [D]
  Tensor col_mean() const;  // [N x D] -> [D]

  // row-wise softmax over [N x C], numerically stabilized by max subtraction
  Tensor softmax() const;
  Tensor log_softmax() const;

  std::shared_ptr<TensorNode> node_ptr() const { return node_; }
  TensorNode* raw() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  TensorNode& node() const;

  std::shared_ptr<TensorNode> node_;

  friend Tensor wrap_node(std::shared_ptr<TensorNode> node);
};

Tensor wrap_node(std::shared_ptr<TensorNode> node);

// elementwise binary, shapes must match
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
// scalar constants
Tensor operator*(const Tensor& a, double c);
Tensor operator*(double c, const Tensor& a);
Tensor operator+(const Tensor& a, double c);
Tensor operator-(const Tensor& a, double c);

// matrix products; all operands 2-d
Tensor matmul(const Tensor& a, const Tensor& b);     // [N x K] . [K x M]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [N x K] . [M x K]^T -> [N x M]

// broadcasts over a [N x D] matrix
Tensor add_row(const Tensor& a, const Tensor& v);  // v: [D], added to every row
Tensor mul_row(const Tensor& a, const Tensor& v);  // v: [D]
Tensor add_col(const Tensor& a, const Tensor& v);  // v: [N], added down each column
Tensor mul_col(const Tensor& a, const Tensor& v);  // v: [N]

// broadcast a [1] tensor over all elements (gradient flows to the scalar)
Tensor mul_scalar(const Tensor& a, const Tensor& s);
Tensor add_scalar(const Tensor& a, const Tensor& s);

// indexed selection
Tensor take_rows(const Tensor& a, const std::vector<std::size_t>& idx);  // [M x D]
Tensor pick(const Tensor& a, const std::vector<std::size_t>& idx);       // out[i] = a[i, idx[i]]
Tensor take_cols(const Tensor& a, const std::vector<std::size_t>& idx);  // out[i][j] = a[i, idx[j]]

// elementwise select with a constant 0/1 mask (no gradient through the mask)
Tensor where_mask(const std::vector<double>& mask, const Tensor& a, const Tensor& b);

// rows scaled to unit L2 norm; throws NumericError on a zero-norm row
Tensor l2_normalize_rows(const Tensor& a);

// Central-difference gradient oracle. Builds the loss through `f` (which must
// be deterministic given the parameter values), compares analytic gradients
// against (f(p+eps) - f(p-eps)) / (2 eps) per coordinate, and returns the max
// relative error with denominator max(|analytic|, |numeric|, 1e-8).
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_coord;
};

GradCheckResult finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double eps = 1e-5);

}  // namespace disent
