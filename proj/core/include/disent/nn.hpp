#pragma once

#include <string>
#include <vector>

#include "disent/rng.hpp"
#include "disent/tensor.hpp"

namespace disent {

struct Param {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<Param>;

std::vector<Tensor> tensors_of(const ParamList& params);

// FC weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
Tensor xavier_uniform(std::size_t out_dim, std::size_t in_dim, Rng& rng);

// y = x . W^T + b
struct Linear {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  // frozen substitutes detached copies of the parameters, so gradients flow
  // only to x; used when a variational network appears inside the main loss.
  Tensor forward(const Tensor& x, bool frozen = false) const;

  void collect(const std::string& prefix, ParamList& out) const;
};

struct BatchNorm1d {
  Tensor gamma, beta;               // learnable [D]
  Tensor running_mean, running_var; // buffers [D], updated in train mode
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNorm1d() = default;
  explicit BatchNorm1d(std::size_t d);

  std::size_t dim() const { return gamma.numel(); }

  // train mode normalizes by batch statistics (biased variance) and updates
  // the running buffers; eval mode normalizes by the running buffers.
  Tensor forward(const Tensor& x, bool training);

  void collect(const std::string& prefix, ParamList& out) const;
  void collect_buffers(const std::string& prefix, ParamList& out) const;
};

// FC -> ReLU -> BN
struct MlpBlock {
  Linear fc;
  BatchNorm1d bn;

  MlpBlock() = default;
  MlpBlock(std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x, bool training);

  void collect(const std::string& prefix, ParamList& out) const;
  void collect_buffers(const std::string& prefix, ParamList& out) const;
};

}  // namespace disent
