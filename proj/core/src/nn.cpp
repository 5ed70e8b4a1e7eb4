#include "disent/nn.hpp"

#include <cmath>

namespace disent {

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

Tensor xavier_uniform(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::vector<double> w(out_dim * in_dim);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return Tensor::from({out_dim, in_dim}, std::move(w), true);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(xavier_uniform(out, in, rng)), bias(Tensor::zeros({out}, true)) {}

Tensor Linear::forward(const Tensor& x, bool frozen) const {
  if (x.cols() != in_dim()) throw ShapeError("linear: input dimension mismatch");
  if (frozen) return add_row(matmul_nt(x, weight.detached()), bias.detached());
  return add_row(matmul_nt(x, weight), bias);
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

BatchNorm1d::BatchNorm1d(std::size_t d)
    : gamma(Tensor::full({d}, 1.0, true)),
      beta(Tensor::zeros({d}, true)),
      running_mean(Tensor::zeros({d})),
      running_var(Tensor::full({d}, 1.0)) {}

Tensor BatchNorm1d::forward(const Tensor& x, bool training) {
  const std::size_t d = dim();
  if (x.cols() != d) throw ShapeError("batchnorm: feature dimension mismatch");
  Tensor xhat;
  if (training) {
    if (x.rows() < 2) throw ShapeError("batchnorm: train mode needs a batch of at least 2");
    Tensor mean = x.col_mean();
    Tensor centered = add_row(x, mean * -1.0);
    Tensor var = centered.square().col_mean();
    auto& rm = running_mean.values_mut();
    auto& rv = running_var.values_mut();
    const auto& mv = mean.values();
    const auto& vv = var.values();
    for (std::size_t j = 0; j < d; ++j) {
      rm[j] = (1.0 - momentum) * rm[j] + momentum * mv[j];
      rv[j] = (1.0 - momentum) * rv[j] + momentum * vv[j];
    }
    xhat = mul_row(centered, (var + eps).pow(-0.5));
  } else {
    Tensor inv_std = (running_var.detached() + eps).pow(-0.5);
    xhat = mul_row(add_row(x, running_mean.detached() * -1.0), inv_std);
  }
  return add_row(mul_row(xhat, gamma), beta);
}

void BatchNorm1d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

void BatchNorm1d::collect_buffers(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".running_mean", running_mean});
  out.push_back({prefix + ".running_var", running_var});
}

MlpBlock::MlpBlock(std::size_t in, std::size_t out, Rng& rng) : fc(in, out, rng), bn(out) {}

Tensor MlpBlock::forward(const Tensor& x, bool training) {
  return bn.forward(fc.forward(x).relu(), training);
}

void MlpBlock::collect(const std::string& prefix, ParamList& out) const {
  fc.collect(prefix + ".fc", out);
  bn.collect(prefix + ".bn", out);
}

void MlpBlock::collect_buffers(const std::string& prefix, ParamList& out) const {
  bn.collect_buffers(prefix + ".bn", out);
}

}  // namespace disent
