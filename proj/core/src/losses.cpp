#include "disent/losses.hpp"

#include <cmath>
#include <numeric>

namespace disent {

Tensor aam_softmax_loss(const Tensor& emb, const std::vector<std::size_t>& labels,
                        const Tensor& class_weights, double scale, double margin) {
  const std::size_t n = emb.rows(), c = class_weights.rows();
  if (labels.size() != n) throw ShapeError("aam_softmax_loss: one label per row required");
  for (std::size_t y : labels)
    if (y >= c) throw ConfigError("aam_softmax_loss: label out of range");
  if (scale <= 0.0 || margin < 0.0 || margin >= 1.5707963267948966) {
    throw ConfigError("aam_softmax_loss: need scale > 0 and margin in [0, pi/2)");
  }

  Tensor cosines = matmul_nt(l2_normalize_rows(emb), l2_normalize_rows(class_weights));
  const double cos_m = std::cos(margin), sin_m = std::sin(margin);
  // cos(theta + m) via the angle-sum identity; sin theta from the clamped
  // complement so tiny negative round-off under the square root is impossible
  Tensor sin_t = ((cosines.square() * -1.0) + 1.0).clamp(0.0, 1.0).pow(0.5);
  Tensor shifted = cosines * cos_m - sin_t * sin_m;
  // theta + m > pi would wrap; clamp to cos(pi) = -1 there
  const double wrap = std::cos(3.141592653589793238 - margin);
  std::vector<double> in_range(n * c), one_hot(n * c, 0.0);
  const auto& cv = cosines.values();
  for (std::size_t i = 0; i < n * c; ++i) in_range[i] = cv[i] >= wrap ? 1.0 : 0.0;
  for (std::size_t i = 0; i < n; ++i) one_hot[i * c + labels[i]] = 1.0;
  Tensor target_logit = where_mask(in_range, shifted, Tensor::full({n, c}, -1.0));
  Tensor logits = where_mask(one_hot, target_logit, cosines) * scale;
  return pick(logits.log_softmax(), labels).mean() * -1.0;
}

Tensor angular_prototypical_loss(const Tensor& emb_a, const Tensor& emb_b, const Tensor& scale,
                                 const Tensor& bias) {
  if (emb_a.shape() != emb_b.shape()) throw ShapeError("angular_prototypical_loss: shape mismatch");
  const std::size_t n = emb_a.rows();
  if (n < 2) throw ShapeError("angular_prototypical_loss: needs at least 2 speakers");
  Tensor cosines = matmul_nt(l2_normalize_rows(emb_a), l2_normalize_rows(emb_b));
  Tensor sim = add_scalar(mul_scalar(cosines, scale.clamp(1e-6, 1e12)), bias);
  std::vector<std::size_t> diag(n);
  std::iota(diag.begin(), diag.end(), std::size_t{0});
  return pick(sim.log_softmax(), diag).mean() * -1.0;
}

Tensor nll_gaussian(const Tensor& x_s, const Tensor& x_d, const VariationalGaussian& q) {
  Tensor xs = x_s.detached(), xd = x_d.detached();
  auto [mu, logvar] = q.forward(xs);
  return gaussian_logprob(mu, logvar, xd).mean() * -1.0;
}

Tensor nll_categorical(const Tensor& x, const std::vector<std::size_t>& y,
                       const VariationalCategorical& q) {
  return categorical_logprob(q.logits(x.detached()), y).mean() * -1.0;
}

Tensor total_loss(const Tensor& l_cls_s, const Tensor& l_cls_d, const Tensor& mi1,
                  const Tensor& mi2, const Tensor& mi3, const LossWeights& w) {
  if (w.cls_s < 0 || w.cls_d < 0 || w.mi1 < 0 || w.mi2 < 0 || w.mi3 < 0) {
    throw ConfigError("total_loss: loss weights must be nonnegative");
  }
  return l_cls_s * w.cls_s + l_cls_d * w.cls_d + mi1 * w.mi1 + mi2 * w.mi2 + mi3 * w.mi3;
}

}  // namespace disent
