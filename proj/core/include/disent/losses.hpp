#pragma once

#include "disent/model.hpp"

namespace disent {

struct LossWeights {
  double cls_s = 5.0;
  double cls_d = 10.0;
  double mi1 = 0.5;  // I(x_s; x_d)
  double mi2 = 0.1;  // I(x_d; y_s)
  double mi3 = 0.1;  // I(x_s; y_d)
};

struct MarginConfig {
  double scale = 30.0;
  double margin = 0.2;  // radians
};

// Additive angular margin softmax: cosine logits from L2-normalized rows, the
// labeled class angle shifted by +margin (clamped so theta + m <= pi), mean
// negative log softmax of the scale-multiplied logits.
Tensor aam_softmax_loss(const Tensor& emb, const std::vector<std::size_t>& labels,
                        const Tensor& class_weights, double scale, double margin);

// N-way prototypical classification over affine cosine similarities
// sim(i, j) = w * cos(emb_a_i, emb_b_j) + b, w clamped >= 1e-6; row i's target
// is its own prototype j = i.
Tensor angular_prototypical_loss(const Tensor& emb_a, const Tensor& emb_b, const Tensor& scale,
                                 const Tensor& bias);

// -(1/N) sum_i log q(x_d_i | x_s_i); embeddings are detached internally so the
// gradient reaches the variational parameters only.
Tensor nll_gaussian(const Tensor& x_s, const Tensor& x_d, const VariationalGaussian& q);

// -(1/N) sum_i log q(y_i | x_i); embeddings detached internally.
Tensor nll_categorical(const Tensor& x, const std::vector<std::size_t>& y,
                       const VariationalCategorical& q);

// weighted sum of the five scalar terms; negative weights rejected
Tensor total_loss(const Tensor& l_cls_s, const Tensor& l_cls_d, const Tensor& mi1,
                  const Tensor& mi2, const Tensor& mi3, const LossWeights& w);

}  // namespace disent
