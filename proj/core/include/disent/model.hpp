#pragma once

#include <cstdint>
#include <utility>

#include "disent/nn.hpp"

namespace disent {

struct ModelConfig {
  std::size_t feat_dim = 8;     // F
  std::size_t frames = 20;      // T
  std::size_t emb_dim = 16;     // D
  std::size_t enc_hidden = 32;  // encoder MLP width
  std::size_t phi_hidden = 64;  // variational network width
  std::size_t num_speakers = 20;
  std::size_t num_devices = 3;
};

// mean + standard-deviation pooling over the frame axis:
// [B x F*T] (frame-major rows, value t of feature f at f*T + t) -> [B x 2F]
std::vector<double> mean_std_pool(const std::vector<double>& features, std::size_t batch,
                                  std::size_t feat_dim, std::size_t frames);

// front-end encoder: pooling + 2-layer MLP to the initial embedding
struct Encoder {
  std::size_t feat_dim = 0, frames = 0;
  Linear fc1;  // 2F -> H
  BatchNorm1d bn1;
  Linear fc2;  // H -> D

  Encoder() = default;
  Encoder(const ModelConfig& cfg, Rng& rng);

  // features: [B x F*T] leaf
  Tensor forward(const Tensor& features, bool training);

  void collect(ParamList& params, ParamList& buffers) const;
};

// shared trunk block feeding two parallel branch blocks
struct Decoupler {
  MlpBlock shared;  // D -> D
  MlpBlock spk;     // D -> D, speaker branch
  MlpBlock dev;     // D -> D, device branch

  Decoupler() = default;
  Decoupler(std::size_t d, Rng& rng);

  std::pair<Tensor, Tensor> forward(const Tensor& x, bool training);  // (x_s, x_d)

  void collect(ParamList& params, ParamList& buffers) const;
};

// class weights behind the margin softmax; normalization applied functionally
struct CosineClassifier {
  Tensor weight;  // [C x D]

  CosineClassifier() = default;
  CosineClassifier(std::size_t classes, std::size_t d, Rng& rng);

  Tensor cosines(const Tensor& emb) const;  // [N x C]
};

// learnable affine cosine for the prototypical loss
struct ApSimilarity {
  Tensor scale;  // [1], init 10, clamped >= 1e-6 in use
  Tensor bias;   // [1], init 0

  ApSimilarity();
};

// Gaussian head q(x_d | x_s): trunk + mu / log-variance heads
struct VariationalGaussian {
  Linear trunk;    // D -> H
  Linear mu_head;  // H -> D
  Linear lv_head;  // H -> D

  VariationalGaussian() = default;
  VariationalGaussian(std::size_t d, std::size_t hidden, Rng& rng);

  // returns (mu [N x D], log-variance [N x D] clamped to [-10, 10])
  std::pair<Tensor, Tensor> forward(const Tensor& x_s, bool frozen = false) const;

  void collect(const std::string& prefix, ParamList& out) const;
};

// categorical head q(y | x)
struct VariationalCategorical {
  Linear trunk;  // D -> H
  Linear head;   // H -> C

  VariationalCategorical() = default;
  VariationalCategorical(std::size_t d, std::size_t hidden, std::size_t classes, Rng& rng);

  Tensor logits(const Tensor& x, bool frozen = false) const;  // [N x C]

  void collect(const std::string& prefix, ParamList& out) const;
};

// log q(x_d | x_s) per row, the factorized Gaussian log-density
// sum_k [ -1/2 log(2 pi sigma2_k) - (x_d_k - mu_k)^2 / (2 sigma2_k) ]
Tensor gaussian_logprob(const Tensor& mu, const Tensor& logvar, const Tensor& x_d);  // [N]

// log q(y | x) per row: log softmax probability of the labeled class
Tensor categorical_logprob(const Tensor& logits, const std::vector<std::size_t>& y);  // [N]

struct Model {
  ModelConfig cfg;
  Encoder encoder;
  Decoupler decoupler;
  CosineClassifier spk_cls;  // [S x D]
  CosineClassifier dev_cls;  // [V x D]
  ApSimilarity ap;
  VariationalGaussian phi1;
  VariationalCategorical phi2;  // x_d -> speaker logits
  VariationalCategorical phi3;  // x_s -> device logits

  Model(const ModelConfig& cfg, std::uint64_t seed);

  Tensor encode(const Tensor& features, bool training) { return encoder.forward(features, training); }
  std::pair<Tensor, Tensor> decouple(const Tensor& x, bool training) {
    return decoupler.forward(x, training);
  }

  // main-network parameters, names prefixed encoder. / decoupler. / classifier.
  ParamList theta_params() const;
  ParamList phi1_params() const;
  ParamList phi2_params() const;
  ParamList phi3_params() const;
  ParamList buffers() const;  // batchnorm running statistics
};

}  // namespace disent
