#include "disent/model.hpp"

#include <cmath>
#include <unordered_set>

namespace disent {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

std::vector<double> mean_std_pool(const std::vector<double>& features, std::size_t batch,
                                  std::size_t feat_dim, std::size_t frames) {
  if (features.size() != batch * feat_dim * frames) {
    throw ShapeError("mean_std_pool: feature buffer size mismatch");
  }
  std::vector<double> pooled(batch * 2 * feat_dim);
  const double inv_t = 1.0 / static_cast<double>(frames);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* u = features.data() + b * feat_dim * frames;
    double* out = pooled.data() + b * 2 * feat_dim;
    for (std::size_t f = 0; f < feat_dim; ++f) {
      const double* row = u + f * frames;
      double mean = 0.0;
      for (std::size_t t = 0; t < frames; ++t) mean += row[t];
      mean *= inv_t;
      double var = 0.0;
      for (std::size_t t = 0; t < frames; ++t) {
        const double d = row[t] - mean;
        var += d * d;
      }
      var *= inv_t;
      out[f] = mean;
      out[feat_dim + f] = var > 0.0 ? std::sqrt(var) : 0.0;
    }
  }
  return pooled;
}

Encoder::Encoder(const ModelConfig& cfg, Rng& rng)
    : feat_dim(cfg.feat_dim),
      frames(cfg.frames),
      fc1(2 * cfg.feat_dim, cfg.enc_hidden, rng),
      bn1(cfg.enc_hidden),
      fc2(cfg.enc_hidden, cfg.emb_dim, rng) {}

Tensor Encoder::forward(const Tensor& features, bool training) {
  if (features.cols() != feat_dim * frames) {
    throw ShapeError("encode: feature dimension mismatch");
  }
  const std::size_t b = features.rows();
  Tensor pooled = Tensor::from({b, 2 * feat_dim},
                               mean_std_pool(features.values(), b, feat_dim, frames));
  return fc2.forward(bn1.forward(fc1.forward(pooled).relu(), training));
}

void Encoder::collect(ParamList& params, ParamList& buffers) const {
  fc1.collect("encoder.fc1", params);
  bn1.collect("encoder.bn1", params);
  fc2.collect("encoder.fc2", params);
  bn1.collect_buffers("encoder.bn1", buffers);
}

Decoupler::Decoupler(std::size_t d, Rng& rng)
    : shared(d, d, rng), spk(d, d, rng), dev(d, d, rng) {}

std::pair<Tensor, Tensor> Decoupler::forward(const Tensor& x, bool training) {
  Tensor h = shared.forward(x, training);
  return {spk.forward(h, training), dev.forward(h, training)};
}

void Decoupler::collect(ParamList& params, ParamList& buffers) const {
  shared.collect("decoupler.shared", params);
  spk.collect("decoupler.spk", params);
  dev.collect("decoupler.dev", params);
  shared.collect_buffers("decoupler.shared", buffers);
  spk.collect_buffers("decoupler.spk", buffers);
  dev.collect_buffers("decoupler.dev", buffers);
}

CosineClassifier::CosineClassifier(std::size_t classes, std::size_t d, Rng& rng)
    : weight(xavier_uniform(classes, d, rng)) {}

Tensor CosineClassifier::cosines(const Tensor& emb) const {
  return matmul_nt(l2_normalize_rows(emb), l2_normalize_rows(weight));
}

ApSimilarity::ApSimilarity()
    : scale(Tensor::from({1}, {10.0}, true)), bias(Tensor::from({1}, {0.0}, true)) {}

VariationalGaussian::VariationalGaussian(std::size_t d, std::size_t hidden, Rng& rng)
    : trunk(d, hidden, rng), mu_head(hidden, d, rng), lv_head(hidden, d, rng) {}

std::pair<Tensor, Tensor> VariationalGaussian::forward(const Tensor& x_s, bool frozen) const {
  Tensor h = trunk.forward(x_s, frozen).relu();
  return {mu_head.forward(h, frozen), lv_head.forward(h, frozen).clamp(-10.0, 10.0)};
}

void VariationalGaussian::collect(const std::string& prefix, ParamList& out) const {
  trunk.collect(prefix + ".trunk", out);
  mu_head.collect(prefix + ".mu", out);
  lv_head.collect(prefix + ".lv", out);
}

VariationalCategorical::VariationalCategorical(std::size_t d, std::size_t hidden,
                                               std::size_t classes, Rng& rng)
    : trunk(d, hidden, rng), head(hidden, classes, rng) {}

Tensor VariationalCategorical::logits(const Tensor& x, bool frozen) const {
  return head.forward(trunk.forward(x, frozen).relu(), frozen);
}

void VariationalCategorical::collect(const std::string& prefix, ParamList& out) const {
  trunk.collect(prefix + ".trunk", out);
  head.collect(prefix + ".head", out);
}

Tensor gaussian_logprob(const Tensor& mu, const Tensor& logvar, const Tensor& x_d) {
  if (mu.shape() != logvar.shape() || mu.shape() != x_d.shape()) {
    throw ShapeError("gaussian_logprob: shape mismatch");
  }
  Tensor q = (x_d - mu).square() * (logvar * -1.0).exp();
  return (((logvar + q) * -0.5) + (-0.5 * kLog2Pi)).row_sum();
}

Tensor categorical_logprob(const Tensor& logits, const std::vector<std::size_t>& y) {
  return pick(logits.log_softmax(), y);
}

Model::Model(const ModelConfig& c, std::uint64_t seed) : cfg(c) {
  if (cfg.num_speakers < 1 || cfg.num_devices < 1) {
    throw ConfigError("model: class counts must be positive");
  }
  Rng enc_rng(mix_seed(seed, "encoder", 0));
  encoder = Encoder(cfg, enc_rng);
  Rng dec_rng(mix_seed(seed, "decoupler", 0));
  decoupler = Decoupler(cfg.emb_dim, dec_rng);
  Rng cls_rng(mix_seed(seed, "classifier", 0));
  spk_cls = CosineClassifier(cfg.num_speakers, cfg.emb_dim, cls_rng);
  dev_cls = CosineClassifier(cfg.num_devices, cfg.emb_dim, cls_rng);
  Rng p1_rng(mix_seed(seed, "phi1", 0));
  phi1 = VariationalGaussian(cfg.emb_dim, cfg.phi_hidden, p1_rng);
  Rng p2_rng(mix_seed(seed, "phi2", 0));
  phi2 = VariationalCategorical(cfg.emb_dim, cfg.phi_hidden, cfg.num_speakers, p2_rng);
  Rng p3_rng(mix_seed(seed, "phi3", 0));
  phi3 = VariationalCategorical(cfg.emb_dim, cfg.phi_hidden, cfg.num_devices, p3_rng);

  std::unordered_set<const TensorNode*> seen;
  auto check_disjoint = [&seen](const ParamList& group) {
    for (const auto& p : group) {
      if (!seen.insert(p.tensor.raw()).second) {
        throw ConfigError("model: parameter groups are not disjoint at " + p.name);
      }
    }
  };
  check_disjoint(theta_params());
  check_disjoint(phi1_params());
  check_disjoint(phi2_params());
  check_disjoint(phi3_params());
}

ParamList Model::theta_params() const {
  ParamList params, buffers;
  encoder.collect(params, buffers);
  decoupler.collect(params, buffers);
  params.push_back({"classifier.spk.weight", spk_cls.weight});
  params.push_back({"classifier.dev.weight", dev_cls.weight});
  params.push_back({"classifier.ap.scale", ap.scale});
  params.push_back({"classifier.ap.bias", ap.bias});
  return params;
}

ParamList Model::phi1_params() const {
  ParamList out;
  phi1.collect("phi1", out);
  return out;
}

ParamList Model::phi2_params() const {
  ParamList out;
  phi2.collect("phi2", out);
  return out;
}

ParamList Model::phi3_params() const {
  ParamList out;
  phi3.collect("phi3", out);
  return out;
}

ParamList Model::buffers() const {
  ParamList params, buffers;
  encoder.collect(params, buffers);
  decoupler.collect(params, buffers);
  return buffers;
}

}  // namespace disent
