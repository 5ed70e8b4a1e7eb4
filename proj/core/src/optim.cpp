#include "disent/optim.hpp"

#include <cmath>

namespace disent {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : cfg_(cfg), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    auto& vals = p.values_mut();
    auto& m = m_[pi];
    auto& v = v_[pi];
    const bool has = p.has_grad();
    const std::vector<double>* g = has ? &p.grad() : nullptr;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double gi = has ? (*g)[i] : 0.0;
      if (!std::isfinite(gi)) throw NumericError("adam: non-finite gradient");
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      vals[i] -= cfg_.lr * cfg_.weight_decay * vals[i];
      vals[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& p : params) {
      if (!p.has_grad()) continue;
      for (double& gi : p.raw()->grad) gi *= scale;
    }
  }
  return norm;
}

double sgdr_lr(double cycle_fraction, std::size_t cycle_index, const ScheduleConfig& cfg) {
  if (cycle_fraction < 0.0 || cycle_fraction > 1.0) {
    throw ConfigError("sgdr_lr: cycle fraction must be in [0, 1]");
  }
  const double peak = cfg.eta_max * std::pow(cfg.decay, static_cast<double>(cycle_index));
  return cfg.eta_min +
         0.5 * (peak - cfg.eta_min) * (1.0 + std::cos(3.141592653589793238 * cycle_fraction));
}

double sgdr_lr_at(std::size_t epoch, std::size_t step_in_epoch, std::size_t steps_per_epoch,
                  const ScheduleConfig& cfg) {
  if (cfg.cycle_epochs == 0 || steps_per_epoch == 0) {
    throw ConfigError("sgdr_lr_at: cycle_epochs and steps_per_epoch must be positive");
  }
  std::size_t cycle = epoch / cfg.cycle_epochs;
  if (cfg.num_cycles > 0 && cycle >= cfg.num_cycles) cycle = cfg.num_cycles - 1;
  const std::size_t epoch_in_cycle = epoch - cycle * cfg.cycle_epochs;
  const double frac =
      (static_cast<double>(epoch_in_cycle) +
       static_cast<double>(step_in_epoch) / static_cast<double>(steps_per_epoch)) /
      static_cast<double>(cfg.cycle_epochs);
  return sgdr_lr(frac > 1.0 ? 1.0 : frac, cycle, cfg);
}

}  // namespace disent
