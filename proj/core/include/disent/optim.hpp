#pragma once

#include <cstdint>

#include "disent/nn.hpp"

namespace disent {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

// Adam with decoupled weight decay. Parameters without a populated grad (not
// reached by the last backward pass) are treated as zero-gradient: moments
// decay, the Adam step is zero, weight decay still applies.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  std::int64_t step_count() const { return step_; }

  void step();

  // checkpoint access
  std::vector<std::vector<double>>& moments1() { return m_; }
  std::vector<std::vector<double>>& moments2() { return v_; }
  void set_step_count(std::int64_t s) { step_ = s; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t step_ = 0;
};

// Rescales gradients in place so their global L2 norm is at most max_norm;
// returns the pre-clip norm. Parameters without grads contribute nothing.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

struct ScheduleConfig {
  std::size_t cycle_epochs = 4;
  double eta_max = 1e-5;
  double eta_min = 1e-8;
  double decay = 1.0;  // eta_max multiplier per completed cycle
  std::size_t num_cycles = 1;
};

// cosine annealing with warm restarts:
// eta_min + 1/2 (eta_max decay^cycle - eta_min)(1 + cos(pi * fraction))
double sgdr_lr(double cycle_fraction, std::size_t cycle_index, const ScheduleConfig& cfg);

// lr for a global (epoch, step-within-epoch) position under cfg
double sgdr_lr_at(std::size_t epoch, std::size_t step_in_epoch, std::size_t steps_per_epoch,
                  const ScheduleConfig& cfg);

}  // namespace disent
