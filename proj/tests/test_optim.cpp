#include <cmath>
#include <vector>

#include <doctest.h>

#include "disent/optim.hpp"

using namespace disent;

TEST_CASE("adam first step matches the update rule by hand") {
  Tensor w = Tensor::from({1, 2}, {1.0, -2.0}, true);
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam opt({w}, cfg);
  (w * Tensor::from({1, 2}, {3.0, -0.5})).sum().backward();  // grad = [3, -0.5]
  opt.step();
  // m = (1-b1) g, v = (1-b2) g^2; bias correction restores m_hat = g,
  // v_hat = g^2, so the first step is exactly -lr * g / (|g| + eps)
  double e0 = 1.0 - 0.1 * 3.0 / (3.0 + 1e-8);
  double e1 = -2.0 - 0.1 * -0.5 / (0.5 + 1e-8);
  CHECK(w.values()[0] == doctest::Approx(e0).epsilon(1e-12));
  CHECK(w.values()[1] == doctest::Approx(e1).epsilon(1e-12));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam second step uses decayed moments") {
  Tensor w = Tensor::from({1, 1}, {0.5}, true);
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam opt({w}, cfg);

  // replicate two steps with constant gradient g = 2
  double m = 0.0, v = 0.0, ref = 0.5;
  for (int t = 1; t <= 2; ++t) {
    const double g = 2.0;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    ref -= 0.01 * mh / (std::sqrt(vh) + 1e-8);

    (w * 2.0).sum().backward();
    opt.step();
  }
  CHECK(w.values()[0] == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("parameters missed by backward still shrink under weight decay") {
  Tensor a = Tensor::from({1, 1}, {4.0}, true);
  Tensor b = Tensor::from({1, 1}, {8.0}, true);
  AdamConfig cfg;
  cfg.lr = 0.5;
  cfg.weight_decay = 0.1;
  Adam opt({a, b}, cfg);
  (a * 1.0).sum().backward();  // only a gets a grad
  opt.step();
  // decoupled decay: w -= lr * wd * w, applied to both
  CHECK(b.values()[0] == doctest::Approx(8.0 * (1.0 - 0.5 * 0.1)).epsilon(1e-12));
  CHECK(a.values()[0] < 4.0 * (1.0 - 0.5 * 0.1));  // decay plus the Adam step
}

TEST_CASE("adam rejects non-finite gradients") {
  Tensor w = Tensor::from({1, 1}, {0.0}, true);
  Adam opt({w}, {});
  w.pow(0.5).sum().backward();  // d/dw sqrt(w) at 0 diverges
  CHECK_THROWS_AS(opt.step(), NumericError);
}

TEST_CASE("gradient clipping rescales to the norm budget") {
  Tensor w = Tensor::from({1, 2}, {0.0, 0.0}, true);
  (w * Tensor::from({1, 2}, {3.0, 4.0})).sum().backward();
  double norm = clip_grad_norm({w}, 2.5);
  CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(w.grad()[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(w.grad()[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("gradient clipping leaves small gradients alone") {
  Tensor w = Tensor::from({1, 2}, {0.0, 0.0}, true);
  (w * Tensor::from({1, 2}, {0.3, 0.4})).sum().backward();
  double norm = clip_grad_norm({w}, 5.0);
  CHECK(norm == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.grad()[0] == 0.3);
  CHECK(w.grad()[1] == 0.4);
}

TEST_CASE("warm-restart schedule interpolates each cycle") {
  ScheduleConfig cfg;
  cfg.cycle_epochs = 4;
  cfg.eta_max = 1e-3;
  cfg.eta_min = 1e-5;
  cfg.decay = 0.8;
  cfg.num_cycles = 3;
  CHECK(sgdr_lr(0.0, 0, cfg) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(sgdr_lr(1.0, 0, cfg) == doctest::Approx(1e-5).epsilon(1e-9));
  CHECK(sgdr_lr(0.5, 0, cfg) == doctest::Approx(0.5 * (1e-3 + 1e-5)).epsilon(1e-9));
  CHECK(sgdr_lr(0.0, 1, cfg) == doctest::Approx(0.8e-3).epsilon(1e-12));
  CHECK(sgdr_lr(0.0, 2, cfg) == doctest::Approx(0.64e-3).epsilon(1e-12));
}

TEST_CASE("schedule position maps epochs and steps into cycles") {
  ScheduleConfig cfg;
  cfg.cycle_epochs = 2;
  cfg.eta_max = 1.0;
  cfg.eta_min = 0.0;
  cfg.decay = 0.5;
  cfg.num_cycles = 2;
  // epoch 0 step 0: cycle 0 fraction 0
  CHECK(sgdr_lr_at(0, 0, 10, cfg) == doctest::Approx(1.0).epsilon(1e-12));
  // epoch 1 step 5: fraction (10 + 5) / 20
  CHECK(sgdr_lr_at(1, 5, 10, cfg) ==
        doctest::Approx(0.5 * (1.0 + std::cos(M_PI * 15.0 / 20.0))).epsilon(1e-9));
  // epoch 2: second cycle restarts at the decayed peak
  CHECK(sgdr_lr_at(2, 0, 10, cfg) == doctest::Approx(0.5).epsilon(1e-12));
  // beyond the last cycle the schedule pins to the final cycle's floor
  CHECK(sgdr_lr_at(100, 0, 10, cfg) == doctest::Approx(cfg.eta_min).epsilon(1e-12));
}

TEST_CASE("adam runs are deterministic") {
  auto run = [] {
    Tensor w = Tensor::from({1, 3}, {0.2, -0.4, 0.6}, true);
    AdamConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.01;
    Adam opt({w}, cfg);
    for (int i = 0; i < 5; ++i) {
      w.square().sum().backward();
      opt.step();
    }
    return w.values();
  };
  CHECK(run() == run());
}
