#pragma once

#include "disent/mi.hpp"
#include "disent/optim.hpp"

namespace disent {

// Gaussian-oracle sweep: fit the conditional-Gaussian variational network to
// correlated pairs (a fresh minibatch per step, so the fit tracks the
// population), then compare the pairwise estimate on a held-out stream
// against the closed forms.
struct MiSweepConfig {
  std::vector<double> rhos = {0.0, 0.3, 0.6, 0.9};
  std::vector<std::size_t> dims = {1, 4};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::size_t fit_steps = 2000;
  std::size_t fit_batch = 256;
  std::size_t est_samples = 4096;
  double lr = 1e-3;
  std::size_t hidden = 16;
};

struct MiSweepRow {
  double rho = 0.0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  double analytic = 0.0;  // mutual information, nats
  double bound = 0.0;     // population value of the pairwise bound, nats
  double estimate = 0.0;  // nats
  double std_err = 0.0;   // sampling error of the estimate

  double gap() const { return estimate - bound; }
};

MiSweepRow fit_and_estimate(double rho, std::size_t dim, std::uint64_t seed,
                            const MiSweepConfig& cfg);

std::vector<MiSweepRow> gaussian_sweep(const MiSweepConfig& cfg);

// random strictly-positive joints: exact CLUB must dominate the true MI
struct DiscreteSuiteResult {
  std::size_t trials = 0;
  std::size_t violations = 0;  // club < mi occurrences
  double min_gap = 0.0;        // smallest club - mi seen
  double max_gap = 0.0;
};

DiscreteSuiteResult discrete_bound_suite(std::size_t trials, std::size_t side,
                                         std::uint64_t seed);

void write_mi_report(const std::vector<MiSweepRow>& sweep, const DiscreteSuiteResult& suite,
                     const std::vector<std::string>& echo, const std::string& path);

}  // namespace disent
