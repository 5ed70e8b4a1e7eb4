#pragma once

#include "disent/model.hpp"

namespace disent {

// Sample-based MI upper-bound estimate over positive pairs (i, i) against all
// pairs (i, j):  (1/N^2) sum_i sum_j [ log q(pair_ii) - log q(pair_ij) ].
// The j = i terms are included; they cancel exactly.
struct MiEstimate {
  double value = 0.0;  // nats
  std::size_t n_pairs = 0;
  // standard error of the mean of per-row contributions; filled by the
  // value-only paths, zero elsewhere
  double std_err = 0.0;
};

// graph version: gradients flow to the embeddings, never to q (its parameters
// enter frozen). Used inside the total training objective.
Tensor vclub_embedding_graph(const Tensor& x_s, const Tensor& x_d, const VariationalGaussian& q);
Tensor vclub_label_graph(const Tensor& x, const std::vector<std::size_t>& y,
                         const VariationalCategorical& q);

MiEstimate vclub_embedding(const Tensor& x_s, const Tensor& x_d, const VariationalGaussian& q);
MiEstimate vclub_label(const Tensor& x, const std::vector<std::size_t>& y,
                       const VariationalCategorical& q);

// value-only O(N*D) path for large-sample estimates; no graph is built
MiEstimate vclub_embedding_value(const std::vector<double>& x_s, const std::vector<double>& x_d,
                                 std::size_t n, std::size_t d, const VariationalGaussian& q);
MiEstimate vclub_label_value(const std::vector<double>& x, std::size_t n, std::size_t d,
                             const std::vector<std::size_t>& y, const VariationalCategorical& q);

// ---------------------------------------------------------------------------
// oracles

// MI of a jointly Gaussian pair with per-dimension correlation rho:
// -1/2 sum_k log(1 - rho_k^2)
double analytic_gaussian_mi(const std::vector<double>& rho);

// Population value of the pairwise log-ratio bound at the true conditional
// for the same pair: sum_k rho_k^2 / (1 - rho_k^2). Exceeds the MI except at
// independence; the difference is the Jensen gap of the bound.
double analytic_gaussian_club(const std::vector<double>& rho);

// joint probability table p[a][b]; rows must be equal length, entries >= 0,
// total 1 within 1e-12
using JointTable = std::vector<std::vector<double>>;

void validate_joint(const JointTable& p);

// sum p(a,b) log [ p(a,b) / (p(a) p(b)) ], with 0 log 0 := 0
double discrete_mi(const JointTable& p);

// E_{p(x,y)}[log p(y|x)] - E_{p(x)p(y)}[log p(y|x)] by exact enumeration with
// the true conditional; a zero conditional hit by the second expectation makes
// the bound infinite.
struct ClubResult {
  double value = 0.0;
  bool infinite = false;
};

ClubResult club_exact_discrete(const JointTable& p);

}  // namespace disent
