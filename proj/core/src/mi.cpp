#include "disent/mi.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace disent {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

std::vector<std::size_t> iota_idx(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}
}  // namespace

Tensor vclub_embedding_graph(const Tensor& x_s, const Tensor& x_d, const VariationalGaussian& q) {
  if (x_s.shape() != x_d.shape()) throw ShapeError("vclub_embedding: shape mismatch");
  const std::size_t n = x_s.rows();
  auto [mu, logvar] = q.forward(x_s, /*frozen=*/true);
  // pairwise[i][j] = log q(x_d_j | x_s_i), expanded so no [N x N x D] tensor
  // is ever formed:
  //   -1/2 sum_k [ log 2 pi + logvar_ik ] - sum_k r_ik (x_d_jk - mu_ik)^2,
  //   r = 1 / (2 sigma^2)
  Tensor r = (logvar * -1.0).exp() * 0.5;
  Tensor quad = matmul_nt(r, x_d.square()) + matmul_nt((mu * r) * -2.0, x_d);
  Tensor row_const =
      ((logvar * -0.5) + (-0.5 * kLog2Pi)).row_sum() - (r * mu.square()).row_sum();
  Tensor pairwise = add_col(quad * -1.0, row_const);
  Tensor diag = pick(pairwise, iota_idx(n));
  return add_col(pairwise * -1.0, diag).mean();
}

Tensor vclub_label_graph(const Tensor& x, const std::vector<std::size_t>& y,
                         const VariationalCategorical& q) {
  const std::size_t n = x.rows();
  if (y.size() != n) throw ShapeError("vclub_label: one label per row required");
  Tensor logp = q.logits(x, /*frozen=*/true).log_softmax();
  Tensor pairwise = take_cols(logp, y);          // [i][j] = log q(y_j | x_i)
  Tensor diag = pick(pairwise, iota_idx(n));
  return add_col(pairwise * -1.0, diag).mean();
}

MiEstimate vclub_embedding(const Tensor& x_s, const Tensor& x_d, const VariationalGaussian& q) {
  return {vclub_embedding_graph(x_s.detached(), x_d.detached(), q).item(), x_s.rows()};
}

MiEstimate vclub_label(const Tensor& x, const std::vector<std::size_t>& y,
                       const VariationalCategorical& q) {
  return {vclub_label_graph(x.detached(), y, q).item(), x.rows()};
}

MiEstimate vclub_embedding_value(const std::vector<double>& x_s, const std::vector<double>& x_d,
                                 std::size_t n, std::size_t d, const VariationalGaussian& q) {
  if (x_s.size() != n * d || x_d.size() != n * d) {
    throw ShapeError("vclub_embedding_value: buffer size mismatch");
  }
  auto [mu_t, lv_t] = q.forward(Tensor::from({n, d}, x_s));
  const auto& mu = mu_t.values();
  const auto& lv = lv_t.values();

  // sufficient statistics of the negative batch per dimension
  std::vector<double> sum_y(d, 0.0), sum_y2(d, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < d; ++k) {
      const double v = x_d[j * d + k];
      sum_y[k] += v;
      sum_y2[k] += v * v;
    }

  const double nn = static_cast<double>(n);
  double total = 0.0, total2 = 0.0;
  double sum_base = 0.0;
  std::vector<double> sum_r(d, 0.0), sum_rm(d, 0.0), sum_rm2(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double positive = 0.0, negative = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double m = mu[i * d + k];
      const double l = lv[i * d + k];
      const double r = 0.5 * std::exp(-l);
      const double base = -0.5 * (kLog2Pi + l);
      const double diff = x_d[i * d + k] - m;
      positive += base - r * diff * diff;
      // sum over j of -r (y_jk - m)^2 collapses to the batch moments
      negative += nn * base - r * (sum_y2[k] - 2.0 * m * sum_y[k] + nn * m * m);
      sum_base += base;
      sum_r[k] += r;
      sum_rm[k] += r * m;
      sum_rm2[k] += r * m * m;
    }
    const double row = positive - negative / nn;
    total += row;
    total2 += row * row;
  }
  const double mean = total / nn;
  const double row_var = total2 / nn - mean * mean;

  // column projection: variance across j of the i-averaged log density
  double col_sum = 0.0, col_sum2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double e = sum_base;
    for (std::size_t k = 0; k < d; ++k) {
      const double v = x_d[j * d + k];
      e -= sum_r[k] * v * v - 2.0 * sum_rm[k] * v + sum_rm2[k];
    }
    e /= nn;
    col_sum += e;
    col_sum2 += e * e;
  }
  const double col_mean = col_sum / nn;
  const double col_var = col_sum2 / nn - col_mean * col_mean;

  const double var = (row_var > 0.0 ? row_var : 0.0) + (col_var > 0.0 ? col_var : 0.0);
  return {mean, n, std::sqrt(var / nn)};
}

MiEstimate vclub_label_value(const std::vector<double>& x, std::size_t n, std::size_t d,
                             const std::vector<std::size_t>& y, const VariationalCategorical& q) {
  if (x.size() != n * d || y.size() != n) {
    throw ShapeError("vclub_label_value: buffer size mismatch");
  }
  Tensor logp = q.logits(Tensor::from({n, d}, x)).log_softmax();
  const auto& lp = logp.values();
  const std::size_t c = logp.cols();
  std::vector<double> label_count(c, 0.0);
  for (std::size_t yy : y) {
    if (yy >= c) throw ConfigError("vclub_label_value: label out of range");
    label_count[yy] += 1.0;
  }
  const double nn = static_cast<double>(n);
  double total = 0.0, total2 = 0.0;
  std::vector<double> class_mean(c, 0.0);  // mean over i of log q(k | x_i)
  for (std::size_t i = 0; i < n; ++i) {
    double negative = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      negative += label_count[k] * lp[i * c + k];
      class_mean[k] += lp[i * c + k] / nn;
    }
    const double row = lp[i * c + y[i]] - negative / nn;
    total += row;
    total2 += row * row;
  }
  const double mean = total / nn;
  const double row_var = total2 / nn - mean * mean;

  // column projection over the empirical label distribution
  double col_mean = 0.0, col_mean2 = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const double w = label_count[k] / nn;
    col_mean += w * class_mean[k];
    col_mean2 += w * class_mean[k] * class_mean[k];
  }
  const double col_var = col_mean2 - col_mean * col_mean;

  const double var = (row_var > 0.0 ? row_var : 0.0) + (col_var > 0.0 ? col_var : 0.0);
  return {mean, n, std::sqrt(var / nn)};
}

double analytic_gaussian_mi(const std::vector<double>& rho) {
  double mi = 0.0;
  for (double r : rho) {
    if (std::abs(r) >= 1.0) throw ConfigError("analytic_gaussian_mi: |rho| must be < 1");
    mi += -0.5 * std::log(1.0 - r * r);
  }
  return mi;
}

double analytic_gaussian_club(const std::vector<double>& rho) {
  double club = 0.0;
  for (double r : rho) {
    if (std::abs(r) >= 1.0) throw ConfigError("analytic_gaussian_club: |rho| must be < 1");
    club += r * r / (1.0 - r * r);
  }
  return club;
}

void validate_joint(const JointTable& p) {
  if (p.empty() || p[0].empty()) throw ConfigError("joint table: empty");
  const std::size_t cols = p[0].size();
  double total = 0.0;
  for (const auto& row : p) {
    if (row.size() != cols) throw ConfigError("joint table: ragged rows");
    for (double v : row) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("joint table: invalid entry");
      total += v;
    }
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("joint table: does not sum to 1");
}

double discrete_mi(const JointTable& p) {
  validate_joint(p);
  const std::size_t a_n = p.size(), b_n = p[0].size();
  std::vector<double> pa(a_n, 0.0), pb(b_n, 0.0);
  for (std::size_t a = 0; a < a_n; ++a)
    for (std::size_t b = 0; b < b_n; ++b) {
      pa[a] += p[a][b];
      pb[b] += p[a][b];
    }
  double mi = 0.0;
  for (std::size_t a = 0; a < a_n; ++a)
    for (std::size_t b = 0; b < b_n; ++b)
      if (p[a][b] > 0.0) mi += p[a][b] * std::log(p[a][b] / (pa[a] * pb[b]));
  return mi;
}

ClubResult club_exact_discrete(const JointTable& p) {
  validate_joint(p);
  const std::size_t a_n = p.size(), b_n = p[0].size();
  std::vector<double> pa(a_n, 0.0), pb(b_n, 0.0);
  for (std::size_t a = 0; a < a_n; ++a)
    for (std::size_t b = 0; b < b_n; ++b) {
      pa[a] += p[a][b];
      pb[b] += p[a][b];
    }
  double positive = 0.0, negative = 0.0;
  for (std::size_t a = 0; a < a_n; ++a) {
    if (pa[a] == 0.0) continue;  // conditional undefined but carries no weight
    for (std::size_t b = 0; b < b_n; ++b) {
      const double cond = p[a][b] / pa[a];
      if (p[a][b] > 0.0) positive += p[a][b] * std::log(cond);
      const double w = pa[a] * pb[b];
      if (w > 0.0) {
        if (cond == 0.0) return {std::numeric_limits<double>::infinity(), true};
        negative += w * std::log(cond);
      }
    }
  }
  return {positive - negative, false};
}

}  // namespace disent
