#include <cmath>

#include "disent/rng.hpp"
#include "disent/tensor.hpp"
#include "doctest.h"

using namespace disent;

namespace {

Tensor randn(Shape shape, Rng& rng, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.normal();
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

TEST_CASE("tensor construction and shape checks") {
  Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.numel() == 6);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::from({1}, {std::nan("")}), NumericError);
  CHECK_THROWS_AS(Tensor::from({0}, {}), ShapeError);
  CHECK(Tensor::scalar(3.5).item() == 3.5);
}

TEST_CASE("non-finite op results are rejected") {
  Tensor z = Tensor::from({1}, {0.0});
  CHECK_THROWS_AS(z.log(), NumericError);
  Tensor big = Tensor::from({1}, {1e308});
  CHECK_THROWS_AS(big * 1e10, NumericError);
}

TEST_CASE("elementwise arithmetic values") {
  Tensor a = Tensor::from({3}, {-2, 0, 3});
  Tensor b = Tensor::from({3}, {1, 2, 3});
  CHECK((a + b).values() == std::vector<double>{-1, 2, 6});
  CHECK((a - b).values() == std::vector<double>{-3, -2, 0});
  CHECK((a * b).values() == std::vector<double>{-2, 0, 9});
  CHECK((a * 2.0).values() == std::vector<double>{-4, 0, 6});
  CHECK((a + 1.0).values() == std::vector<double>{-1, 1, 4});
  CHECK(a.relu().values() == std::vector<double>{0, 0, 3});
  CHECK(a.relu().relu().values() == a.relu().values());
  CHECK(a.clamp(-1, 1).values() == std::vector<double>{-1, 0, 1});
}

TEST_CASE("relu gradient mask") {
  Tensor x = Tensor::from({3}, {-2, 0, 3}, true);
  x.relu().sum().backward();
  CHECK(x.grad() == std::vector<double>{0, 0, 1});
}

TEST_CASE("backward: sum gives ones, quadratic gives x") {
  Rng rng(1);
  Tensor x = randn({4, 3}, rng);
  x.sum().backward();
  for (double g : x.grad()) CHECK(g == 1.0);

  ((x * x).sum() * 0.5).backward();
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == doctest::Approx(x.values()[i]));
}

TEST_CASE("backward rejects non-scalar loss and grad-free graphs") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  CHECK_THROWS_AS((x * 2.0).backward(), ShapeError);
  Tensor c = Tensor::from({2}, {1, 2}, false);
  CHECK_THROWS_AS(c.sum().backward(), ShapeError);
}

TEST_CASE("backward overwrites grads across passes") {
  Tensor x = Tensor::from({2}, {3, 4}, true);
  Tensor loss = x.sum();
  loss.backward();
  loss.backward();
  CHECK(x.grad() == std::vector<double>{1, 1});
}

TEST_CASE("backward is deterministic bitwise") {
  Rng rng(2);
  Tensor x = randn({5, 4}, rng);
  Tensor w = randn({3, 4}, rng);
  auto run = [&] {
    Tensor loss = (matmul_nt(x, w).softmax().square().sum() * 0.25) + (x.exp().mean() * 0.5);
    loss.backward();
    return std::make_pair(x.grad(), w.grad());
  };
  auto [gx1, gw1] = run();
  auto [gx2, gw2] = run();
  CHECK(gx1 == gx2);
  CHECK(gw1 == gw2);
}

TEST_CASE("matmul values and shapes") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c = matmul(a, b);
  CHECK(c.values() == std::vector<double>{58, 64, 139, 154});
  Tensor bt = Tensor::from({2, 3}, {7, 9, 11, 8, 10, 12});
  CHECK(matmul_nt(a, bt).values() == c.values());
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("softmax contract examples") {
  Tensor z = Tensor::from({1, 3}, {0, 0, 0});
  auto uniform = z.softmax().values();
  for (double p : uniform) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-12));

  Tensor big = Tensor::from({1, 2}, {1000, 0});
  auto p = big.softmax().values();
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(0.0));

  Rng rng(3);
  Tensor logits = randn({6, 5}, rng, false);
  auto probs = logits.softmax().values();
  for (std::size_t i = 0; i < 6; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 5; ++j) row += probs[i * 5 + j];
    CHECK(std::abs(row - 1.0) <= 1e-12);
  }
  auto shifted = (logits + 17.25).softmax().values();
  for (std::size_t i = 0; i < probs.size(); ++i) CHECK(std::abs(probs[i] - shifted[i]) <= 1e-12);

  auto lp = logits.log_softmax().values();
  for (std::size_t i = 0; i < lp.size(); ++i)
    CHECK(lp[i] == doctest::Approx(std::log(probs[i])).epsilon(1e-10));
}

TEST_CASE("reductions and broadcasts") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(a.row_sum().values() == std::vector<double>{6, 15});
  CHECK(a.col_sum().values() == std::vector<double>{5, 7, 9});
  CHECK(a.col_mean().values() == std::vector<double>{2.5, 3.5, 4.5});
  CHECK(a.mean().item() == doctest::Approx(3.5));

  Tensor v3 = Tensor::from({3}, {10, 20, 30});
  CHECK(add_row(a, v3).values() == std::vector<double>{11, 22, 33, 14, 25, 36});
  CHECK(mul_row(a, v3).values() == std::vector<double>{10, 40, 90, 40, 100, 180});
  Tensor v2 = Tensor::from({2}, {1, -1});
  CHECK(add_col(a, v2).values() == std::vector<double>{2, 3, 4, 3, 4, 5});
  CHECK(mul_col(a, v2).values() == std::vector<double>{1, 2, 3, -4, -5, -6});
  CHECK_THROWS_AS(add_row(a, v2), ShapeError);

  Tensor s = Tensor::scalar(2.0, true);
  CHECK(mul_scalar(a, s).values() == std::vector<double>{2, 4, 6, 8, 10, 12});
  CHECK(add_scalar(a, s).values() == std::vector<double>{3, 4, 5, 6, 7, 8});
}

TEST_CASE("indexed selection") {
  Tensor a = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  CHECK(take_rows(a, {2, 0}).values() == std::vector<double>{5, 6, 1, 2});
  CHECK(pick(a, {1, 0, 1}).values() == std::vector<double>{2, 3, 6});
  CHECK(take_cols(a, {1, 1, 0}).values() == std::vector<double>{2, 2, 1, 4, 4, 3, 6, 6, 5});

  pick(a, {1, 0, 1}).sum().backward();
  CHECK(a.grad() == std::vector<double>{0, 1, 1, 0, 0, 1});

  take_rows(a, {0, 0, 1}).sum().backward();
  CHECK(a.grad() == std::vector<double>{2, 2, 1, 1, 0, 0});
}

TEST_CASE("where_mask selects and routes gradients") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  Tensor b = Tensor::from({2, 2}, {10, 20, 30, 40}, true);
  std::vector<double> mask{1, 0, 0, 1};
  Tensor c = where_mask(mask, a, b);
  CHECK(c.values() == std::vector<double>{1, 20, 30, 4});
  c.sum().backward();
  CHECK(a.grad() == std::vector<double>{1, 0, 0, 1});
  CHECK(b.grad() == std::vector<double>{0, 1, 1, 0});
}

TEST_CASE("l2_normalize_rows") {
  Tensor a = Tensor::from({2, 2}, {3, 4, 0, 2});
  auto v = l2_normalize_rows(a).values();
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(0.8));
  CHECK(v[2] == doctest::Approx(0.0));
  CHECK(v[3] == doctest::Approx(1.0));
  CHECK_THROWS_AS(l2_normalize_rows(Tensor::from({1, 2}, {0, 0})), NumericError);
}

TEST_CASE("detached cuts the graph") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor d = (x * 3.0).detached();
  CHECK_FALSE(d.requires_grad());
  CHECK(d.values() == std::vector<double>{3, 6});
}

TEST_CASE("values_mut restricted to leaves") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor y = x * 2.0;
  CHECK_THROWS_AS(y.values_mut(), ShapeError);
  x.values_mut()[0] = 5.0;
  CHECK(x.values()[0] == 5.0);
}

TEST_CASE("finite_diff_check: sum of squares at p = [1, 2]") {
  Tensor p = Tensor::from({2}, {1, 2}, true);
  auto f = [&] { return (p * p).sum(); };
  f().backward();
  CHECK(p.grad()[0] == doctest::Approx(2.0));
  CHECK(p.grad()[1] == doctest::Approx(4.0));
  auto res = finite_diff_check(f, {{"p", p}});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("finite_diff_check: constant function") {
  Tensor p = Tensor::from({2}, {1, 2}, true);
  Tensor c = Tensor::from({1}, {7.0});
  auto f = [&] { return (p.sum() * 0.0) + add_scalar(c, Tensor::scalar(0.0)).sum(); };
  auto res = finite_diff_check(f, {{"p", p}});
  CHECK(res.max_rel_err < 1e-8);
}

TEST_CASE("finite_diff_check over every primitive in one composed graph") {
  Rng rng(4);
  Tensor a = randn({4, 3}, rng);
  Tensor b = randn({4, 3}, rng);
  Tensor w = randn({5, 3}, rng);
  Tensor rowv = randn({3}, rng);
  Tensor colv = randn({4}, rng);
  Tensor s = Tensor::scalar(0.7, true);
  std::vector<double> mask(12);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = i % 3 == 0 ? 1.0 : 0.0;

  auto f = [&] {
    Tensor m = matmul_nt(a, w);                     // [4 x 5]
    Tensor soft = m.softmax().square().row_sum();   // [4]
    Tensor lsm = m.log_softmax().mean();
    Tensor mixed = where_mask(mask, a * b, a - b);
    Tensor br = add_row(mul_row(mixed, rowv), rowv);
    Tensor bc = add_col(mul_col(br, colv), colv);
    Tensor sc = add_scalar(mul_scalar(bc, s), s);
    Tensor ew = (sc.clamp(-2.0, 2.0).exp() + (sc.square() + 1.0).log()).sum();
    Tensor norm = l2_normalize_rows(a).sum();
    Tensor sel = pick(m, {0, 2, 4, 1}).mean() + take_rows(m, {1, 3}).sum() +
                 take_cols(m, {0, 3}).mean();
    Tensor pw = (b.square() + 1.0).pow(0.3).col_mean().sum() + b.relu().col_sum().mean();
    return ew * 1e-2 + soft.sum() + lsm + norm + sel + pw + matmul(m, w).mean();
  };
  auto res = finite_diff_check(
      f, {{"a", a}, {"b", b}, {"w", w}, {"rowv", rowv}, {"colv", colv}, {"s", s}});
  CAPTURE(res.worst_coord);
  CHECK(res.max_rel_err < 1e-4);
}
