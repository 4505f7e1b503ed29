#include <doctest.h>

#include <cmath>
#include <vector>

#include "recsim/numerics.hpp"
#include "recsim/rng.hpp"

using namespace recsim;

namespace {

Mat random_mat(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

double frob_diff(const Mat& a, const Mat& b) {
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      const double d = a(i, j) - b(i, j);
      s += d * d;
    }
  return std::sqrt(s);
}

void check_orthonormal_columns(const Mat& u, double tol) {
  for (int p = 0; p < u.cols(); ++p)
    for (int q = p; q < u.cols(); ++q) {
      double dot = 0.0;
      for (int i = 0; i < u.rows(); ++i) dot += u(i, p) * u(i, q);
      CHECK(std::abs(dot - (p == q ? 1.0 : 0.0)) < tol);
    }
}

}  // namespace

TEST_CASE("population covariance matches hand-evaluated values") {
  // ((1-2)(1-2) + 0 + (3-2)(3-2)) / 3 = 2/3
  const std::vector<double> a{1, 2, 3};
  CHECK(population_covariance(a, a) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  // constant xs: zero by definition
  const std::vector<double> c{5, 5}, d{7, 9};
  CHECK(population_covariance(c, d) == 0.0);
  // (0.5 * -0.5 + -0.5 * 0.5) / 2 = -0.25
  const std::vector<double> e{1, 2}, f{2, 1};
  CHECK(population_covariance(e, f) == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("covariance errors") {
  const std::vector<double> a{1, 2}, b{1}, none;
  CHECK_THROWS_AS(population_covariance(a, b), LengthMismatch);
  CHECK_THROWS_AS(population_covariance(none, none), EmptyInput);
}

TEST_CASE("pearson anchor values") {
  CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-10));
  // cov = 1/3, sigma_x = sigma_y = sqrt(2/3) -> r = 0.5
  CHECK(pearson({1, 2, 3}, {1, 3, 2}) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("pearson zero-variance input is rejected") {
  CHECK_THROWS_AS(pearson({4, 4, 4}, {1, 2, 3}), ZeroVariance);
  CHECK_THROWS_AS(pearson({1, 2, 3}, {-2, -2, -2}), ZeroVariance);
  CHECK_FALSE(maybe_pearson({4, 4, 4}, {1, 2, 3}).has_value());
}

TEST_CASE("pearson is symmetric and affine-invariant") {
  Rng rng(11);
  for (int round = 0; round < 200; ++round) {
    const int n = 2 + int(rng.below(20));
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.uniform(-10, 10);
      y[i] = rng.uniform(-10, 10);
    }
    const auto rxy = maybe_pearson(x, y);
    const auto ryx = maybe_pearson(y, x);
    REQUIRE(rxy.has_value());
    CHECK(*rxy == doctest::Approx(*ryx).epsilon(1e-12));
    CHECK(*rxy >= -1.0);
    CHECK(*rxy <= 1.0);

    const double a = 0.1 + 5.0 * rng.unit();
    const double b = rng.uniform(-20, 20);
    std::vector<double> xt(n);
    for (int i = 0; i < n; ++i) xt[i] = a * x[i] + b;
    CHECK(*maybe_pearson(xt, y) == doctest::Approx(*rxy).epsilon(1e-10));
  }
}

TEST_CASE("covariance of a vector with itself is its variance") {
  Rng rng(13);
  for (int round = 0; round < 100; ++round) {
    const int n = 1 + int(rng.below(15));
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-5, 5);
    const double var = population_covariance(x, x);
    CHECK(var >= 0.0);
    CHECK(var == doctest::Approx(population_variance(x)).epsilon(1e-14));
  }
}

TEST_CASE("svd of identity and diagonal matrices") {
  const SvdResult id = svd(Mat::identity(3));
  REQUIRE(id.sigma.size() == 3);
  for (double s : id.sigma) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

  Mat d(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  const SvdResult ds = svd(d);
  CHECK(ds.sigma[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(ds.sigma[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd reconstructs random matrices and keeps factors orthonormal") {
  Rng rng(17);
  for (int round = 0; round < 25; ++round) {
    const int m = 2 + int(rng.below(19));
    const int n = 2 + int(rng.below(8));
    const Mat a = random_mat(rng, m, n, 5.0);
    const SvdResult s = svd(a);
    CHECK(frob_diff(reconstruct(s), a) < 1e-8);
    check_orthonormal_columns(s.u, 1e-10);
    check_orthonormal_columns(s.vt.transposed(), 1e-10);
    for (std::size_t i = 1; i < s.sigma.size(); ++i) {
      CHECK(s.sigma[i] <= s.sigma[i - 1]);
      CHECK(s.sigma[i] >= 0.0);
    }
  }
}

TEST_CASE("svd handles wide matrices through the transpose") {
  Rng rng(23);
  const Mat a = random_mat(rng, 4, 11);
  const SvdResult s = svd(a);
  CHECK(s.u.rows() == 4);
  CHECK(s.vt.cols() == 11);
  REQUIRE(s.sigma.size() == 4);
  CHECK(frob_diff(reconstruct(s), a) < 1e-9);
  check_orthonormal_columns(s.u, 1e-10);
  check_orthonormal_columns(s.vt.transposed(), 1e-10);
}

TEST_CASE("singular values of the transpose form the same multiset") {
  Rng rng(29);
  for (int round = 0; round < 10; ++round) {
    const Mat a = random_mat(rng, 3 + int(rng.below(10)), 2 + int(rng.below(6)));
    const auto s1 = svd(a).sigma;
    const auto s2 = svd(a.transposed()).sigma;
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i)
      CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-9));
  }
}

TEST_CASE("svd of a rank-1 matrix completes the orthonormal basis") {
  Rng rng(31);
  Mat a(6, 4);
  std::vector<double> u(6), v(4);
  for (double& x : u) x = rng.uniform(-2, 2);
  for (double& x : v) x = rng.uniform(-2, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = u[i] * v[j];
  const SvdResult s = svd(a);
  CHECK(frob_diff(reconstruct(s), a) < 1e-10);
  check_orthonormal_columns(s.u, 1e-10);
  CHECK(s.sigma[1] < 1e-10 * s.sigma[0]);
}

TEST_CASE("svd rejects bad input and honors the sweep cap") {
  CHECK_THROWS_AS(svd(Mat(0, 0)), EmptyInput);
  Mat bad(1, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(svd(bad), Error);
  Rng rng(37);
  const Mat a = random_mat(rng, 5, 4);
  CHECK_THROWS_AS(svd(a, 0), NonConvergence);
  CHECK_NOTHROW(svd(Mat::identity(4), 0));  // already orthogonal, no sweeps needed
}

TEST_CASE("truncate_rank keeps leading triplets") {
  Mat d(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  const SvdResult s = svd(d);
  const SvdResult full = truncate_rank(s, 2);
  CHECK(full.sigma == s.sigma);
  CHECK(frob_diff(reconstruct(full), d) < 1e-12);
  const SvdResult one = truncate_rank(s, 1);
  REQUIRE(one.sigma.size() == 1);
  CHECK(one.sigma[0] == doctest::Approx(3.0));
  CHECK_THROWS_AS(truncate_rank(s, 0), RankOutOfRange);
  CHECK_THROWS_AS(truncate_rank(s, 3), RankOutOfRange);
}

TEST_CASE("rank-k truncation satisfies the tail-energy identity") {
  Rng rng(41);
  const Mat a = random_mat(rng, 10, 6, 3.0);
  const SvdResult s = svd(a);
  for (int k = 1; k <= 6; ++k) {
    const double err = frob_diff(reconstruct(truncate_rank(s, k)), a);
    double tail = 0.0;
    for (std::size_t i = k; i < s.sigma.size(); ++i) tail += s.sigma[i] * s.sigma[i];
    CHECK(err * err == doctest::Approx(tail).epsilon(1e-8).scale(1.0));
  }
}
