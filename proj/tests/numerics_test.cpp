#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "fedrep/numerics.hpp"
#include "fedrep/oracles.hpp"
#include "fedrep/rng.hpp"
#include "test_util.hpp"

namespace fedrep {
namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

TEST(SolveSpd, Identity) {
  const Vec x = solve_spd(Mat::Identity(2, 2), v2(3, 4));
  EXPECT_NEAR(x[0], 3.0, 1e-14);
  EXPECT_NEAR(x[1], 4.0, 1e-14);
}

TEST(SolveSpd, Diagonal) {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 2;
  a(1, 1) = 4;
  const Vec x = solve_spd(a, v2(2, 4));
  EXPECT_NEAR(x[0], 1.0, 1e-14);
  EXPECT_NEAR(x[1], 1.0, 1e-14);
}

TEST(SolveSpd, TwoByTwoMatchesClosedFormInverse) {
  Mat a(2, 2);
  a << 2, 1, 1, 2;
  // inverse = (1/det) [[d, -b], [-c, a]]
  const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  Mat inv(2, 2);
  inv << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
  inv /= det;
  const Vec expected = inv * v2(3, 3);
  const Vec x = solve_spd(a, v2(3, 3));
  EXPECT_NEAR(expected[0], 1.0, 1e-14);
  EXPECT_NEAR(x[0], expected[0], 1e-12);
  EXPECT_NEAR(x[1], expected[1], 1e-12);
}

TEST(SolveSpd, ResidualBoundOnRandomInstances) {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(64));
    const Mat a = testing::random_spd(rng, n);
    const Vec rhs = gaussian(rng, static_cast<std::size_t>(n));
    const Vec x = solve_spd(a, rhs);
    EXPECT_LE((a * x - rhs).norm(), 1e-8 * (1.0 + rhs.norm())) << "n=" << n;
  }
}

TEST(SolveSpd, SemidefiniteConsistentSystemUsesFallback) {
  // Rank one, rhs in the range: LLT fails, LDLT or the ridge recovers.
  Mat a(2, 2);
  a << 1, 1, 1, 1;
  const Vec x = solve_spd(a, v2(2, 2));
  EXPECT_LE((a * x - v2(2, 2)).norm(), 1e-8 * (1.0 + std::sqrt(8.0)));
}

TEST(SolveSpd, Errors) {
  Mat a(2, 2);
  a << 1, 1, 1, 1;
  try {
    solve_spd(a, v2(1, 0));
    FAIL() << "expected Singular";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSingular);
  }
  Mat bad = Mat::Identity(2, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    solve_spd(bad, v2(1, 0));
    FAIL() << "expected NonFinite";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNonFinite);
  }
  Mat asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(solve_spd(asym, v2(1, 1)), Error);
  EXPECT_THROW(solve_spd(Mat::Identity(2, 2), Vec::Ones(3)), Error);
}

TEST(SvdValues, Examples) {
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  Vec s = svd_values(d);
  EXPECT_NEAR(s[0], 3, 1e-14);
  EXPECT_NEAR(s[1], 1, 1e-14);

  s = svd_values(Mat::Zero(2, 2));
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 0.0);

  Mat m(2, 2);
  m << 0, 2, 0, 0;
  // M^T M = diag(0, 4) -> singular values (2, 0)
  const Vec ev = oracle::jacobi_eigenvalues(m.transpose() * m);
  s = svd_values(m);
  EXPECT_NEAR(s[0], std::sqrt(ev[0]), 1e-14);
  EXPECT_NEAR(s[0], 2.0, 1e-14);
  EXPECT_NEAR(s[1], 0.0, 1e-14);
}

TEST(SvdValues, MatchesJacobiEigenOracle) {
  RngStream rng(5, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto r = static_cast<Eigen::Index>(1 + rng.below(16));
    const auto c = static_cast<Eigen::Index>(1 + rng.below(16));
    const Mat m = gaussian_matrix(rng, static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    const Vec s = svd_values(m);
    const Vec ev = oracle::jacobi_eigenvalues(m.transpose() * m);
    ASSERT_EQ(s.size(), std::min(r, c));
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      EXPECT_NEAR(s[i], std::sqrt(std::max(0.0, ev[i])), 1e-8) << r << "x" << c << " i=" << i;
      if (i > 0) EXPECT_LE(s[i], s[i - 1]);
      EXPECT_GE(s[i], 0.0);
    }
  }
}

TEST(SvdValues, RejectsNonFinite) {
  Mat m = Mat::Ones(2, 2);
  m(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(svd_values(m), Error);
}

TEST(Rng, SameStreamIsDeterministic) {
  RngStream a(42, 7), b(42, 7);
  const Vec x = gaussian(a, 100), y = gaussian(b, 100);
  EXPECT_EQ(x, y);
}

TEST(Rng, DifferentStreamsDiffer) {
  RngStream a(42, 7), b(42, 8);
  EXPECT_NE(gaussian(a, 10), gaussian(b, 10));
  RngStream base(42, 7);
  RngStream s1 = base.split(1), s2 = base.split(2);
  EXPECT_NE(gaussian(s1, 10), gaussian(s2, 10));
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  RngStream a(1, 1), b(1, 1);
  (void)a.split(5);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, GaussianMoments) {
  RngStream rng(2024, 3);
  const Vec x = gaussian(rng, 100000);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / static_cast<double>(x.size() - 1);
  EXPECT_LT(std::abs(mean), 0.02);
  EXPECT_LT(std::abs(var - 1.0), 0.05);
}

TEST(Rng, GammaMeanMatchesShape) {
  RngStream rng(9, 9);
  for (double shape : {0.1, 0.5, 1.0, 3.0}) {
    double acc = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) acc += rng.gamma(shape);
    // sd of the mean is sqrt(shape / n)
    EXPECT_NEAR(acc / n, shape, 5.0 * std::sqrt(shape / n)) << "shape " << shape;
  }
}

TEST(Rng, BelowIsInRange) {
  RngStream rng(3, 3);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
  EXPECT_EQ(rng.below(1), 0u);
}

}  // namespace
}  // namespace fedrep
