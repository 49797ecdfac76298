#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "fedrep/diagnostics.hpp"
#include "fedrep/rng.hpp"
#include "test_util.hpp"

namespace fedrep::diag {
namespace {

TEST(Spectrum, IdenticalRowsHaveZeroSpectrum) {
  const Mat z = Mat::Ones(10, 4) * 0.5;
  const auto r = covariance_spectrum(z);
  EXPECT_LT(r.singular_values.maxCoeff(), 1e-14);
  EXPECT_EQ(r.effective_rank, 1.0);
  EXPECT_NEAR(r.log_values[0], std::log(kLogFloor), 1e-9);
}

TEST(Spectrum, OneHotRowsSpreadEvenly) {
  Mat z = Mat::Zero(400, 4);
  for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, i % 4) = 1.0;
  const auto r = covariance_spectrum(z);
  // centred one-hot covariance has rank d - 1 with equal eigenvalues
  EXPECT_NEAR(r.effective_rank, 3.0, 1e-6);
}

TEST(Spectrum, IsotropicGaussianIsNearFullRank) {
  RngStream rng(1, 1);
  const auto r = covariance_spectrum(gaussian_matrix(rng, 2000, 8));
  EXPECT_GT(r.effective_rank, 8.0 * 0.75);
  EXPECT_LE(r.effective_rank, 8.0);
  EXPECT_NEAR(r.singular_values[0], 1.0, 0.25);
}

TEST(Spectrum, RotationAndPermutationInvariant) {
  RngStream rng(2, 2);
  const Mat z = gaussian_matrix(rng, 50, 5) * Vec::LinSpaced(5, 0.2, 2.0).asDiagonal();
  const Eigen::HouseholderQR<Mat> qr(gaussian_matrix(rng, 5, 5));
  const Mat rot = qr.householderQ();
  std::vector<Eigen::Index> order(50);
  std::iota(order.begin(), order.end(), 0);
  shuffle(std::span<Eigen::Index>(order), rng);
  Mat permuted(50, 5);
  for (Eigen::Index i = 0; i < 50; ++i) permuted.row(i) = z.row(order[static_cast<std::size_t>(i)]);

  const auto base = covariance_spectrum(z);
  EXPECT_LT((covariance_spectrum(z * rot).singular_values - base.singular_values).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((covariance_spectrum(permuted).singular_values - base.singular_values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Spectrum, RejectsDegenerateInput) {
  EXPECT_THROW(covariance_spectrum(Mat::Ones(1, 3)), Error);
  Mat z = Mat::Ones(3, 3);
  z(1, 1) = std::nan("");
  EXPECT_THROW(covariance_spectrum(z), Error);
}

TEST(EffectiveRank, Examples) {
  Vec s(4);
  s << 1, 1, 1, 1;
  EXPECT_NEAR(effective_rank(s), 4.0, 1e-12);
  s << 5, 0, 0, 0;
  EXPECT_NEAR(effective_rank(s), 1.0, 1e-12);
  EXPECT_EQ(effective_rank(Vec::Zero(3)), 1.0);
}

TEST(Knn, DuplicatePointIsClassified) {
  Mat train(2, 2);
  train << 1, 0, 0, 1;
  const std::vector<int> train_labels{0, 1};
  Mat test(1, 2);
  test << 0, 1;
  const std::vector<int> test_labels{1};
  EXPECT_EQ(knn_eval(train, train_labels, test, test_labels, 1), 1.0);
}

TEST(Knn, RandomLabelsGiveChance) {
  RngStream rng(3, 3);
  const Mat train = gaussian_matrix(rng, 400, 6), test = gaussian_matrix(rng, 400, 6);
  std::vector<int> lt(400), ls(400);
  for (auto& l : lt) l = static_cast<int>(rng.below(4));
  for (auto& l : ls) l = static_cast<int>(rng.below(4));
  const double acc = knn_eval(train, lt, test, ls, 5);
  const double sigma = std::sqrt(0.25 * 0.75 / 400.0);
  EXPECT_NEAR(acc, 0.25, 3 * sigma);
}

TEST(Knn, SeparatedClustersArePerfect) {
  RngStream rng(4, 4);
  Mat centres = Mat::Identity(3, 3) * 10.0;
  Mat train(90, 3), test(30, 3);
  std::vector<int> lt(90), ls(30);
  for (Eigen::Index i = 0; i < 90; ++i) {
    lt[static_cast<std::size_t>(i)] = static_cast<int>(i % 3);
    train.row(i) = centres.row(i % 3) + 0.1 * gaussian(rng, 3).transpose();
  }
  for (Eigen::Index i = 0; i < 30; ++i) {
    ls[static_cast<std::size_t>(i)] = static_cast<int>(i % 3);
    test.row(i) = centres.row(i % 3) + 0.1 * gaussian(rng, 3).transpose();
  }
  EXPECT_EQ(knn_eval(train, lt, test, ls, 5), 1.0);
  EXPECT_EQ(knn_eval(3.7 * train, lt, 0.01 * test, ls, 5), 1.0);
}

TEST(Knn, VoteTieGoesToSmallestClass) {
  Mat train(2, 2);
  train << 1, 0.1, 1, -0.1;
  const std::vector<int> lt{2, 1};
  Mat test(1, 2);
  test << 1, 0;
  const std::vector<int> ls{1};
  EXPECT_EQ(knn_eval(train, lt, test, ls, 2), 1.0);
}

TEST(Knn, RejectsBadInput) {
  const Mat z = Mat::Ones(3, 2);
  const std::vector<int> l{0, 1, 0};
  EXPECT_THROW(knn_eval(z, l, z, l, 4), Error);
  EXPECT_THROW(knn_eval(z, std::vector<int>{0}, z, l, 1), Error);
}

TEST(Uniformity, Examples) {
  Mat z(2, 2);
  z << 1, 0, -1, 0;
  EXPECT_DOUBLE_EQ(uniformity(z), 4.0);
  EXPECT_EQ(uniformity(Mat::Ones(5, 3)), 0.0);
}

TEST(Rates, ZeroDirectionGivesZeroRates) {
  const std::vector<ParamVector> thetas{ParamVector::Ones(3), -ParamVector::Ones(3)};
  const auto dev = agg::deviations(ParamVector::Zero(3), thetas);
  agg::UpdateDirection d{ParamVector::Zero(3), 0.0};
  const auto r = deviation_rate_report(dev, d, 1.0);
  EXPECT_EQ(r.first_order.norm(), 0.0);
  EXPECT_EQ(r.exact.norm(), 0.0);
}

TEST(Rates, FirstOrderErrorIsQuadraticInStep) {
  RngStream rng(5, 5);
  const ParamVector theta = gaussian(rng, 5);
  std::vector<ParamVector> thetas;
  for (int k = 0; k < 3; ++k) thetas.push_back(theta + gaussian(rng, 5));
  const auto dev = agg::deviations(theta, thetas);
  const agg::UpdateDirection d{gaussian(rng, 5).normalized(), 1.0};

  auto error_at = [&](double eta) {
    const auto r = deviation_rate_report(dev, d, eta);
    double worst = 0.0;
    for (std::size_t k = 0; k < thetas.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      const double u_next = (theta - eta * d.d - thetas[k]).squaredNorm();
      const double exact = (dev.u[i] - u_next) / (dev.u[i] + dev.eps);
      EXPECT_NEAR(exact, r.exact[i], 1e-12);
      worst = std::max(worst, std::abs(r.first_order[i] - exact));
    }
    return worst;
  };
  const double ratio = error_at(0.1) / error_at(0.05);
  EXPECT_GE(ratio, 3.0);
  EXPECT_LE(ratio, 5.0);
}

TEST(Rates, SymmetricClientsHaveEqualRates) {
  const ParamVector v = ParamVector::LinSpaced(4, -1.0, 2.0);
  const std::vector<ParamVector> thetas{v, -v};
  const auto dev = agg::deviations(ParamVector::Zero(4), thetas);
  const ParamVector w = ParamVector::Unit(4, 1) - ParamVector::Unit(4, 2);
  // a direction orthogonal to v keeps both deviations moving together
  const ParamVector orth = w - (w.dot(v) / v.squaredNorm()) * v;
  const auto r = deviation_rate_report(dev, {orth.normalized(), 1.0}, 0.5);
  EXPECT_NEAR(r.exact[0], r.exact[1], 1e-14);
  EXPECT_NEAR(r.first_order[0], r.first_order[1], 1e-14);
  EXPECT_THROW(deviation_rate_report(dev, {ParamVector::Zero(3), 0.0}, 1.0), Error);
}

TEST(Lemma, Examples) {
  const std::vector<ParamVector> thetas{ParamVector::Constant(1, 0.1), ParamVector::Constant(1, -0.1)};
  const Vec p = Vec::Constant(2, 0.5);
  const auto c = lemma1_check(p, ParamVector::Zero(1), thetas, 0.1, 3, 1.0);
  EXPECT_NEAR(c.lhs, 0.01, 1e-15);
  EXPECT_NEAR(c.rhs, 4 * 0.01 * 4 * 1.0, 1e-15);
  EXPECT_TRUE(c.ok);

  const auto single = lemma1_check(p, ParamVector::Zero(1), thetas, 0.1, 1, 1.0);
  EXPECT_EQ(single.rhs, 0.0);
  EXPECT_FALSE(single.ok);
  EXPECT_THROW(lemma1_check(Vec::Ones(3), ParamVector::Zero(1), thetas, 0.1, 2, 1.0), Error);
}

}  // namespace
}  // namespace fedrep::diag
