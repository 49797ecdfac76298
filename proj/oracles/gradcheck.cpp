#include <cmath>

#include "fedrep/aggregator.hpp"
#include "fedrep/oracles.hpp"
#include "fedrep/rng.hpp"
#include "fedrep/ssl.hpp"
#include "fedrep/uot.hpp"

namespace fedrep::oracle {

namespace {

// Objective with the plans held fixed, written out directly.
double frozen_objective(const ssl::Encoder& enc, const ssl::ViewPair& views, const Mat& s1, const Mat& s2,
                        const Mat& pi1, const Mat& pi2, double lambda_u, double tau) {
  const Mat z1 = ssl::forward(enc, views.x1);
  const Mat z2 = ssl::forward(enc, views.x2);
  double align = 0.0;
  for (Eigen::Index i = 0; i < z1.rows(); ++i) align += (z1.row(i) - z2.row(i)).squaredNorm();
  align /= static_cast<double>(z1.rows());
  auto transport = [&](const Mat& z, const Mat& s, const Mat& pi) {
    Mat cost(z.rows(), s.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index j = 0; j < s.rows(); ++j) cost(i, j) = (z.row(i) - s.row(j)).squaredNorm();
    const Vec a = Vec::Constant(z.rows(), 1.0 / static_cast<double>(z.rows()));
    const Vec b = Vec::Constant(s.rows(), 1.0 / static_cast<double>(s.rows()));
    return dense_uot_objective(cost, a, b, tau, tau, pi);
  };
  return align + lambda_u * (transport(z1, s1, pi1) + transport(z2, s2, pi2));
}

}  // namespace

GradCheck ssl_gradcheck(std::uint64_t seed, double lambda_u) {
  constexpr double kTau = 0.8;
  RngStream rng(seed, 0xC4EC);
  const ssl::EncoderDims dims{6, 5, 3};
  const ssl::Encoder enc = ssl::Encoder::init(dims, rng);
  const Mat x = gaussian_matrix(rng, 4, 6);
  const ssl::ViewPair views = ssl::augment(x, rng.split(9), 0.5, 0.0);
  // Anchors close to the embeddings so the plans carry mass.
  const Mat z1 = ssl::forward(enc, views.x1);
  const Mat z2 = ssl::forward(enc, views.x2);
  Mat s1 = z1 + 0.05 * gaussian_matrix(rng, 4, 3);
  Mat s2 = z2 + 0.05 * gaussian_matrix(rng, 4, 3);
  s1 = s1.rowwise().normalized().eval();
  s2 = s2.rowwise().normalized().eval();

  const auto lg = ssl::total_loss_and_grad(enc, views, s1, s2, lambda_u, kTau, kTau);
  const Mat pi1 = lg.plan1.pi, pi2 = lg.plan2.pi;
  auto f = [&](const Vec& params) {
    return frozen_objective(ssl::Encoder(dims, params), views, s1, s2, pi1, pi2, lambda_u, kTau);
  };
  const Vec fd = central_diff(f, enc.params(), 1e-5);
  return {relative_error(lg.grad, fd), enc.params().size()};
}

GradCheck deviation_gradcheck(std::uint64_t seed) {
  RngStream rng(seed, 0xDE71);
  const Eigen::Index m = 7;
  const Vec theta_g = gaussian(rng, m);
  std::vector<ParamVector> thetas;
  for (int k = 0; k < 3; ++k) thetas.push_back(theta_g + 0.5 * gaussian(rng, m));
  const auto dev = agg::deviations(theta_g, thetas);
  double worst = 0.0;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    auto f = [&](const Vec& t) { return std::log((t - thetas[k]).squaredNorm() + dev.eps); };
    const Vec fd = central_diff(f, theta_g, 1e-6);
    worst = std::max(worst, relative_error(dev.grad_log_u.row(static_cast<Eigen::Index>(k)).transpose(), fd));
  }
  return {worst, m};
}

}  // namespace fedrep::oracle
