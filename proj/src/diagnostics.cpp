#include "fedrep/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fedrep/kernels.hpp"

namespace fedrep::diag {

using Index = Eigen::Index;

double effective_rank(const Vec& singular_values) {
  const double total = singular_values.sum();
  if (!(total > 0.0)) return 1.0;
  double entropy = 0.0;
  for (Index i = 0; i < singular_values.size(); ++i) {
    const double p = singular_values[i] / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  const double rank = std::exp(entropy);
  return std::clamp(rank, 1.0, static_cast<double>(std::max<Index>(1, singular_values.size())));
}

SpectrumReport covariance_spectrum(const Mat& z) {
  if (z.rows() < 2) throw Error(ErrorKind::kDimMismatch, "covariance_spectrum: need at least two rows");
  require_finite(z, "embeddings");
  SpectrumReport r;
  const Vec all = svd_values(kernels::covariance(z));
  const Index keep = std::min<Index>(all.size(), static_cast<Index>(kMaxSpectrum));
  r.singular_values = all.head(keep);
  r.log_values = r.singular_values.cwiseMax(kLogFloor).array().log().matrix();
  r.effective_rank = effective_rank(r.singular_values);
  return r;
}

double knn_eval(const Mat& train_z, std::span<const int> train_labels, const Mat& test_z,
                std::span<const int> test_labels, int k) {
  if (train_z.rows() == 0 || test_z.rows() == 0) throw Error(ErrorKind::kEmptyInput, "knn_eval: empty split");
  if (static_cast<std::size_t>(train_z.rows()) != train_labels.size() ||
      static_cast<std::size_t>(test_z.rows()) != test_labels.size()) {
    throw Error(ErrorKind::kDimMismatch, "knn_eval: label count differs from row count");
  }
  if (k < 1 || k > train_z.rows()) throw Error(ErrorKind::kDimMismatch, "knn_eval: k outside [1, train size]");

  const int num_classes = 1 + std::max(*std::max_element(train_labels.begin(), train_labels.end()),
                                       *std::max_element(test_labels.begin(), test_labels.end()));
  const Mat sim = kernels::cosine_similarity(test_z, train_z);
  const Index n_test = test_z.rows(), n_train = train_z.rows();
  std::vector<int> correct(static_cast<std::size_t>(n_test), 0);

#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n_test; ++i) {
    std::vector<Index> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), Index{0});
    // Higher similarity first; equal similarity -> lower train index.
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
      if (sim(i, a) != sim(i, b)) return sim(i, a) > sim(i, b);
      return a < b;
    });
    std::vector<int> votes(static_cast<std::size_t>(num_classes), 0);
    for (int j = 0; j < k; ++j) ++votes[static_cast<std::size_t>(train_labels[static_cast<std::size_t>(order[j])])];
    const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();  // first max = smallest id
    correct[static_cast<std::size_t>(i)] = best == test_labels[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  return static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0)) / static_cast<double>(n_test);
}

double uniformity(const Mat& z) {
  const Index n = z.rows();
  if (n < 2) return 0.0;
  const Mat d = kernels::pairwise_sq_dist(z, z);
  double acc = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) acc += d(i, j);
  return acc / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

RateReport deviation_rate_report(const agg::DeviationSet& dev, const agg::UpdateDirection& d, double eta_global) {
  if (dev.grad_log_u.cols() != d.d.size()) throw Error(ErrorKind::kDimMismatch, "rate report: direction length differs");
  const Index k = dev.u.size();
  RateReport r;
  r.first_order = eta_global * (dev.grad_log_u * d.d);
  r.exact = Vec::Zero(k);
  const double dd = d.d.squaredNorm();
  for (Index i = 0; i < k; ++i) {
    if (dev.u[i] <= dev.eps) continue;
    const double u_tilde = dev.u[i] + dev.eps;
    // theta_g - theta_k = grad_log_u_k * u_tilde / 2
    const double delta_dot_d = 0.5 * u_tilde * dev.grad_log_u.row(i).dot(d.d);
    const double u_next = dev.u[i] - 2.0 * eta_global * delta_dot_d + eta_global * eta_global * dd;
    r.exact[i] = (dev.u[i] - u_next) / u_tilde;
  }
  return r;
}

LemmaCheck lemma1_check(const Vec& p, const ParamVector& theta_g, std::span<const ParamVector> thetas,
                        double lr, std::size_t steps, double clip) {
  if (static_cast<std::size_t>(p.size()) != thetas.size()) throw Error(ErrorKind::kDimMismatch, "lemma1_check: weights length differs");
  if (steps < 1) throw Error(ErrorKind::kDimMismatch, "lemma1_check: steps must be >= 1");
  LemmaCheck c;
  for (std::size_t k = 0; k < thetas.size(); ++k) c.lhs += p[static_cast<Index>(k)] * (theta_g - thetas[k]).squaredNorm();
  const double gap = static_cast<double>(steps - 1);
  c.rhs = 4.0 * lr * lr * gap * gap * clip * clip;
  c.ok = c.lhs <= c.rhs;
  return c;
}

}  // namespace fedrep::diag
