#include "fedrep/aggregator.hpp"

#include <cmath>

#include "fedrep/kernels.hpp"

namespace fedrep::agg {

namespace {

using Index = Eigen::Index;

void require_same_length(const ParamVector& ref, std::span<const ParamVector> thetas) {
  for (const auto& t : thetas) {
    if (t.size() != ref.size()) throw Error(ErrorKind::kDimMismatch, "client parameter lengths differ");
  }
}

}  // namespace

Vec sample_ratio_weights(std::span<const std::size_t> counts) {
  if (counts.empty()) throw Error(ErrorKind::kEmptyInput, "no clients");
  double total = 0.0;
  for (auto c : counts) {
    if (c == 0) throw Error(ErrorKind::kEmptyInput, "client with zero samples");
    total += static_cast<double>(c);
  }
  Vec w(static_cast<Index>(counts.size()));
  for (std::size_t k = 0; k < counts.size(); ++k) w[static_cast<Index>(k)] = static_cast<double>(counts[k]) / total;
  return w;
}

ParamVector fedavg(std::span<const ParamVector> thetas, std::span<const std::size_t> counts) {
  if (thetas.empty()) throw Error(ErrorKind::kEmptyInput, "fedavg: no client models");
  if (counts.size() != thetas.size()) throw Error(ErrorKind::kDimMismatch, "fedavg: counts length differs");
  require_same_length(thetas.front(), thetas);
  const Vec w = sample_ratio_weights(counts);
  ParamVector out = ParamVector::Zero(thetas.front().size());
  for (std::size_t k = 0; k < thetas.size(); ++k) out += w[static_cast<Index>(k)] * thetas[k];
  return out;
}

DeviationSet deviations(const ParamVector& theta_g, std::span<const ParamVector> thetas, double eps) {
  require_same_length(theta_g, thetas);
  DeviationSet dev;
  dev.eps = eps;
  const auto k = static_cast<Index>(thetas.size());
  dev.u.resize(k);
  dev.grad_log_u = Mat::Zero(k, theta_g.size());
  for (Index i = 0; i < k; ++i) {
    const ParamVector delta = theta_g - thetas[static_cast<std::size_t>(i)];
    dev.u[i] = delta.squaredNorm();
    if (dev.u[i] > eps) dev.grad_log_u.row(i) = (2.0 / (dev.u[i] + eps)) * delta.transpose();
  }
  return dev;
}

Mat gram(const DeviationSet& dev) { return kernels::gram(dev.grad_log_u); }

double dual_objective(const Mat& g, const Vec& p, double eta_g, double phi) {
  return eta_g * eta_g / (2.0 * phi) * p.dot(g * p);
}

AggWeights solve_weights_admm(const Mat& g, const AdmmOptions& opts) {
  require_finite(g, "gram matrix");
  if (g.rows() != g.cols() || g.rows() == 0) throw Error(ErrorKind::kDimMismatch, "admm: G must be square and non-empty");
  if (!(opts.phi > 0.0) || !(opts.rho > 0.0)) throw Error(ErrorKind::kConfig, "admm: phi and rho must be positive");
  const Index k = g.rows();
  AggWeights out;
  out.p = Vec::Constant(k, 1.0 / static_cast<double>(k));
  out.converged = true;
  if (k == 1) return out;

  // Hessian of the dual objective, rescaled to unit mean diagonal. The
  // minimizer is invariant to the scale; rho = 1 is then well matched.
  Mat hess = (opts.eta_g * opts.eta_g / opts.phi) * g;
  const double scale = hess.diagonal().mean();
  if (!(scale > 0.0)) return out;  // G == 0: every simplex point is optimal.
  hess /= scale;

  // Splitting p = q with q >= 0; the sum-to-one constraint stays on p with
  // multiplier mu, the copy constraint gets multiplier nu.
  const double rho = opts.rho;
  const Vec ones = Vec::Ones(k);
  Mat system = hess + rho * ones * ones.transpose();
  system.diagonal().array() += rho;

  Vec q = out.p;
  Vec nu = Vec::Zero(k);
  double mu = 0.0;
  Vec p = q;
  int it = 0;
  bool converged = false;
  for (; it < opts.max_iters; ++it) {
    const Vec rhs = (rho - mu) * ones + rho * q - nu;
    p = solve_spd(system, rhs);
    const Vec q_next = (p + nu / rho).cwiseMax(0.0);
    nu += rho * (p - q_next);
    mu += rho * (p.sum() - 1.0);
    const double primal = std::max(std::abs(q_next.sum() - 1.0), (p - q_next).cwiseAbs().maxCoeff());
    const double change = (q_next - q).cwiseAbs().maxCoeff();
    q = q_next;
    if (primal < opts.tol && change < opts.tol) {
      converged = true;
      ++it;
      break;
    }
  }
  out.admm_iters = it;
  out.converged = converged;
  out.mu = mu * scale;
  const double total = q.sum();
  out.primal_residual = std::abs(total - 1.0);
  if (total > 0.0) {
    out.p = q / total;
  } else {
    out.p = Vec::Constant(k, 1.0 / static_cast<double>(k));
  }
  return out;
}

UpdateDirection direction(const DeviationSet& dev, const AggWeights& w, double eta_g, double phi) {
  if (w.p.size() != dev.grad_log_u.rows()) throw Error(ErrorKind::kDimMismatch, "direction: weights length differs");
  UpdateDirection out;
  out.d = (eta_g / phi) * (dev.grad_log_u.transpose() * w.p);
  out.raw_norm = out.d.norm();
  if (out.raw_norm > 1.0) out.d /= out.raw_norm;
  return out;
}

EuaResult eua_aggregate(const ParamVector& theta_g, std::span<const ParamVector> thetas,
                        std::span<const std::size_t> counts, const EuaOptions& opts) {
  if (thetas.empty()) throw Error(ErrorKind::kEmptyInput, "eua: no client models");
  require_same_length(theta_g, thetas);
  const ParamVector base = opts.base == EuaBase::kFedAvg ? fedavg(thetas, counts) : theta_g;

  EuaResult r;
  r.dev = deviations(base, thetas);
  r.weights = solve_weights_admm(gram(r.dev), opts.admm);
  r.dir = direction(r.dev, r.weights, opts.admm.eta_g, opts.admm.phi);
  r.eta_global = opts.eta_global ? *opts.eta_global : std::sqrt(r.weights.p.dot(r.dev.u));
  r.theta = base - r.eta_global * r.dir.d;
  require_finite(r.theta, "aggregated global model");
  r.rates = r.eta_global * (r.dev.grad_log_u * r.dir.d);
  return r;
}

}  // namespace fedrep::agg
