#include "fedrep/uot.hpp"

#include <cmath>
#include <limits>

#include "fedrep/kernels.hpp"

namespace fedrep::uot {

namespace {

constexpr double kCurvatureFloor = 1e-30;
constexpr int kMaxHalvings = 60;

void check_shapes(const UotProblem& prob, const Mat& pi) {
  if (prob.a.size() != prob.cost.rows() || prob.b.size() != prob.cost.cols()) {
    throw Error(ErrorKind::kDimMismatch, "uot: marginal lengths do not match cost shape");
  }
  if (pi.rows() != prob.cost.rows() || pi.cols() != prob.cost.cols()) {
    throw Error(ErrorKind::kDimMismatch, "uot: plan shape does not match cost shape");
  }
}

double frob_dot(const Mat& x, const Mat& y) { return (x.array() * y.array()).sum(); }

}  // namespace

UotProblem UotProblem::uniform(Mat cost, double tau_a, double tau_b) {
  UotProblem p;
  const auto n = cost.rows(), m = cost.cols();
  p.a = Vec::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  p.b = Vec::Constant(m, m > 0 ? 1.0 / static_cast<double>(m) : 0.0);
  p.cost = std::move(cost);
  p.tau_a = tau_a;
  p.tau_b = tau_b;
  return p;
}

Mat build_cost(const Mat& z, const Mat& s) {
  if (z.cols() != s.cols()) throw Error(ErrorKind::kDimMismatch, "build_cost: embedding widths differ");
  return kernels::pairwise_sq_dist(z, s);
}

double objective(const UotProblem& prob, const Mat& pi) {
  check_shapes(prob, pi);
  require_finite(pi, "uot plan");
  require_finite(prob.cost, "uot cost");
  const Vec row_gap = kernels::row_sums(pi) - prob.a;
  const Vec col_gap = kernels::col_sums(pi) - prob.b;
  const double value = frob_dot(prob.cost, pi) + 0.5 * prob.tau_a * row_gap.squaredNorm() +
                       0.5 * prob.tau_b * col_gap.squaredNorm();
  if (!std::isfinite(value)) throw Error(ErrorKind::kNonFinite, "uot objective is not finite");
  return value;
}

Mat apply_q(const UotProblem& prob, const Mat& pi) {
  check_shapes(prob, pi);
  return kernels::apply_q(pi, prob.tau_a, prob.tau_b);
}

Mat linear_term(const UotProblem& prob) {
  const auto n = prob.cost.rows(), m = prob.cost.cols();
  Mat w(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      w(i, j) = prob.cost(i, j) - prob.tau_a * prob.a[i] - prob.tau_b * prob.b[j];
  return w;
}

Mat gradient(const UotProblem& prob, const Mat& pi) { return apply_q(prob, pi) + linear_term(prob); }

Mat independent_coupling(const UotProblem& prob) { return prob.a * prob.b.transpose(); }

TransportPlan solve(const UotProblem& prob, const Mat& pi0, const SolveOptions& opts) {
  check_shapes(prob, pi0);
  require_finite(pi0, "uot initial plan");
  if ((pi0.array() < 0.0).any()) throw Error(ErrorKind::kDimMismatch, "uot: initial plan has negative entries");

  const Mat w = linear_term(prob);
  TransportPlan plan;
  plan.pi = pi0;
  plan.objective = objective(prob, plan.pi);
  if (opts.record_history) plan.history.push_back(plan.objective);

  for (int it = 0; it < opts.max_iters; ++it) {
    Mat g = kernels::apply_q(plan.pi, prob.tau_a, prob.tau_b) + w;
    require_finite(g, "uot gradient");
    if (opts.step_rule == StepRule::kFreeSet) {
      g = (plan.pi.array() <= 0.0 && g.array() > 0.0).select(0.0, g);
    }
    const double gg = g.squaredNorm();
    if (gg == 0.0) {
      plan.converged = true;
      break;
    }
    const double curvature = frob_dot(g, kernels::apply_q(g, prob.tau_a, prob.tau_b));
    double step;
    if (curvature <= kCurvatureFloor) {
      step = opts.fallback_step;
      ++plan.zero_curvature_steps;
    } else {
      step = gg / curvature;
    }

    Mat candidate;
    double candidate_obj = std::numeric_limits<double>::infinity();
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
      candidate = (plan.pi - step * g).cwiseMax(0.0);
      candidate_obj = objective(prob, candidate);
      if (candidate_obj <= plan.objective) break;
    }
    ++plan.iterations;
    if (!(candidate_obj <= plan.objective)) {
      // No step along -g decreases the objective: stationary to working precision.
      plan.converged = true;
      break;
    }
    const double decrease = plan.objective - candidate_obj;
    const double scale = std::abs(plan.objective);
    plan.pi = std::move(candidate);
    plan.objective = candidate_obj;
    if (opts.record_history) plan.history.push_back(plan.objective);
    if (decrease <= opts.tol * scale) {
      plan.converged = true;
      break;
    }
  }
  return plan;
}

TransportPlan solve(const UotProblem& prob, const SolveOptions& opts) {
  return solve(prob, independent_coupling(prob), opts);
}

Mat grad_wrt_embeddings(const Mat& z, const Mat& s, const TransportPlan& plan) {
  if (z.cols() != s.cols() || plan.pi.rows() != z.rows() || plan.pi.cols() != s.rows()) {
    throw Error(ErrorKind::kDimMismatch, "grad_wrt_embeddings: shapes do not match the plan");
  }
  const Vec mass = kernels::row_sums(plan.pi);
  Mat out = 2.0 * (mass.asDiagonal() * z - plan.pi * s);
  return out;
}

Mat sample_anchors(RngStream& rng, std::size_t m, std::size_t dim) {
  Mat s = gaussian_matrix(rng, m, dim);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double n = s.row(i).norm();
    if (n > 0.0) {
      s.row(i) /= n;
    } else {
      s.row(i).setZero();
      s(i, 0) = 1.0;
    }
  }
  return s;
}

}  // namespace fedrep::uot
