#pragma once

#include <vector>

#include "fedrep/numerics.hpp"
#include "fedrep/rng.hpp"

namespace fedrep::uot {

/// Unbalanced transport between N embeddings and M anchors with squared-norm
/// marginal penalties:
///
///   f(pi) = <C, pi> + tau_a/2 ||pi 1 - a||^2 + tau_b/2 ||pi^T 1 - b||^2,  pi >= 0.
struct UotProblem {
  Mat cost;
  Vec a;
  Vec b;
  double tau_a = 0.8;
  double tau_b = 0.8;

  /// Uniform marginals a = 1/N, b = 1/M.
  static UotProblem uniform(Mat cost, double tau_a, double tau_b);

  Eigen::Index rows() const { return cost.rows(); }
  Eigen::Index cols() const { return cost.cols(); }
};

enum class StepRule {
  /// eta = g'g / g'Qg on the full gradient g = Q vec(pi) + w.
  kFullGradient,
  /// Same formula restricted to coordinates not pinned at zero by the
  /// projection (pi_ij == 0 and g_ij > 0 are dropped).
  kFreeSet,
};

struct SolveOptions {
  int max_iters = 500;
  double tol = 1e-8;
  StepRule step_rule = StepRule::kFullGradient;
  /// Step used when the curvature g'Qg vanishes (tau_a = tau_b = 0).
  double fallback_step = 1e-3;
  bool record_history = false;
};

struct TransportPlan {
  Mat pi;
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
  /// Number of iterations that hit the zero-curvature fallback.
  int zero_curvature_steps = 0;
  /// Objective after each accepted iterate (index 0 is the start point).
  std::vector<double> history;
};

/// C_ij = ||z_i - s_j||^2. Throws kDimMismatch on differing widths.
Mat build_cost(const Mat& z, const Mat& s);

double objective(const UotProblem& prob, const Mat& pi);

/// Matrix form of Q vec(pi); Q itself is never formed.
Mat apply_q(const UotProblem& prob, const Mat& pi);

/// Matrix form of w = vec(C) - tau_a Phi_r' a - tau_b Phi_c' b.
Mat linear_term(const UotProblem& prob);

/// Matrix form of the objective gradient Q vec(pi) + w.
Mat gradient(const UotProblem& prob, const Mat& pi);

/// Independent coupling a b^T.
Mat independent_coupling(const UotProblem& prob);

/// Projected steepest descent with exact line search. A projected step that
/// raises the objective is halved until it does not, so the objective
/// sequence is non-increasing.
TransportPlan solve(const UotProblem& prob, const Mat& pi0, const SolveOptions& opts = {});
TransportPlan solve(const UotProblem& prob, const SolveOptions& opts = {});

/// d<C, pi>/dz_i with pi held fixed: sum_j 2 pi_ij (z_i - s_j).
Mat grad_wrt_embeddings(const Mat& z, const Mat& s, const TransportPlan& plan);

/// m anchors drawn from N(0, I_dim) and projected onto the unit sphere.
Mat sample_anchors(RngStream& rng, std::size_t m, std::size_t dim);

}  // namespace fedrep::uot
