#pragma once

// Independent reference computations used by tests, the acceptance suite and
// `fedrep oracle`. Nothing here calls into the solvers it is used to check.

#include <cstdint>
#include <functional>

#include "fedrep/numerics.hpp"

namespace fedrep::oracle {

/// Phi_r = I_N (x) 1_M^T, shape N x NM (row-major vec).
Mat phi_rows(Eigen::Index n, Eigen::Index m);
/// Phi_c = 1_N^T (x) I_M, shape M x NM.
Mat phi_cols(Eigen::Index n, Eigen::Index m);

/// Row-major vectorization.
Vec vec(const Mat& m);

/// vec(C)'vec(pi) + tau_a/2 ||Phi_r vec(pi) - a||^2 + tau_b/2 ||Phi_c vec(pi) - b||^2.
double dense_uot_objective(const Mat& cost, const Vec& a, const Vec& b, double tau_a, double tau_b, const Mat& pi);

/// Q = tau_a Phi_r' Phi_r + tau_b Phi_c' Phi_c, explicitly.
Mat dense_q(Eigen::Index n, Eigen::Index m, double tau_a, double tau_b);

/// Minimizes the dense UOT objective by plain projected gradient descent
/// with steps 1/L * (1 + 1/(k+1)), L = ||Q||_2, from pi = 0. Returns the
/// best objective seen.
double long_run_uot(const Mat& cost, const Vec& a, const Vec& b, double tau_a, double tau_b, int iters = 100000);

/// 1x1 closed form: max(0, (tau_a a + tau_b b - c) / (tau_a + tau_b)).
double uot_scalar_optimum(double c, double a, double b, double tau_a, double tau_b);

struct SimplexQpSolution {
  Vec p;
  double value = 0.0;  // p'Gp
};

/// Exact minimizer of p'Gp over the probability simplex by enumerating
/// supports and solving each equality-constrained subproblem.
SimplexQpSolution simplex_qp_active_set(const Mat& g);

/// Exhaustive grid over the simplex at spacing `step` (K <= 3).
SimplexQpSolution simplex_qp_grid(const Mat& g, double step = 1e-3);

/// Central differences of f at x with step h.
Vec central_diff(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5);

/// ||a - b|| / max(||a||, ||b||, floor).
double relative_error(const Vec& a, const Vec& b, double floor = 1e-12);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
Vec jacobi_eigenvalues(const Mat& sym, double tol = 1e-14, int max_sweeps = 100);

}  // namespace fedrep::oracle

namespace fedrep::oracle {

struct GradCheck {
  double rel_error = 0.0;
  Eigen::Index params = 0;
};

/// Full two-view loss gradient (plans frozen at their solved values) against
/// central differences, on a random B=4, D=6, h=5, d=3 instance.
GradCheck ssl_gradcheck(std::uint64_t seed, double lambda_u = 0.1);

/// grad log(u_k + eps) against central differences for a random K=3 instance;
/// returns the largest relative error over clients.
GradCheck deviation_gradcheck(std::uint64_t seed);

}  // namespace fedrep::oracle
