#pragma once

#include "fedrep/numerics.hpp"

// Hot data-parallel loops. Every kernel has a plain serial version in
// `kernels::reference` and an OpenMP version in `kernels`. Each output entry
// is accumulated by exactly one thread in the same order as the reference,
// so results are bit-identical for any thread count.

namespace fedrep::kernels {

/// out(i, j) = ||x_i - y_j||^2.
Mat pairwise_sq_dist(const Mat& x, const Mat& y);
Vec row_sums(const Mat& m);
Vec col_sums(const Mat& m);
/// out(i, j) = tau_a * row_sum_i(pi) + tau_b * col_sum_j(pi).
Mat apply_q(const Mat& pi, double tau_a, double tau_b);
/// out(i, j) = <r_i, r_j> for rows of `rows`.
Mat gram(const Mat& rows);
/// out(i, j) = cos(x_i, y_j); zero rows give similarity 0.
Mat cosine_similarity(const Mat& x, const Mat& y);
/// Sample covariance of rows (centered, divided by n - 1).
Mat covariance(const Mat& rows);

namespace reference {
Mat pairwise_sq_dist(const Mat& x, const Mat& y);
Vec row_sums(const Mat& m);
Vec col_sums(const Mat& m);
Mat apply_q(const Mat& pi, double tau_a, double tau_b);
Mat gram(const Mat& rows);
Mat cosine_similarity(const Mat& x, const Mat& y);
Mat covariance(const Mat& rows);
}  // namespace reference

/// Threads OpenMP will use for the parallel kernels.
int max_threads();
void set_threads(int n);

}  // namespace fedrep::kernels
