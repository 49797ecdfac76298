#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "fedrep/error.hpp"

namespace fedrep {

/// Dense row-major matrix. All matrices in the simulator are small (<= 256 rows).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Flat encoder parameters; the unit exchanged between clients and server.
using ParamVector = Vec;

bool all_finite(const Mat& m);
bool all_finite(const Vec& v);

/// Throws Error(kNonFinite) naming `what` if any entry is NaN/Inf.
void require_finite(const Mat& m, std::string_view what);
void require_finite(const Vec& v, std::string_view what);

/// Solves A x = rhs for symmetric positive (semi-)definite A.
///
/// Tries a Cholesky factorization, then LDLT, then LDLT on A + 1e-12 I. A
/// candidate is accepted only if ||A x - rhs|| <= 1e-8 (1 + ||rhs||).
/// Throws kNonFinite, kDimMismatch (non-square, asymmetric, wrong rhs length)
/// or kSingular.
Vec solve_spd(const Mat& a, const Vec& rhs);

/// Singular values in non-increasing order.
Vec svd_values(const Mat& m);

}  // namespace fedrep
