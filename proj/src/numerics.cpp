#include "fedrep/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedrep {

bool all_finite(const Mat& m) { return m.allFinite(); }
bool all_finite(const Vec& v) { return v.allFinite(); }

void require_finite(const Mat& m, std::string_view what) {
  if (!m.allFinite()) throw Error(ErrorKind::kNonFinite, std::string(what) + " has NaN/Inf entries");
}

void require_finite(const Vec& v, std::string_view what) {
  if (!v.allFinite()) throw Error(ErrorKind::kNonFinite, std::string(what) + " has NaN/Inf entries");
}

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kRidge = 1e-12;

bool residual_ok(const Mat& a, const Vec& x, const Vec& rhs) {
  if (!x.allFinite()) return false;
  return (a * x - rhs).norm() <= 1e-8 * (1.0 + rhs.norm());
}

}  // namespace

Vec solve_spd(const Mat& a, const Vec& rhs) {
  require_finite(a, "solve_spd matrix");
  require_finite(rhs, "solve_spd rhs");
  if (a.rows() != a.cols()) throw Error(ErrorKind::kDimMismatch, "solve_spd: matrix not square");
  if (rhs.size() != a.rows()) throw Error(ErrorKind::kDimMismatch, "solve_spd: rhs length mismatch");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw Error(ErrorKind::kDimMismatch, "solve_spd: matrix not symmetric");
  }
  if (a.rows() == 0) return Vec();

  Eigen::LLT<Mat> llt(a);
  if (llt.info() == Eigen::Success) {
    Vec x = llt.solve(rhs);
    if (residual_ok(a, x, rhs)) return x;
  }
  Eigen::LDLT<Mat> ldlt(a);
  if (ldlt.info() == Eigen::Success) {
    Vec x = ldlt.solve(rhs);
    if (residual_ok(a, x, rhs)) return x;
  }
  Mat ridged = a;
  ridged.diagonal().array() += kRidge;
  Eigen::LDLT<Mat> ridge_ldlt(ridged);
  if (ridge_ldlt.info() == Eigen::Success) {
    Vec x = ridge_ldlt.solve(rhs);
    if (residual_ok(a, x, rhs)) return x;
  }
  throw Error(ErrorKind::kSingular, "solve_spd: system is singular within residual tolerance");
}

Vec svd_values(const Mat& m) {
  require_finite(m, "svd_values input");
  if (m.size() == 0) return Vec();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  Vec s = svd.singularValues();
  // Eigen already sorts in decreasing order; enforce it against ties in rounding.
  std::sort(s.data(), s.data() + s.size(), std::greater<>());
  return s.cwiseMax(0.0);
}

}  // namespace fedrep
