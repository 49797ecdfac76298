#pragma once

#include "fedrep/numerics.hpp"
#include "fedrep/rng.hpp"

namespace fedrep::testing {

inline Mat random_spd(RngStream& rng, Eigen::Index n, double ridge = 1e-6) {
  const Mat r = gaussian_matrix(rng, static_cast<std::size_t>(n), static_cast<std::size_t>(n));
  Mat a = r.transpose() * r;
  a.diagonal().array() += ridge;
  return a;
}

inline Mat random_uniform(RngStream& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * rng.uniform();
  return m;
}

inline Mat unit_rows(Mat m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i).normalize();
  return m;
}

}  // namespace fedrep::testing
