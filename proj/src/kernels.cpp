#include "fedrep/kernels.hpp"

#include <cmath>

#include <omp.h>

namespace fedrep::kernels {

namespace {

using Index = Eigen::Index;

// Below this many inner-loop operations the fork/join costs more than it saves.
constexpr Index kParallelWork = 1 << 14;

void require_same_width(const Mat& x, const Mat& y, const char* what) {
  if (x.cols() != y.cols()) throw Error(ErrorKind::kDimMismatch, std::string(what) + ": column counts differ");
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }
void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

Mat pairwise_sq_dist(const Mat& x, const Mat& y) {
  require_same_width(x, y, "pairwise_sq_dist");
  const Index n = x.rows(), m = y.rows(), d = x.cols();
  Mat out(n, m);
#pragma omp parallel for schedule(static) if (n * m * d >= kParallelWork)
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      double acc = 0.0;
      for (Index c = 0; c < d; ++c) {
        const double diff = x(i, c) - y(j, c);
        acc += diff * diff;
      }
      out(i, j) = acc;
    }
  }
  return out;
}

Vec row_sums(const Mat& m) {
  Vec out(m.rows());
#pragma omp parallel for schedule(static) if (m.size() >= kParallelWork)
  for (Index i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    for (Index j = 0; j < m.cols(); ++j) acc += m(i, j);
    out[i] = acc;
  }
  return out;
}

Vec col_sums(const Mat& m) {
  Vec out(m.cols());
#pragma omp parallel for schedule(static) if (m.size() >= kParallelWork)
  for (Index j = 0; j < m.cols(); ++j) {
    double acc = 0.0;
    for (Index i = 0; i < m.rows(); ++i) acc += m(i, j);
    out[j] = acc;
  }
  return out;
}

Mat apply_q(const Mat& pi, double tau_a, double tau_b) {
  const Vec rs = row_sums(pi);
  const Vec cs = col_sums(pi);
  Mat out(pi.rows(), pi.cols());
#pragma omp parallel for schedule(static) if (pi.size() >= kParallelWork)
  for (Index i = 0; i < pi.rows(); ++i)
    for (Index j = 0; j < pi.cols(); ++j) out(i, j) = tau_a * rs[i] + tau_b * cs[j];
  return out;
}

Mat gram(const Mat& rows) {
  const Index k = rows.rows(), m = rows.cols();
  Mat out(k, k);
  // Upper triangle by row, mirrored; each entry has a single writer.
#pragma omp parallel for schedule(dynamic) if (k * k * m >= kParallelWork)
  for (Index i = 0; i < k; ++i) {
    for (Index j = i; j < k; ++j) {
      double acc = 0.0;
      for (Index c = 0; c < m; ++c) acc += rows(i, c) * rows(j, c);
      out(i, j) = acc;
      out(j, i) = acc;
    }
  }
  return out;
}

Mat cosine_similarity(const Mat& x, const Mat& y) {
  require_same_width(x, y, "cosine_similarity");
  const Index n = x.rows(), m = y.rows(), d = x.cols();
  Vec xn(n), yn(m);
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Index c = 0; c < d; ++c) acc += x(i, c) * x(i, c);
    xn[i] = std::sqrt(acc);
  }
  for (Index j = 0; j < m; ++j) {
    double acc = 0.0;
    for (Index c = 0; c < d; ++c) acc += y(j, c) * y(j, c);
    yn[j] = std::sqrt(acc);
  }
  Mat out(n, m);
#pragma omp parallel for schedule(static) if (n * m * d >= kParallelWork)
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (xn[i] == 0.0 || yn[j] == 0.0) {
        out(i, j) = 0.0;
        continue;
      }
      double acc = 0.0;
      for (Index c = 0; c < d; ++c) acc += x(i, c) * y(j, c);
      out(i, j) = acc / (xn[i] * yn[j]);
    }
  }
  return out;
}

Mat covariance(const Mat& rows) {
  const Index n = rows.rows(), d = rows.cols();
  if (n < 2) throw Error(ErrorKind::kDimMismatch, "covariance: need at least two rows");
  Vec mean = Vec::Zero(d);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < d; ++c) mean[c] += rows(i, c);
  mean /= static_cast<double>(n);
  Mat out(d, d);
#pragma omp parallel for schedule(dynamic) if (n * d * d >= kParallelWork)
  for (Index a = 0; a < d; ++a) {
    for (Index b = a; b < d; ++b) {
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) acc += (rows(i, a) - mean[a]) * (rows(i, b) - mean[b]);
      acc /= static_cast<double>(n - 1);
      out(a, b) = acc;
      out(b, a) = acc;
    }
  }
  return out;
}

namespace reference {

Mat pairwise_sq_dist(const Mat& x, const Mat& y) {
  require_same_width(x, y, "pairwise_sq_dist");
  Mat out(x.rows(), y.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < y.rows(); ++j) {
      double acc = 0.0;
      for (Index c = 0; c < x.cols(); ++c) acc += (x(i, c) - y(j, c)) * (x(i, c) - y(j, c));
      out(i, j) = acc;
    }
  }
  return out;
}

Vec row_sums(const Mat& m) {
  Vec out = Vec::Zero(m.rows());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out[i] += m(i, j);
  return out;
}

Vec col_sums(const Mat& m) {
  Vec out = Vec::Zero(m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out[j] += m(i, j);
  return out;
}

Mat apply_q(const Mat& pi, double tau_a, double tau_b) {
  const Vec rs = row_sums(pi);
  const Vec cs = col_sums(pi);
  Mat out(pi.rows(), pi.cols());
  for (Index i = 0; i < pi.rows(); ++i)
    for (Index j = 0; j < pi.cols(); ++j) out(i, j) = tau_a * rs[i] + tau_b * cs[j];
  return out;
}

Mat gram(const Mat& rows) {
  Mat out(rows.rows(), rows.rows());
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < rows.rows(); ++j) {
      double acc = 0.0;
      for (Index c = 0; c < rows.cols(); ++c) acc += rows(i, c) * rows(j, c);
      out(i, j) = acc;
    }
  }
  return out;
}

Mat cosine_similarity(const Mat& x, const Mat& y) {
  require_same_width(x, y, "cosine_similarity");
  Mat out(x.rows(), y.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < y.rows(); ++j) {
      double xx = 0.0, yy = 0.0, xy = 0.0;
      for (Index c = 0; c < x.cols(); ++c) {
        xx += x(i, c) * x(i, c);
        yy += y(j, c) * y(j, c);
        xy += x(i, c) * y(j, c);
      }
      const double denom = std::sqrt(xx) * std::sqrt(yy);
      out(i, j) = denom == 0.0 ? 0.0 : xy / denom;
    }
  }
  return out;
}

Mat covariance(const Mat& rows) {
  const Index n = rows.rows();
  if (n < 2) throw Error(ErrorKind::kDimMismatch, "covariance: need at least two rows");
  Vec mean = Vec::Zero(rows.cols());
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < rows.cols(); ++c) mean[c] += rows(i, c);
  mean /= static_cast<double>(n);
  Mat out(rows.cols(), rows.cols());
  for (Index a = 0; a < rows.cols(); ++a) {
    for (Index b = 0; b < rows.cols(); ++b) {
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) acc += (rows(i, a) - mean[a]) * (rows(i, b) - mean[b]);
      out(a, b) = acc / static_cast<double>(n - 1);
    }
  }
  return out;
}

}  // namespace reference

}  // namespace fedrep::kernels
