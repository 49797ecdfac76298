#include "fedrep/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedrep::oracle {

using Index = Eigen::Index;

Mat phi_rows(Index n, Index m) {
  Mat phi = Mat::Zero(n, n * m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) phi(i, i * m + j) = 1.0;
  return phi;
}

Mat phi_cols(Index n, Index m) {
  Mat phi = Mat::Zero(m, n * m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) phi(j, i * m + j) = 1.0;
  return phi;
}

Vec vec(const Mat& m) {
  Vec out(m.size());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
  return out;
}

double dense_uot_objective(const Mat& cost, const Vec& a, const Vec& b, double tau_a, double tau_b, const Mat& pi) {
  const Vec v = vec(pi);
  const Vec rows = phi_rows(cost.rows(), cost.cols()) * v - a;
  const Vec cols = phi_cols(cost.rows(), cost.cols()) * v - b;
  return vec(cost).dot(v) + 0.5 * tau_a * rows.squaredNorm() + 0.5 * tau_b * cols.squaredNorm();
}

Mat dense_q(Index n, Index m, double tau_a, double tau_b) {
  const Mat pr = phi_rows(n, m), pc = phi_cols(n, m);
  return tau_a * pr.transpose() * pr + tau_b * pc.transpose() * pc;
}

double long_run_uot(const Mat& cost, const Vec& a, const Vec& b, double tau_a, double tau_b, int iters) {
  const Index n = cost.rows(), m = cost.cols();
  const Mat pr = phi_rows(n, m), pc = phi_cols(n, m);
  const Mat q = tau_a * pr.transpose() * pr + tau_b * pc.transpose() * pc;
  const Vec w = vec(cost) - tau_a * pr.transpose() * a - tau_b * pc.transpose() * b;
  const double omega = 0.5 * (tau_a * a.squaredNorm() + tau_b * b.squaredNorm());
  const double lipschitz = std::max(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().maxCoeff(), 1e-12);
  auto f = [&](const Vec& v) { return 0.5 * v.dot(q * v) + w.dot(v) + omega; };

  Vec v = Vec::Zero(n * m);
  double best = f(v);
  for (int k = 0; k < iters; ++k) {
    const double step = (1.0 + 1.0 / (k + 1.0)) / lipschitz;
    v = (v - step * (q * v + w)).cwiseMax(0.0);
    best = std::min(best, f(v));
  }
  return best;
}

double uot_scalar_optimum(double c, double a, double b, double tau_a, double tau_b) {
  return std::max(0.0, (tau_a * a + tau_b * b - c) / (tau_a + tau_b));
}

SimplexQpSolution simplex_qp_active_set(const Mat& g) {
  const Index k = g.rows();
  SimplexQpSolution best;
  best.value = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    std::vector<Index> support;
    for (Index i = 0; i < k; ++i)
      if (mask & (1u << i)) support.push_back(i);
    const auto s = static_cast<Index>(support.size());
    // KKT system [G_SS 1; 1' 0] [p; -lambda] = [0; 1].
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
    for (Index i = 0; i < s; ++i) {
      for (Index j = 0; j < s; ++j) kkt(i, j) = g(support[i], support[j]);
      kkt(i, s) = 1.0;
      kkt(s, i) = 1.0;
    }
    rhs[s] = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite() || (kkt * sol - rhs).norm() > 1e-9) continue;
    Vec p = Vec::Zero(k);
    bool feasible = true;
    for (Index i = 0; i < s; ++i) {
      if (sol[i] < -1e-12) feasible = false;
      p[support[i]] = std::max(0.0, sol[i]);
    }
    if (!feasible) continue;
    p /= p.sum();
    const double value = p.dot(g * p);
    if (value < best.value) {
      best.value = value;
      best.p = p;
    }
  }
  return best;
}

SimplexQpSolution simplex_qp_grid(const Mat& g, double step) {
  const Index k = g.rows();
  SimplexQpSolution best;
  best.value = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::lround(1.0 / step));
  auto consider = [&](const Vec& p) {
    const double v = p.dot(g * p);
    if (v < best.value) {
      best.value = v;
      best.p = p;
    }
  };
  if (k == 1) {
    consider(Vec::Ones(1));
  } else if (k == 2) {
    for (int i = 0; i <= n; ++i) {
      Vec p(2);
      p << i * step, 1.0 - i * step;
      consider(p);
    }
  } else if (k == 3) {
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; i + j <= n; ++j) {
        Vec p(3);
        p << i * step, j * step, 1.0 - (i + j) * step;
        consider(p.cwiseMax(0.0));
      }
    }
  } else {
    throw Error(ErrorKind::kDimMismatch, "simplex_qp_grid supports K <= 3");
  }
  return best;
}

Vec central_diff(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec grad(x.size());
  Vec probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(const Vec& a, const Vec& b, double floor) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

Vec jacobi_eigenvalues(const Mat& sym, double tol, int max_sweeps) {
  Eigen::MatrixXd a = sym;
  const Index n = a.rows();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * std::max(1.0, a.norm())) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Index r = 0; r < n; ++r) {
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (Index r = 0; r < n; ++r) {
          const double apr = a(p, r), aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
      }
    }
  }
  Vec ev = a.diagonal();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return ev;
}

}  // namespace fedrep::oracle
