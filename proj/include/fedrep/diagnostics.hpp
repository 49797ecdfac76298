#pragma once

#include <span>

#include "fedrep/aggregator.hpp"
#include "fedrep/numerics.hpp"

namespace fedrep::diag {

struct SpectrumReport {
  Vec singular_values;
  Vec log_values;
  double effective_rank = 1.0;
};

inline constexpr std::size_t kMaxSpectrum = 100;
inline constexpr double kLogFloor = 1e-12;

/// Singular values of the sample covariance of the rows, top min(d, 100).
SpectrumReport covariance_spectrum(const Mat& z);

/// exp of the Shannon entropy of the normalized spectrum; 1 for a zero spectrum.
double effective_rank(const Vec& singular_values);

inline constexpr int kDefaultKnnK = 5;

/// Cosine k-NN majority vote. Vote ties go to the smallest class id.
double knn_eval(const Mat& train_z, std::span<const int> train_labels, const Mat& test_z,
                std::span<const int> test_labels, int k = kDefaultKnnK);

/// Mean squared distance over distinct row pairs.
double uniformity(const Mat& z);

struct EvalReport {
  double knn_accuracy = 0.0;
  double uniformity = 0.0;
  double alignment_gap = 0.0;
  int k = kDefaultKnnK;
};

struct RateReport {
  /// eta_global <grad log u_k, d>.
  Vec first_order;
  /// (u_k(theta) - u_k(theta - eta_global d)) / (u_k + eps).
  Vec exact;
};

RateReport deviation_rate_report(const agg::DeviationSet& dev, const agg::UpdateDirection& d,
                                 double eta_global);

struct LemmaCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = true;
};

/// lhs = sum_k p_k ||theta_g - theta_k||^2, rhs = 4 lr^2 (steps - 1)^2 clip^2.
LemmaCheck lemma1_check(const Vec& p, const ParamVector& theta_g,
                        std::span<const ParamVector> thetas, double lr, std::size_t steps,
                        double clip);

}  // namespace fedrep::diag
