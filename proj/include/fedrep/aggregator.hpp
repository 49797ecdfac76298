#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fedrep/numerics.hpp"

namespace fedrep::agg {

/// Sample-ratio weighted mean of client parameters.
ParamVector fedavg(std::span<const ParamVector> thetas, std::span<const std::size_t> counts);

/// Sample-ratio weights n_k / sum n.
Vec sample_ratio_weights(std::span<const std::size_t> counts);

inline constexpr double kDeviationFloor = 1e-12;

struct DeviationSet {
  /// u_k = ||theta_g - theta_k||^2.
  Vec u;
  double eps = kDeviationFloor;
  /// Row k = grad log(u_k + eps) = 2 (theta_g - theta_k) / (u_k + eps); zero when u_k <= eps.
  Mat grad_log_u;
};

DeviationSet deviations(const ParamVector& theta_g, std::span<const ParamVector> thetas,
                        double eps = kDeviationFloor);

/// Pairwise inner products of the log-deviation gradients (K x K).
Mat gram(const DeviationSet& dev);

struct AdmmOptions {
  double eta_g = 1.0;
  double phi = 0.1;
  double rho = 1.0;
  int max_iters = 1000;
  double tol = 1e-8;
};

struct AggWeights {
  Vec p;
  /// Multiplier of the sum-to-one constraint, in the units of the unscaled problem.
  double mu = 0.0;
  int admm_iters = 0;
  /// |sum p - 1| before the final renormalization.
  double primal_residual = 0.0;
  bool converged = false;
};

/// Weights minimizing (eta_g^2 / 2 phi) p'Gp over the probability simplex.
AggWeights solve_weights_admm(const Mat& g, const AdmmOptions& opts = {});

/// (eta_g^2 / 2 phi) p'Gp.
double dual_objective(const Mat& g, const Vec& p, double eta_g, double phi);

struct UpdateDirection {
  ParamVector d;
  double raw_norm = 0.0;
};

/// d = (eta_g / phi) sum_k p_k grad log u_k, rescaled to unit norm when longer.
UpdateDirection direction(const DeviationSet& dev, const AggWeights& w, double eta_g, double phi);

enum class EuaBase {
  /// Move the current global model (the server never averages parameters).
  kKeep,
  /// Start from the FedAvg mean and measure deviations from it.
  kFedAvg,
};

struct EuaOptions {
  AdmmOptions admm;
  EuaBase base = EuaBase::kKeep;
  /// Server step. When unset the step is sqrt(sum_k p_k u_k), the p-weighted
  /// RMS client deviation.
  std::optional<double> eta_global;
};

struct EuaResult {
  ParamVector theta;
  AggWeights weights;
  DeviationSet dev;
  UpdateDirection dir;
  /// Step actually applied.
  double eta_global = 0.0;
  /// c_k = eta_global <grad log u_k, d>.
  Vec rates;
};

EuaResult eua_aggregate(const ParamVector& theta_g, std::span<const ParamVector> thetas,
                        std::span<const std::size_t> counts, const EuaOptions& opts = {});

}  // namespace fedrep::agg
