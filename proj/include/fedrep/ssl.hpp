#pragma once

#include <cstddef>

#include "fedrep/numerics.hpp"
#include "fedrep/rng.hpp"
#include "fedrep/uot.hpp"

namespace fedrep::ssl {

struct EncoderDims {
  std::size_t input = 0;   // D
  std::size_t hidden = 0;  // h
  std::size_t output = 0;  // d

  std::size_t param_count() const { return input * hidden + hidden + hidden * output + output; }
  bool operator==(const EncoderDims&) const = default;
};

/// Two-layer perceptron D -> h (tanh) -> d followed by row l2-normalization.
///
/// Parameter layout: W1 (h x D, row-major) | b1 (h) | W2 (d x h, row-major) | b2 (d).
class Encoder {
 public:
  Encoder(EncoderDims dims, ParamVector params);

  /// Weights ~ N(0, 1/fan_in), biases zero.
  static Encoder init(EncoderDims dims, RngStream& rng);

  const EncoderDims& dims() const { return dims_; }
  const ParamVector& params() const { return params_; }

  Eigen::Map<const Mat> w1() const;
  Eigen::Map<const Vec> b1() const;
  Eigen::Map<const Mat> w2() const;
  Eigen::Map<const Vec> b2() const;

 private:
  EncoderDims dims_;
  ParamVector params_;
};

/// Pre-normalization norms below this are treated as the zero vector.
inline constexpr double kZeroNormFloor = 1e-12;

/// Activations kept for the backward pass.
struct ForwardCache {
  Mat input;
  Mat hidden;     // tanh activations
  Mat pre_norm;   // linear output before normalization
  Vec norms;      // row norms of pre_norm
  Mat z;          // unit rows
};

ForwardCache forward_cached(const Encoder& enc, const Mat& x);

/// Unit-norm representations. A zero pre-normalization row maps to e_1.
Mat forward(const Encoder& enc, const Mat& x);

/// Gradient of a scalar loss w.r.t. params given dL/dZ; flat, params layout.
ParamVector backward(const Encoder& enc, const ForwardCache& cache, const Mat& dz);

struct ViewPair {
  Mat x1;
  Mat x2;
};

/// Additive Gaussian noise then independent coordinate masking, per view.
ViewPair augment(const Mat& x, const RngStream& rng, double noise_sigma, double mask_prob);

/// (1/B) sum_i ||z1_i - z2_i||^2.
double align_loss(const Mat& z1, const Mat& z2);

struct LossBreakdown {
  double total = 0.0;
  double align = 0.0;
  double uniform1 = 0.0;
  double uniform2 = 0.0;
  double lambda_u = 0.0;
};

struct LossAndGrad {
  LossBreakdown loss;
  ParamVector grad;
  uot::TransportPlan plan1;
  uot::TransportPlan plan2;
};

/// align(Z1, Z2) + lambda_u (uot(Z1, S1) + uot(Z2, S2)) and its gradient.
///
/// The transport terms are differentiated with the plans frozen at their
/// solved values, so only <C(Z), pi*> contributes to the embedding gradient.
LossAndGrad total_loss_and_grad(const Encoder& enc, const ViewPair& views, const Mat& anchors1,
                                const Mat& anchors2, double lambda_u, double tau_a, double tau_b,
                                const uot::SolveOptions& uot_opts = {});

/// Clip to norm <= clip, then params - lr * grad.
Encoder sgd_step(const Encoder& enc, const ParamVector& grad, double lr, double clip);

}  // namespace fedrep::ssl
