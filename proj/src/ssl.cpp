#include "fedrep/ssl.hpp"

#include <cmath>

namespace fedrep::ssl {

namespace {

using Index = Eigen::Index;

struct Offsets {
  Index w1, b1, w2, b2, end;
};

Offsets offsets(const EncoderDims& d) {
  const auto D = static_cast<Index>(d.input), h = static_cast<Index>(d.hidden),
             o = static_cast<Index>(d.output);
  Offsets off;
  off.w1 = 0;
  off.b1 = h * D;
  off.w2 = off.b1 + h;
  off.b2 = off.w2 + o * h;
  off.end = off.b2 + o;
  return off;
}

}  // namespace

Encoder::Encoder(EncoderDims dims, ParamVector params) : dims_(dims), params_(std::move(params)) {
  if (dims_.input == 0 || dims_.hidden == 0 || dims_.output == 0) {
    throw Error(ErrorKind::kDimMismatch, "encoder dimensions must be positive");
  }
  if (static_cast<std::size_t>(params_.size()) != dims_.param_count()) {
    throw Error(ErrorKind::kDimMismatch, "encoder parameter vector has wrong length");
  }
}

Encoder Encoder::init(EncoderDims dims, RngStream& rng) {
  ParamVector p = ParamVector::Zero(static_cast<Index>(dims.param_count()));
  const Offsets off = offsets(dims);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(dims.input));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  for (Index i = off.w1; i < off.b1; ++i) p[i] = s1 * rng.normal();
  for (Index i = off.w2; i < off.b2; ++i) p[i] = s2 * rng.normal();
  return Encoder(dims, std::move(p));
}

Eigen::Map<const Mat> Encoder::w1() const {
  const Offsets off = offsets(dims_);
  return {params_.data() + off.w1, static_cast<Index>(dims_.hidden), static_cast<Index>(dims_.input)};
}
Eigen::Map<const Vec> Encoder::b1() const {
  const Offsets off = offsets(dims_);
  return {params_.data() + off.b1, static_cast<Index>(dims_.hidden)};
}
Eigen::Map<const Mat> Encoder::w2() const {
  const Offsets off = offsets(dims_);
  return {params_.data() + off.w2, static_cast<Index>(dims_.output), static_cast<Index>(dims_.hidden)};
}
Eigen::Map<const Vec> Encoder::b2() const {
  const Offsets off = offsets(dims_);
  return {params_.data() + off.b2, static_cast<Index>(dims_.output)};
}

ForwardCache forward_cached(const Encoder& enc, const Mat& x) {
  if (static_cast<std::size_t>(x.cols()) != enc.dims().input) {
    throw Error(ErrorKind::kDimMismatch, "forward: input width does not match encoder");
  }
  ForwardCache c;
  c.input = x;
  c.hidden = ((x * enc.w1().transpose()).rowwise() + enc.b1().transpose()).array().tanh().matrix();
  c.pre_norm = (c.hidden * enc.w2().transpose()).rowwise() + enc.b2().transpose();
  c.norms = c.pre_norm.rowwise().norm();
  c.z.resize(c.pre_norm.rows(), c.pre_norm.cols());
  for (Index i = 0; i < c.z.rows(); ++i) {
    if (c.norms[i] < kZeroNormFloor) {
      c.z.row(i).setZero();
      c.z(i, 0) = 1.0;
    } else {
      c.z.row(i) = c.pre_norm.row(i) / c.norms[i];
    }
  }
  return c;
}

Mat forward(const Encoder& enc, const Mat& x) { return forward_cached(enc, x).z; }

ParamVector backward(const Encoder& enc, const ForwardCache& cache, const Mat& dz) {
  if (dz.rows() != cache.z.rows() || dz.cols() != cache.z.cols()) {
    throw Error(ErrorKind::kDimMismatch, "backward: upstream gradient shape mismatch");
  }
  // Through normalization: dy = (I - z z^T) dz / ||y||.
  Mat dy(dz.rows(), dz.cols());
  for (Index i = 0; i < dz.rows(); ++i) {
    if (cache.norms[i] < kZeroNormFloor) {
      dy.row(i).setZero();
      continue;
    }
    const double radial = cache.z.row(i).dot(dz.row(i));
    dy.row(i) = (dz.row(i) - radial * cache.z.row(i)) / cache.norms[i];
  }

  const Offsets off = offsets(enc.dims());
  ParamVector grad(off.end);
  const auto h = static_cast<Index>(enc.dims().hidden);
  const auto D = static_cast<Index>(enc.dims().input);
  const auto o = static_cast<Index>(enc.dims().output);

  Eigen::Map<Mat> gw2(grad.data() + off.w2, o, h);
  gw2.noalias() = dy.transpose() * cache.hidden;
  grad.segment(off.b2, o) = dy.colwise().sum().transpose();

  const Mat dh = dy * enc.w2();
  const Mat dpre = (dh.array() * (1.0 - cache.hidden.array().square())).matrix();
  Eigen::Map<Mat> gw1(grad.data() + off.w1, h, D);
  gw1.noalias() = dpre.transpose() * cache.input;
  grad.segment(off.b1, h) = dpre.colwise().sum().transpose();
  return grad;
}

ViewPair augment(const Mat& x, const RngStream& rng, double noise_sigma, double mask_prob) {
  if (noise_sigma < 0.0) throw Error(ErrorKind::kDimMismatch, "augment: noise_sigma must be >= 0");
  if (mask_prob < 0.0 || mask_prob >= 1.0) throw Error(ErrorKind::kDimMismatch, "augment: mask_prob outside [0, 1)");
  auto make_view = [&](std::uint64_t view_id) {
    RngStream noise = rng.split({view_id, 0});
    RngStream mask = rng.split({view_id, 1});
    Mat v = x;
    for (Index i = 0; i < v.rows(); ++i) {
      for (Index j = 0; j < v.cols(); ++j) {
        if (noise_sigma > 0.0) v(i, j) += noise_sigma * noise.normal();
        if (mask_prob > 0.0 && mask.uniform() < mask_prob) v(i, j) = 0.0;
      }
    }
    return v;
  };
  return {make_view(1), make_view(2)};
}

double align_loss(const Mat& z1, const Mat& z2) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) {
    throw Error(ErrorKind::kDimMismatch, "align_loss: view shapes differ");
  }
  if (z1.rows() == 0) return 0.0;
  return (z1 - z2).squaredNorm() / static_cast<double>(z1.rows());
}

LossAndGrad total_loss_and_grad(const Encoder& enc, const ViewPair& views, const Mat& anchors1,
                                const Mat& anchors2, double lambda_u, double tau_a, double tau_b,
                                const uot::SolveOptions& uot_opts) {
  const auto d = static_cast<Index>(enc.dims().output);
  if (anchors1.cols() != d || anchors2.cols() != d) {
    throw Error(ErrorKind::kDimMismatch, "total_loss_and_grad: anchor width differs from embedding width");
  }
  const ForwardCache c1 = forward_cached(enc, views.x1);
  const ForwardCache c2 = forward_cached(enc, views.x2);
  const auto batch = static_cast<double>(c1.z.rows());

  LossAndGrad out;
  out.loss.lambda_u = lambda_u;
  out.loss.align = align_loss(c1.z, c2.z);

  const auto p1 = uot::UotProblem::uniform(uot::build_cost(c1.z, anchors1), tau_a, tau_b);
  const auto p2 = uot::UotProblem::uniform(uot::build_cost(c2.z, anchors2), tau_a, tau_b);
  out.plan1 = uot::solve(p1, uot_opts);
  out.plan2 = uot::solve(p2, uot_opts);
  out.loss.uniform1 = out.plan1.objective;
  out.loss.uniform2 = out.plan2.objective;
  out.loss.total = out.loss.align + lambda_u * (out.loss.uniform1 + out.loss.uniform2);

  const Mat diff = (c1.z - c2.z) * (2.0 / batch);
  Mat dz1 = diff;
  Mat dz2 = -diff;
  if (lambda_u != 0.0) {
    dz1 += lambda_u * uot::grad_wrt_embeddings(c1.z, anchors1, out.plan1);
    dz2 += lambda_u * uot::grad_wrt_embeddings(c2.z, anchors2, out.plan2);
  }
  out.grad = backward(enc, c1, dz1) + backward(enc, c2, dz2);
  require_finite(out.grad, "encoder gradient");
  return out;
}

Encoder sgd_step(const Encoder& enc, const ParamVector& grad, double lr, double clip) {
  require_finite(grad, "sgd gradient");
  if (grad.size() != enc.params().size()) throw Error(ErrorKind::kDimMismatch, "sgd_step: gradient length mismatch");
  if (!(lr >= 0.0) || !(clip > 0.0)) throw Error(ErrorKind::kDimMismatch, "sgd_step: lr must be >= 0 and clip > 0");
  const double norm = grad.norm();
  const double scale = norm > clip ? clip / norm : 1.0;
  ParamVector next = enc.params() - (lr * scale) * grad;
  require_finite(next, "encoder parameters");
  return Encoder(enc.dims(), std::move(next));
}

}  // namespace fedrep::ssl
