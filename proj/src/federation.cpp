#include "fedrep/federation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>

#include <omp.h>

#include "fedrep/aggregator.hpp"

namespace fedrep::fed {

namespace {

using Index = Eigen::Index;

// Stream ids under the run seed.
enum : std::uint64_t {
  kDataStream = 1,
  kPartitionStream = 2,
  kInitStream = 3,
  kClientStream = 4,
  kAnchorStream = 5,
  kEvalStream = 6,
};

ssl::EncoderDims dims_of(const Config& cfg) {
  return {static_cast<std::size_t>(cfg.dim), static_cast<std::size_t>(cfg.hidden),
          static_cast<std::size_t>(cfg.embed_dim)};
}

}  // namespace

SyntheticDataset::SyntheticDataset(Mat features, std::vector<int> labels, int num_classes,
                                   std::vector<std::size_t> train, std::vector<std::size_t> test)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      train_(std::move(train)),
      test_(std::move(test)) {
  if (static_cast<std::size_t>(features_.rows()) != labels_.size()) {
    throw Error(ErrorKind::kDimMismatch, "dataset: label count differs from row count");
  }
}

std::span<const int> SyntheticDataset::labels() const {
  ++label_reads_;
  return labels_;
}

Mat SyntheticDataset::gather(std::span<const std::size_t> indices) const {
  Mat out(static_cast<Index>(indices.size()), features_.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) out.row(static_cast<Index>(i)) = features_.row(static_cast<Index>(indices[i]));
  return out;
}

std::vector<int> SyntheticDataset::gather_labels(std::span<const std::size_t> indices) const {
  const auto all = labels();
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(all[i]);
  return out;
}

SyntheticDataset make_dataset(RngStream& rng, int num_classes, int per_class, int dim, double spread) {
  if (num_classes < 2 || per_class < 4 || dim < 2) {
    throw Error(ErrorKind::kConfig, "make_dataset: need num_classes >= 2, per_class >= 4, dim >= 2");
  }
  Mat centers = gaussian_matrix(rng, static_cast<std::size_t>(num_classes), static_cast<std::size_t>(dim));
  for (Index c = 0; c < centers.rows(); ++c) {
    const double n = centers.row(c).norm();
    centers.row(c) *= n > 0.0 ? spread / n : 0.0;
  }
  const Index total = static_cast<Index>(num_classes) * per_class;
  Mat features(total, dim);
  std::vector<int> labels(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) {
    const int c = static_cast<int>(i / per_class);
    labels[static_cast<std::size_t>(i)] = c;
    for (Index j = 0; j < dim; ++j) features(i, j) = centers(c, j) + rng.normal();
  }
  const int train_per_class = (per_class * 4) / 5;
  std::vector<std::size_t> train, test;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(per_class));
    std::iota(idx.begin(), idx.end(), static_cast<std::size_t>(c) * static_cast<std::size_t>(per_class));
    shuffle(std::span<std::size_t>(idx), rng);
    train.insert(train.end(), idx.begin(), idx.begin() + train_per_class);
    test.insert(test.end(), idx.begin() + train_per_class, idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return SyntheticDataset(std::move(features), std::move(labels), num_classes, std::move(train), std::move(test));
}

std::vector<ClientShard> dirichlet_partition(const SyntheticDataset& ds, int clients, double alpha, RngStream& rng) {
  if (clients < 1) throw Error(ErrorKind::kConfig, "dirichlet_partition: K must be >= 1");
  if (!(alpha > 0.0)) throw Error(ErrorKind::kConfig, "dirichlet_partition: alpha must be > 0");
  const auto labels = ds.labels();
  const auto K = static_cast<std::size_t>(clients);
  std::vector<ClientShard> shards(K);
  for (std::size_t k = 0; k < K; ++k) shards[k].client_id = static_cast<int>(k);

  for (int c = 0; c < ds.num_classes(); ++c) {
    std::vector<std::size_t> idx;
    for (auto i : ds.train_indices())
      if (labels[i] == c) idx.push_back(i);
    shuffle(std::span<std::size_t>(idx), rng);

    std::vector<double> props(K);
    double total = 0.0;
    for (auto& p : props) total += (p = rng.gamma(alpha));
    if (!(total > 0.0)) {
      // Every draw underflowed; put the class on one client.
      std::fill(props.begin(), props.end(), 0.0);
      props[rng.below(K)] = 1.0;
      total = 1.0;
    }
    double cumulative = 0.0;
    std::size_t start = 0;
    for (std::size_t k = 0; k < K; ++k) {
      cumulative += props[k] / total;
      const std::size_t end =
          k + 1 == K ? idx.size()
                     : std::min(idx.size(), static_cast<std::size_t>(std::llround(cumulative * static_cast<double>(idx.size()))));
      for (std::size_t i = start; i < std::max(start, end); ++i) shards[k].indices.push_back(idx[i]);
      start = std::max(start, end);
    }
  }

  for (auto& shard : shards) {
    if (!shard.indices.empty()) continue;
    auto largest = std::max_element(shards.begin(), shards.end(),
                                    [](const ClientShard& a, const ClientShard& b) { return a.indices.size() < b.indices.size(); });
    if (largest->indices.size() < 2) throw Error(ErrorKind::kConfig, "dirichlet_partition: too few samples for K clients");
    shard.indices.push_back(largest->indices.back());
    largest->indices.pop_back();
  }
  for (auto& shard : shards) {
    std::sort(shard.indices.begin(), shard.indices.end());
    shard.class_histogram.assign(static_cast<std::size_t>(ds.num_classes()), 0);
    for (auto i : shard.indices) ++shard.class_histogram[static_cast<std::size_t>(labels[i])];
  }
  return shards;
}

void check_partition(std::span<const ClientShard> shards, std::span<const std::size_t> train) {
  std::vector<std::size_t> seen;
  for (const auto& s : shards) {
    if (s.indices.empty()) throw Error(ErrorKind::kNumerical, "partition: client " + std::to_string(s.client_id) + " is empty");
    seen.insert(seen.end(), s.indices.begin(), s.indices.end());
  }
  std::sort(seen.begin(), seen.end());
  std::vector<std::size_t> expected(train.begin(), train.end());
  std::sort(expected.begin(), expected.end());
  if (seen != expected) throw Error(ErrorKind::kNumerical, "partition: shards are not a disjoint cover of the training split");
}

std::size_t local_steps(std::size_t shard_size, const Config& cfg) {
  const auto b = static_cast<std::size_t>(cfg.batch);
  return static_cast<std::size_t>(cfg.local_epochs) * ((shard_size + b - 1) / b);
}

ClientUpdate client_execute(int client, const ParamVector& theta_g, const ClientView& data, const Config& cfg,
                            int round, const FixedAnchors* fixed) {
  ClientUpdate out;
  out.params = theta_g;
  if (cfg.local_epochs == 0 || data.indices.empty()) return out;
  try {
    const auto dims = dims_of(cfg);
    const RngStream base = RngStream(cfg.seed, kClientStream).split({static_cast<std::uint64_t>(client),
                                                                     static_cast<std::uint64_t>(round)});
    uot::SolveOptions uot_opts;
    uot_opts.max_iters = cfg.uot_max_iters;
    uot_opts.tol = cfg.uot_tol;

    ssl::Encoder enc(dims, theta_g);
    std::vector<std::size_t> order(data.indices.begin(), data.indices.end());
    const auto batch = static_cast<std::size_t>(cfg.batch);
    const auto anchor_count = batch;
    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
      RngStream epoch_rng = base.split({0, static_cast<std::uint64_t>(epoch)});
      shuffle(std::span<std::size_t>(order), epoch_rng);
      for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
        const std::size_t stop = std::min(order.size(), start + batch);
        Mat x(static_cast<Index>(stop - start), data.features.cols());
        for (std::size_t i = start; i < stop; ++i) x.row(static_cast<Index>(i - start)) = data.features.row(static_cast<Index>(order[i]));

        const RngStream step_rng = base.split({1, static_cast<std::uint64_t>(epoch), b});
        const ssl::ViewPair views = ssl::augment(x, step_rng.split(0), cfg.noise_sigma, cfg.mask_prob);
        Mat s1, s2;
        if (fixed != nullptr) {
          s1 = fixed->view1;
          s2 = fixed->view2;
        } else {
          RngStream a1 = step_rng.split(1), a2 = step_rng.split(2);
          s1 = uot::sample_anchors(a1, anchor_count, dims.output);
          s2 = uot::sample_anchors(a2, anchor_count, dims.output);
        }
        const auto lg = ssl::total_loss_and_grad(enc, views, s1, s2, cfg.lambda_u, cfg.tau_a, cfg.tau_b, uot_opts);
        enc = ssl::sgd_step(enc, lg.grad, cfg.lr, cfg.clip);
        out.mean_loss.total += lg.loss.total;
        out.mean_loss.align += lg.loss.align;
        out.mean_loss.uniform1 += lg.loss.uniform1;
        out.mean_loss.uniform2 += lg.loss.uniform2;
        ++out.steps;
      }
    }
    if (out.steps > 0) {
      const auto n = static_cast<double>(out.steps);
      out.mean_loss.total /= n;
      out.mean_loss.align /= n;
      out.mean_loss.uniform1 /= n;
      out.mean_loss.uniform2 /= n;
    }
    out.mean_loss.lambda_u = cfg.lambda_u;
    out.params = enc.params();
  } catch (const Error& e) {
    throw Error(e.kind(), "client " + std::to_string(client) + ", round " + std::to_string(round) + ": " + e.what());
  }
  return out;
}

Mat embed(const ssl::EncoderDims& dims, const ParamVector& theta, const Mat& x) {
  return ssl::forward(ssl::Encoder(dims, theta), x);
}

Setup make_setup(const Config& cfg) {
  cfg.validate();
  RngStream data_rng(cfg.seed, kDataStream);
  RngStream part_rng(cfg.seed, kPartitionStream);
  RngStream init_rng(cfg.seed, kInitStream);
  SyntheticDataset ds = make_dataset(data_rng, cfg.num_classes, cfg.per_class, cfg.dim, cfg.spread);
  auto shards = dirichlet_partition(ds, cfg.clients, cfg.alpha, part_rng);
  check_partition(shards, ds.train_indices());
  const auto dims = dims_of(cfg);
  ParamVector initial = ssl::Encoder::init(dims, init_rng).params();
  return Setup{std::move(ds), std::move(shards), dims, std::move(initial)};
}

namespace {

void evaluate(const Config& cfg, const Setup& setup, const ParamVector& theta, std::span<const ParamVector> client_params,
              int round, RunRecord& rec) {
  const auto& ds = setup.dataset;
  const Mat train_x = ds.gather(ds.train_indices());
  const Mat test_x = ds.gather(ds.test_indices());
  const Mat train_z = embed(setup.dims, theta, train_x);
  const Mat test_z = embed(setup.dims, theta, test_x);
  const auto train_y = ds.gather_labels(ds.train_indices());
  const auto test_y = ds.gather_labels(ds.test_indices());
  const int k = std::min<int>(cfg.knn_k, static_cast<int>(train_z.rows()));

  rec.evaluated = true;
  rec.knn = diag::knn_eval(train_z, train_y, test_z, test_y, k);
  rec.uniformity = diag::uniformity(test_z);
  rec.global_spectrum = diag::covariance_spectrum(test_z);
  rec.effective_rank = rec.global_spectrum.effective_rank;

  const RngStream eval_rng = RngStream(cfg.seed, kEvalStream).split(static_cast<std::uint64_t>(round));
  const auto views = ssl::augment(test_x, eval_rng, cfg.noise_sigma, cfg.mask_prob);
  rec.alignment_gap = ssl::align_loss(embed(setup.dims, theta, views.x1), embed(setup.dims, theta, views.x2));

  rec.client_spectra.clear();
  for (std::size_t c = 0; c < client_params.size(); ++c) {
    const auto& idx = setup.shards[c].indices;
    if (idx.size() < 2) {
      rec.client_spectra.push_back({});
      continue;
    }
    rec.client_spectra.push_back(diag::covariance_spectrum(embed(setup.dims, client_params[c], ds.gather(idx))));
  }
}

}  // namespace

RunResult run(const Config& cfg, const RunOptions& opts) { return run(cfg, make_setup(cfg), opts); }

RunResult run(const Config& cfg, const Setup& setup, const RunOptions& opts) {
  cfg.validate();
  RunResult result;
  result.dims = setup.dims;
  ParamVector theta = setup.initial;
  result.trajectory.push_back(theta);

  const auto K = static_cast<std::size_t>(cfg.clients);
  std::vector<std::size_t> counts(K);
  std::size_t max_steps = 0;
  for (std::size_t k = 0; k < K; ++k) {
    counts[k] = setup.shards[k].indices.size();
    max_steps = std::max(max_steps, local_steps(counts[k], cfg));
  }

  FixedAnchors fixed;
  if (cfg.anchors == AnchorMode::kFixed) {
    RngStream a1 = RngStream(cfg.seed, kAnchorStream).split(1);
    RngStream a2 = RngStream(cfg.seed, kAnchorStream).split(2);
    fixed.view1 = uot::sample_anchors(a1, static_cast<std::size_t>(cfg.batch), setup.dims.output);
    fixed.view2 = uot::sample_anchors(a2, static_cast<std::size_t>(cfg.batch), setup.dims.output);
  }
  const FixedAnchors* fixed_ptr = cfg.anchors == AnchorMode::kFixed ? &fixed : nullptr;

  agg::EuaOptions eua;
  eua.admm = {cfg.eta_g, cfg.phi, cfg.rho, cfg.admm_max_iters, cfg.admm_tol};
  eua.base = cfg.eua_base;
  eua.eta_global = cfg.eta_global;

  const int jobs = opts.jobs > 0 ? opts.jobs : omp_get_max_threads();
  const Mat& features = setup.dataset.features();

  for (int round = 1; round <= cfg.rounds; ++round) {
    std::vector<ClientUpdate> updates(K);
    std::vector<std::exception_ptr> failures(K);
#pragma omp parallel for num_threads(jobs) schedule(dynamic)
    for (std::size_t k = 0; k < K; ++k) {
      try {
        updates[k] = client_execute(static_cast<int>(k), theta, ClientView{features, setup.shards[k].indices}, cfg,
                                    round, fixed_ptr);
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
    // Report the lowest failing client id, independent of scheduling.
    for (auto& f : failures)
      if (f) std::rethrow_exception(f);

    std::vector<ParamVector> thetas;
    thetas.reserve(K);
    for (auto& u : updates) thetas.push_back(u.params);

    RunRecord rec;
    rec.round = round;
    for (const auto& u : updates) {
      rec.align += u.mean_loss.align;
      rec.uniform += 0.5 * (u.mean_loss.uniform1 + u.mean_loss.uniform2);
    }
    rec.align /= static_cast<double>(K);
    rec.uniform /= static_cast<double>(K);

    ParamVector next;
    try {
      if (cfg.aggregator == Aggregator::kEua) {
        auto r = agg::eua_aggregate(theta, thetas, counts, eua);
        next = std::move(r.theta);
        rec.p = r.weights.p;
        rec.rates = r.rates;
        rec.raw_norm = r.dir.raw_norm;
        rec.eta_global = r.eta_global;
        rec.admm_iters = r.weights.admm_iters;
        rec.primal_residual = r.weights.primal_residual;
      } else {
        next = agg::fedavg(thetas, counts);
        rec.p = agg::sample_ratio_weights(counts);
        // Rates of the implied update theta -> next, read as a unit step along theta - next.
        const auto dev = agg::deviations(theta, thetas);
        agg::UpdateDirection implied{theta - next, 0.0};
        implied.raw_norm = implied.d.norm();
        rec.rates = diag::deviation_rate_report(dev, implied, 1.0).first_order;
        rec.raw_norm = implied.raw_norm;
        rec.eta_global = 1.0;
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "round " + std::to_string(round) + " aggregation: " + e.what());
    }

    rec.lemma_steps = max_steps;
    rec.lemma = diag::lemma1_check(rec.p, theta, thetas, cfg.lr, std::max<std::size_t>(1, max_steps), cfg.clip);
    if (!rec.lemma.ok && max_steps >= 2) {
      throw Error(ErrorKind::kNumerical, "round " + std::to_string(round) + ": client divergence " +
                                             std::to_string(rec.lemma.lhs) + " exceeds bound " + std::to_string(rec.lemma.rhs));
    }

    theta = std::move(next);
    require_finite(theta, "global model");
    if (round % cfg.eval_every == 0 || round == cfg.rounds) evaluate(cfg, setup, theta, thetas, round, rec);

    result.trajectory.push_back(theta);
    if (opts.on_round) opts.on_round(rec);
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace fedrep::fed
