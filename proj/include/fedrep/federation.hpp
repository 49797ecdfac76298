#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fedrep/config.hpp"
#include "fedrep/diagnostics.hpp"
#include "fedrep/numerics.hpp"
#include "fedrep/rng.hpp"
#include "fedrep/ssl.hpp"

namespace fedrep::fed {

/// Gaussian class clusters with an 80/20 stratified train/test split.
///
/// Labels are private: the only accessor is `labels()`, which counts its
/// calls so tests can assert that client training never reads them.
class SyntheticDataset {
 public:
  SyntheticDataset(Mat features, std::vector<int> labels, int num_classes,
                   std::vector<std::size_t> train, std::vector<std::size_t> test);

  const Mat& features() const { return features_; }
  std::size_t size() const { return static_cast<std::size_t>(features_.rows()); }
  int num_classes() const { return num_classes_; }
  const std::vector<std::size_t>& train_indices() const { return train_; }
  const std::vector<std::size_t>& test_indices() const { return test_; }

  /// Evaluation and partitioning only.
  std::span<const int> labels() const;
  std::size_t label_reads() const { return label_reads_; }

  /// Feature rows at `indices`.
  Mat gather(std::span<const std::size_t> indices) const;
  /// Labels at `indices` (counts as one label read).
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;

 private:
  Mat features_;
  std::vector<int> labels_;
  int num_classes_;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> test_;
  mutable std::size_t label_reads_ = 0;
};

SyntheticDataset make_dataset(RngStream& rng, int num_classes, int per_class, int dim, double spread);

struct ClientShard {
  int client_id = 0;
  std::vector<std::size_t> indices;
  std::vector<std::size_t> class_histogram;
};

/// Per class, proportions ~ Dir(alpha 1_K) split that class's training
/// indices. Empty shards take one sample from the largest shard.
std::vector<ClientShard> dirichlet_partition(const SyntheticDataset& ds, int clients, double alpha,
                                             RngStream& rng);

/// Throws kNumerical unless shards are disjoint, non-empty and cover `train`.
void check_partition(std::span<const ClientShard> shards, std::span<const std::size_t> train);

/// What a client sees: features and its own indices. No label path exists.
struct ClientView {
  const Mat& features;
  std::span<const std::size_t> indices;
};

struct ClientUpdate {
  ParamVector params;
  ssl::LossBreakdown mean_loss;
  std::size_t steps = 0;
};

/// Shared anchors for AnchorMode::kFixed (one set per view).
struct FixedAnchors {
  Mat view1;
  Mat view2;
};

/// Copies theta_g and runs E epochs of shuffled minibatch SGD on the
/// regularized two-view loss. Randomness comes from (seed, client, round).
ClientUpdate client_execute(int client, const ParamVector& theta_g, const ClientView& data,
                            const Config& cfg, int round, const FixedAnchors* fixed = nullptr);

/// SGD steps one client takes per round.
std::size_t local_steps(std::size_t shard_size, const Config& cfg);

struct RunRecord {
  int round = 0;
  double align = 0.0;
  double uniform = 0.0;
  Vec p;
  Vec rates;
  diag::LemmaCheck lemma;
  std::size_t lemma_steps = 0;
  bool evaluated = false;
  double knn = 0.0;
  double uniformity = 0.0;
  double alignment_gap = 0.0;
  double effective_rank = 0.0;
  diag::SpectrumReport global_spectrum;
  std::vector<diag::SpectrumReport> client_spectra;
  double raw_norm = 0.0;
  double eta_global = 0.0;
  int admm_iters = 0;
  double primal_residual = 0.0;
};

struct RunResult {
  std::vector<RunRecord> records;
  /// Global parameters before round 1 and after every round.
  std::vector<ParamVector> trajectory;
  ssl::EncoderDims dims;
};

struct RunOptions {
  /// Worker threads for the per-round client loop (<= 0: OpenMP default).
  int jobs = 1;
  /// Called after each round with the record just produced.
  std::function<void(const RunRecord&)> on_round;
};

/// Builds the dataset and shards for `cfg` (deterministic in cfg.seed).
struct Setup {
  SyntheticDataset dataset;
  std::vector<ClientShard> shards;
  ssl::EncoderDims dims;
  ParamVector initial;
};
Setup make_setup(const Config& cfg);

RunResult run(const Config& cfg, const RunOptions& opts = {});
RunResult run(const Config& cfg, const Setup& setup, const RunOptions& opts = {});

/// Global-model embeddings of every sample, for evaluation and export.
Mat embed(const ssl::EncoderDims& dims, const ParamVector& theta, const Mat& x);

}  // namespace fedrep::fed
