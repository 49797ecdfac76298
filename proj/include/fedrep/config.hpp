#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedrep/aggregator.hpp"

namespace fedrep {

enum class Aggregator { kFedAvg, kEua };
enum class AnchorMode { kFixed, kFresh };

std::string_view to_string(Aggregator a);
std::string_view to_string(AnchorMode a);
std::string_view to_string(agg::EuaBase b);

/// Every experiment knob.
struct Config {
  std::uint64_t seed = 1;
  // data
  int num_classes = 4;
  int per_class = 100;
  int dim = 8;
  double spread = 3.0;
  // federation
  int clients = 4;  // K
  double alpha = 0.1;
  double participation = 1.0;
  int rounds = 20;       // T
  int local_epochs = 2;  // E
  int batch = 32;        // B
  double lr = 0.05;
  double clip = 5.0;
  // model
  int hidden = 16;
  int embed_dim = 4;
  double noise_sigma = 0.3;
  double mask_prob = 0.1;
  // uniformity regularizer
  double lambda_u = 0.1;
  double tau_a = 0.8;
  double tau_b = 0.8;
  AnchorMode anchors = AnchorMode::kFresh;
  int uot_max_iters = 500;
  double uot_tol = 1e-8;
  // aggregation
  Aggregator aggregator = Aggregator::kEua;
  agg::EuaBase eua_base = agg::EuaBase::kKeep;
  double eta_g = 1.0;
  /// Unset means the adaptive step sqrt(sum_k p_k u_k).
  std::optional<double> eta_global;
  double phi = 0.1;
  double rho = 1.0;
  int admm_max_iters = 1000;
  double admm_tol = 1e-8;
  // evaluation
  int eval_every = 5;
  int knn_k = 5;

  /// Throws Error(kConfig) naming the offending key.
  void validate() const;
};

/// Sets one key from its textual value. Throws Error(kConfig) naming the key.
void set_config_value(Config& cfg, std::string_view key, std::string_view value);

/// Parses `key = value` lines. '#' starts a comment; blank lines are ignored.
Config parse_config(std::string_view text);

/// Canonical `key = value` rendering of every key, in a fixed order.
std::string render_config(const Config& cfg);

/// All recognized keys in rendering order.
const std::vector<std::string>& config_keys();

}  // namespace fedrep
