#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fedrep/config.hpp"
#include "fedrep/federation.hpp"

namespace fedrep::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kMetricsSchema = "fedrep-metrics/1";

enum ExitCode : int {
  kOk = 0,
  kFailed = 1,
  kConfigError = 2,
  kNumericalError = 3,
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Parses "k=v"; throws Error(kConfig) when '=' is missing.
std::pair<std::string, std::string> split_override(const std::string& kv);

/// Reads the config file, applies overrides in order (last wins) and validates.
Config load_config(const std::filesystem::path& path, const Overrides& overrides, std::string* raw_text = nullptr);

/// metrics.csv header (schema line plus column names) for K clients.
std::string metrics_header(int clients);
std::string metrics_row(const fed::RunRecord& rec);

/// Runs one configuration and writes metrics.csv, spectra.csv,
/// embeddings.csv and manifest.json into `out_dir`.
struct RunSummary {
  double final_knn = 0.0;
  double final_effective_rank = 0.0;
  double final_uniformity = 0.0;
  int rounds = 0;
};
RunSummary execute_run(const Config& cfg, const std::string& raw_config, const Overrides& overrides,
                       const std::filesystem::path& out_dir, int jobs);

int cmd_run(const std::filesystem::path& config_path, const Overrides& overrides,
            const std::filesystem::path& out_dir, int jobs, std::ostream& out, std::ostream& err);

struct SweepCell {
  std::uint64_t seed = 0;
  Aggregator aggregator = Aggregator::kEua;
  double lambda_u = 0.0;
  bool ok = false;
  std::string error;
  RunSummary summary;
  std::string dir_name() const;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  bool all_ok() const;
};

/// seeds x aggregators x {lambda_u = 0, lambda_u = cfg.lambda_u}; a failing
/// cell is recorded and the remaining cells still run.
SweepResult run_sweep(const Config& base, const std::string& raw_config, const std::vector<std::uint64_t>& seeds,
                      const std::vector<Aggregator>& aggregators, const std::filesystem::path& out_dir, int jobs);

/// Median of the final metric over the cells matching (aggregator, lambda_u).
double median_knn(const SweepResult& r, Aggregator a, double lambda_u);
double median_effective_rank(const SweepResult& r, Aggregator a, double lambda_u);

int cmd_sweep(const std::filesystem::path& config_path, const std::vector<std::uint64_t>& seeds,
              const std::vector<Aggregator>& aggregators, const Overrides& overrides,
              const std::filesystem::path& out_dir, int jobs, std::ostream& out, std::ostream& err);

/// `oracle uot-dense|qp-grid|gradcheck`; args are the remaining flags.
struct OracleArgs {
  int n = 4;
  int m = 4;
  int k = 3;
  int trials = 20;
  std::uint64_t seed = 7;
};
int cmd_oracle(const std::string& sub, const OracleArgs& args, std::ostream& out, std::ostream& err);

/// Entry point shared by the binary and the CLI tests.
int main_with_args(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fedrep::cli
