#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedrep/aggregator.hpp"
#include "fedrep/diagnostics.hpp"
#include "fedrep/oracles.hpp"
#include "fedrep/rng.hpp"
#include "fedrep/uot.hpp"

namespace fedrep::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json manifest_json(const Config& cfg, const std::string& raw, const Overrides& overrides, const fs::path& out_dir) {
  json j;
  j["tool"] = "fedrep";
  j["version"] = kToolVersion;
  j["metrics_schema"] = kMetricsSchema;
  j["config_text"] = raw;
  j["overrides"] = json::array();
  for (const auto& [k, v] : overrides) j["overrides"].push_back(k + "=" + v);
  j["resolved_config"] = render_config(cfg);
  j["seeds"] = json::array({cfg.seed});
  j["aggregator"] = std::string(to_string(cfg.aggregator));
  j["eua_base"] = std::string(to_string(cfg.eua_base));
  j["eta_g"] = cfg.eta_g;
  j["eta_global"] = cfg.eta_global ? json(*cfg.eta_global) : json("auto");
  j["knn_k"] = cfg.knn_k;
  j["output_dir"] = out_dir.string();
  return j;
}

}  // namespace

std::pair<std::string, std::string> split_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw Error(ErrorKind::kConfig, "override '" + kv + "' is not key=value");
  return {kv.substr(0, eq), kv.substr(eq + 1)};
}

Config load_config(const fs::path& path, const Overrides& overrides, std::string* raw_text) {
  const std::string raw = read_file(path);
  Config cfg = parse_config(raw);
  for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
  cfg.validate();
  if (raw_text) *raw_text = raw;
  return cfg;
}

std::string metrics_header(int clients) {
  std::string h = std::string("# schema: ") + kMetricsSchema + "\nround,align,uniform";
  for (int k = 1; k <= clients; ++k) h += ",p_" + std::to_string(k);
  for (int k = 1; k <= clients; ++k) h += ",c_" + std::to_string(k);
  h += ",lemma1_lhs,lemma1_rhs,knn,effective_rank,raw_norm\n";
  return h;
}

std::string metrics_row(const fed::RunRecord& rec) {
  std::string row = std::to_string(rec.round) + "," + num(rec.align) + "," + num(rec.uniform);
  for (Eigen::Index k = 0; k < rec.p.size(); ++k) row += "," + num(rec.p[k]);
  for (Eigen::Index k = 0; k < rec.rates.size(); ++k) row += "," + num(rec.rates[k]);
  row += "," + num(rec.lemma.lhs) + "," + num(rec.lemma.rhs);
  row += "," + (rec.evaluated ? num(rec.knn) : std::string());
  row += "," + (rec.evaluated ? num(rec.effective_rank) : std::string());
  row += "," + num(rec.raw_norm) + "\n";
  return row;
}

RunSummary execute_run(const Config& cfg, const std::string& raw_config, const Overrides& overrides,
                       const fs::path& out_dir, int jobs) {
  fs::create_directories(out_dir);
  json manifest = manifest_json(cfg, raw_config, overrides, out_dir);
  {
    auto m = open_out(out_dir / "manifest.json");
    m << manifest.dump(2) << '\n';
  }

  const auto t0 = std::chrono::steady_clock::now();
  const fed::Setup setup = fed::make_setup(cfg);
  auto metrics = open_out(out_dir / "metrics.csv");
  auto spectra = open_out(out_dir / "spectra.csv");
  metrics << metrics_header(cfg.clients);
  spectra << "round,source,index,singular_value,log_value\n";
  metrics.flush();

  RunSummary summary;
  fed::RunOptions opts;
  opts.jobs = jobs;
  opts.on_round = [&](const fed::RunRecord& rec) {
    metrics << metrics_row(rec);
    if (!rec.evaluated) return;
    auto dump = [&](const std::string& source, const diag::SpectrumReport& s) {
      for (Eigen::Index i = 0; i < s.singular_values.size(); ++i) {
        spectra << rec.round << ',' << source << ',' << i << ',' << num(s.singular_values[i]) << ','
                << num(s.log_values[i]) << '\n';
      }
    };
    dump("global", rec.global_spectrum);
    for (std::size_t c = 0; c < rec.client_spectra.size(); ++c) dump("client_" + std::to_string(c + 1), rec.client_spectra[c]);
    summary.final_knn = rec.knn;
    summary.final_effective_rank = rec.effective_rank;
    summary.final_uniformity = rec.uniformity;
  };
  const fed::RunResult result = fed::run(cfg, setup, opts);
  summary.rounds = static_cast<int>(result.records.size());

  if (!result.records.empty()) {
    auto emb = open_out(out_dir / "embeddings.csv");
    const Mat z = fed::embed(result.dims, result.trajectory.back(), setup.dataset.features());
    const auto labels = setup.dataset.labels();
    emb << "id,label";
    for (Eigen::Index c = 0; c < z.cols(); ++c) emb << ",z_" << (c + 1);
    emb << '\n';
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      emb << i << ',' << labels[static_cast<std::size_t>(i)];
      for (Eigen::Index c = 0; c < z.cols(); ++c) emb << ',' << num(z(i, c));
      emb << '\n';
    }
  }

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["timings"] = {{"wall_seconds", seconds}};
  auto m = open_out(out_dir / "manifest.json");
  m << manifest.dump(2) << '\n';
  return summary;
}

int cmd_run(const fs::path& config_path, const Overrides& overrides, const fs::path& out_dir, int jobs,
            std::ostream& out, std::ostream& err) {
  Config cfg;
  std::string raw;
  try {
    cfg = load_config(config_path, overrides, &raw);
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    const auto s = execute_run(cfg, raw, overrides, out_dir, jobs);
    out << "rounds=" << s.rounds << " knn=" << num(s.final_knn) << " effective_rank=" << num(s.final_effective_rank)
        << " out=" << out_dir.string() << '\n';
    return kOk;
  } catch (const Error& e) {
    err << "run failed: " << e.what() << '\n';
    return e.kind() == ErrorKind::kConfig ? kConfigError : kNumericalError;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << '\n';
    return kFailed;
  }
}

std::string SweepCell::dir_name() const {
  return "seed" + std::to_string(seed) + "_" + std::string(to_string(aggregator)) + (lambda_u > 0.0 ? "_fur" : "_nofur");
}

bool SweepResult::all_ok() const {
  return std::all_of(cells.begin(), cells.end(), [](const SweepCell& c) { return c.ok; });
}

SweepResult run_sweep(const Config& base, const std::string& raw_config, const std::vector<std::uint64_t>& seeds,
                      const std::vector<Aggregator>& aggregators, const fs::path& out_dir, int jobs) {
  SweepResult r;
  std::vector<double> lambdas{0.0};
  if (base.lambda_u > 0.0) lambdas.push_back(base.lambda_u);
  for (auto seed : seeds)
    for (auto a : aggregators)
      for (double l : lambdas) r.cells.push_back({seed, a, l, false, {}, {}});

  fs::create_directories(out_dir);
  const int n = static_cast<int>(r.cells.size());
#pragma omp parallel for num_threads(std::max(1, jobs)) schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    auto& cell = r.cells[static_cast<std::size_t>(i)];
    Config cfg = base;
    cfg.seed = cell.seed;
    cfg.aggregator = cell.aggregator;
    cfg.lambda_u = cell.lambda_u;
    const Overrides ov{{"seed", std::to_string(cell.seed)},
                       {"aggregator", std::string(to_string(cell.aggregator))},
                       {"lambda_u", num(cell.lambda_u)}};
    try {
      cell.summary = execute_run(cfg, raw_config, ov, out_dir / cell.dir_name(), 1);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  }

  auto summary = open_out(out_dir / "summary.csv");
  summary << "seed,aggregator,lambda_u,status,final_knn,final_effective_rank,final_uniformity\n";
  for (const auto& c : r.cells) {
    summary << c.seed << ',' << to_string(c.aggregator) << ',' << num(c.lambda_u) << ',' << (c.ok ? "ok" : "failed")
            << ',' << (c.ok ? num(c.summary.final_knn) : "") << ',' << (c.ok ? num(c.summary.final_effective_rank) : "")
            << ',' << (c.ok ? num(c.summary.final_uniformity) : "") << '\n';
  }
  auto medians = open_out(out_dir / "medians.csv");
  medians << "aggregator,lambda_u,median_knn,median_effective_rank\n";
  for (auto a : aggregators) {
    for (double l : lambdas) {
      medians << to_string(a) << ',' << num(l) << ',' << num(median_knn(r, a, l)) << ','
              << num(median_effective_rank(r, a, l)) << '\n';
    }
  }
  return r;
}

namespace {

std::vector<double> collect(const SweepResult& r, Aggregator a, double lambda_u, bool knn) {
  std::vector<double> v;
  for (const auto& c : r.cells)
    if (c.ok && c.aggregator == a && c.lambda_u == lambda_u) v.push_back(knn ? c.summary.final_knn : c.summary.final_effective_rank);
  return v;
}

}  // namespace

double median_knn(const SweepResult& r, Aggregator a, double lambda_u) { return median(collect(r, a, lambda_u, true)); }
double median_effective_rank(const SweepResult& r, Aggregator a, double lambda_u) {
  return median(collect(r, a, lambda_u, false));
}

int cmd_sweep(const fs::path& config_path, const std::vector<std::uint64_t>& seeds, const std::vector<Aggregator>& aggregators,
              const Overrides& overrides, const fs::path& out_dir, int jobs, std::ostream& out, std::ostream& err) {
  if (seeds.empty()) {
    err << "config error: sweep needs at least one seed\n";
    return kConfigError;
  }
  Config cfg;
  std::string raw;
  try {
    cfg = load_config(config_path, overrides, &raw);
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  SweepResult r;
  try {
    r = run_sweep(cfg, raw, seeds, aggregators, out_dir, jobs);
  } catch (const std::exception& e) {
    err << "sweep failed: " << e.what() << '\n';
    return kFailed;
  }
  for (const auto& c : r.cells) {
    out << c.dir_name() << ": " << (c.ok ? "ok knn=" + num(c.summary.final_knn) + " erank=" + num(c.summary.final_effective_rank)
                                         : "FAILED " + c.error)
        << '\n';
  }
  return r.all_ok() ? kOk : kFailed;
}

int cmd_oracle(const std::string& sub, const OracleArgs& args, std::ostream& out, std::ostream& err) {
  RngStream rng(args.seed, 0x0AC1E);
  if (sub == "uot-dense") {
    double worst = 0.0;
    for (int t = 0; t < args.trials; ++t) {
      const Mat z = uot::sample_anchors(rng, static_cast<std::size_t>(args.n), 3);
      const Mat s = uot::sample_anchors(rng, static_cast<std::size_t>(args.m), 3);
      const double ta = 2.0 * rng.uniform(), tb = 2.0 * rng.uniform();
      const auto prob = uot::UotProblem::uniform(uot::build_cost(z, s), ta, tb);
      Mat pi(args.n, args.m);
      for (Eigen::Index i = 0; i < pi.size(); ++i) pi.data()[i] = rng.uniform() / args.n;
      const double obj_gap = std::abs(uot::objective(prob, pi) -
                                      oracle::dense_uot_objective(prob.cost, prob.a, prob.b, ta, tb, pi));
      const Vec dense_q = oracle::dense_q(args.n, args.m, ta, tb) * oracle::vec(pi);
      const double q_gap = (oracle::vec(uot::apply_q(prob, pi)) - dense_q).cwiseAbs().maxCoeff();
      worst = std::max({worst, obj_gap, q_gap});
    }
    out << "uot-dense max discrepancy " << num(worst) << " (tolerance 1e-10)\n";
    return worst < 1e-10 ? kOk : kFailed;
  }
  if (sub == "qp-grid") {
    double worst = 0.0, worst_sum = 0.0, worst_grid = 0.0;
    const agg::AdmmOptions opts;
    const double scale = opts.eta_g * opts.eta_g / (2.0 * opts.phi);
    for (int t = 0; t < args.trials; ++t) {
      const Mat r = gaussian_matrix(rng, static_cast<std::size_t>(args.k), static_cast<std::size_t>(args.k));
      const Mat g = r.transpose() * r;
      const auto w = agg::solve_weights_admm(g, opts);
      const auto exact = oracle::simplex_qp_active_set(g);
      worst = std::max(worst, std::abs(agg::dual_objective(g, w.p, opts.eta_g, opts.phi) - scale * exact.value));
      worst_sum = std::max(worst_sum, std::abs(w.p.sum() - 1.0) + std::max(0.0, -w.p.minCoeff()));
      if (args.k <= 3) {
        const auto grid = oracle::simplex_qp_grid(g, 1e-3);
        worst_grid = std::max(worst_grid, agg::dual_objective(g, w.p, opts.eta_g, opts.phi) - scale * grid.value);
      }
    }
    out << "qp-grid dual objective gap " << num(worst) << " (tolerance 1e-6), simplex violation " << num(worst_sum);
    if (args.k <= 3) out << ", excess over grid " << num(worst_grid);
    out << '\n';
    return worst < 1e-6 && worst_sum <= 1e-6 && worst_grid <= 1e-6 ? kOk : kFailed;
  }
  if (sub == "gradcheck") {
    double ssl_worst = 0.0, dev_worst = 0.0;
    for (int t = 0; t < args.trials; ++t) {
      ssl_worst = std::max(ssl_worst, oracle::ssl_gradcheck(args.seed + static_cast<std::uint64_t>(t)).rel_error);
      dev_worst = std::max(dev_worst, oracle::deviation_gradcheck(args.seed + static_cast<std::uint64_t>(t)).rel_error);
    }
    out << "gradcheck ssl relative error " << num(ssl_worst) << " (tolerance 1e-4), log-deviation relative error "
        << num(dev_worst) << " (tolerance 1e-6)\n";
    return ssl_worst < 1e-4 && dev_worst < 1e-6 ? kOk : kFailed;
  }
  err << "unknown oracle '" << sub << "' (expected uot-dense, qp-grid or gradcheck)\n";
  return kConfigError;
}

int main_with_args(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated unsupervised representation learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "fedrep_out";
  std::vector<std::string> sets;
  int jobs = 1;
  int rounds = -1;
  auto* run = app.add_subcommand("run", "Run one federated training experiment");
  run->add_option("--config", config_path, "Config file (key = value lines)")->required();
  run->add_option("--set", sets, "Override key=value (repeatable, last wins)");
  run->add_option("--rounds", rounds, "Shorthand for --set rounds=N");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--jobs", jobs, "Parallel clients per round");

  std::string seeds_arg, aggregators_arg = "fedavg,eua";
  auto* sweep = app.add_subcommand("sweep", "Seeds x aggregators x {FUR off, on} grid");
  sweep->add_option("--config", config_path, "Config file")->required();
  sweep->add_option("--seeds", seeds_arg, "Comma-separated seeds")->required();
  sweep->add_option("--aggregators", aggregators_arg, "Comma-separated subset of fedavg,eua");
  sweep->add_option("--set", sets, "Override key=value (repeatable, last wins)");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--jobs", jobs, "Parallel sweep cells");

  std::string oracle_sub;
  OracleArgs oargs;
  auto* oracle = app.add_subcommand("oracle", "Compare implementations against independent oracles");
  oracle->add_option("sub", oracle_sub, "uot-dense | qp-grid | gradcheck")->required();
  oracle->add_option("--n", oargs.n, "Rows (uot-dense)");
  oracle->add_option("--m", oargs.m, "Columns (uot-dense)");
  oracle->add_option("--k", oargs.k, "Clients (qp-grid)");
  oracle->add_option("--trials", oargs.trials, "Random instances");
  oracle->add_option("--seed", oargs.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << e.what() << '\n';
    return kConfigError;
  }

  Overrides overrides;
  try {
    for (const auto& s : sets) overrides.push_back(split_override(s));
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  if (rounds >= 0) overrides.emplace_back("rounds", std::to_string(rounds));

  if (run->parsed()) return cmd_run(config_path, overrides, out_dir, jobs, out, err);
  if (sweep->parsed()) {
    std::vector<std::uint64_t> seeds;
    std::vector<Aggregator> aggregators;
    try {
      std::stringstream ss(seeds_arg);
      for (std::string tok; std::getline(ss, tok, ',');) {
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
      }
      std::stringstream as(aggregators_arg);
      for (std::string tok; std::getline(as, tok, ',');) {
        if (tok == "fedavg") aggregators.push_back(Aggregator::kFedAvg);
        else if (tok == "eua") aggregators.push_back(Aggregator::kEua);
        else throw Error(ErrorKind::kConfig, "unknown aggregator '" + tok + "'");
      }
    } catch (const std::exception& e) {
      err << "config error: " << e.what() << '\n';
      return kConfigError;
    }
    return cmd_sweep(config_path, seeds, aggregators, overrides, out_dir, jobs, out, err);
  }
  return cmd_oracle(oracle_sub, oargs, out, err);
}

}  // namespace fedrep::cli
