// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli.hpp"
#include "fedrep/aggregator.hpp"
#include "fedrep/diagnostics.hpp"
#include "fedrep/federation.hpp"
#include "fedrep/oracles.hpp"
#include "fedrep/uot.hpp"

namespace fs = std::filesystem;
using namespace fedrep;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(const char* id, bool ok, const std::string& detail, bool counts = true) {
  std::printf("[%s] %s %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok && counts) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Config smoke_config() {
  return parse_config(slurp(fs::path(FEDREP_SOURCE_DIR) / "configs" / "smoke.conf"));
}

void ac1_uot_oracle() {
  RngStream rng(101, 1);
  double worst_long = 0.0, worst_dense = 0.0, solver_secs = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto n = static_cast<std::size_t>(1 + rng.below(5));
    const auto m = static_cast<std::size_t>(1 + rng.below(5));
    const Mat z = uot::sample_anchors(rng, n, 3), s = uot::sample_anchors(rng, m, 3);
    uot::UotProblem prob{uot::build_cost(z, s), Vec::Zero(0), Vec::Zero(0), 0.2 + 2.0 * rng.uniform(),
                         0.2 + 2.0 * rng.uniform()};
    prob.a = Vec::Constant(static_cast<Eigen::Index>(n), 1.0);
    prob.b = Vec::Constant(static_cast<Eigen::Index>(m), 1.0);
    for (Eigen::Index i = 0; i < prob.a.size(); ++i) prob.a[i] = 0.5 + rng.uniform();
    for (Eigen::Index j = 0; j < prob.b.size(); ++j) prob.b[j] = 0.5 + rng.uniform();

    const auto t0 = Clock::now();
    const auto plan = uot::solve(prob);
    solver_secs += seconds_since(t0);
    const double reference = oracle::long_run_uot(prob.cost, prob.a, prob.b, prob.tau_a, prob.tau_b);
    const double dense = oracle::dense_uot_objective(prob.cost, prob.a, prob.b, prob.tau_a, prob.tau_b, plan.pi);
    worst_long = std::max(worst_long, plan.objective - reference);
    worst_dense = std::max(worst_dense, std::abs(uot::objective(prob, plan.pi) - dense));
  }
  report("AC1", worst_long <= 1e-6 && worst_dense <= 1e-10 && solver_secs < 1.0,
         "uot vs long-run oracle: worst excess " + fmt("%.3g", worst_long) + " (<= 1e-6), dense evaluation gap " +
             fmt("%.3g", worst_dense) + " (<= 1e-10), solver time " + fmt("%.3g", solver_secs) + " s (< 1 s)");
}

void ac2_closed_form() {
  RngStream rng(102, 1);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double c = 2.0 * rng.uniform(), ta = 0.05 + 5.0 * rng.uniform(), tb = 0.05 + 5.0 * rng.uniform();
    const double a = 0.1 + rng.uniform(), b = 0.1 + rng.uniform();
    uot::UotProblem prob{Mat::Constant(1, 1, c), Vec::Constant(1, a), Vec::Constant(1, b), ta, tb};
    const auto plan = uot::solve(prob);
    worst = std::max(worst, std::abs(plan.pi(0, 0) - oracle::uot_scalar_optimum(c, a, b, ta, tb)));
  }
  report("AC2", worst <= 1e-10, "1x1 closed form over 100 draws: worst error " + fmt("%.3g", worst) + " (<= 1e-10)");
}

void ac3_marginal_limit() {
  RngStream rng(103, 1);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const Mat z = uot::sample_anchors(rng, 4, 3), s = uot::sample_anchors(rng, 4, 3);
    const auto prob = uot::UotProblem::uniform(uot::build_cost(z, s), 1e3, 1e3);
    const auto plan = uot::solve(prob);
    const double row = (plan.pi.rowwise().sum() - prob.a).cwiseAbs().maxCoeff();
    const double col = (plan.pi.colwise().sum().transpose() - prob.b).cwiseAbs().maxCoeff();
    worst = std::max({worst, row, col});
  }
  report("AC3", worst < 5e-3, "tau = 1e3 marginal error (linf) " + fmt("%.3g", worst) + " (< 5e-3)");
}

void ac4_gradients() {
  double ssl = 0.0, dev = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ssl = std::max(ssl, oracle::ssl_gradcheck(seed).rel_error);
    dev = std::max(dev, oracle::deviation_gradcheck(seed).rel_error);
  }

  RngStream rng(104, 1);
  double worst_ratio_dev = 0.0;
  std::string ratios;
  for (int t = 0; t < 5; ++t) {
    const ParamVector theta = gaussian(rng, 6);
    std::vector<ParamVector> thetas;
    for (int k = 0; k < 3; ++k) thetas.push_back(theta + gaussian(rng, 6));
    const auto devs = agg::deviations(theta, thetas);
    const agg::UpdateDirection d{gaussian(rng, 6).normalized(), 1.0};
    auto error_at = [&](double eta) {
      const auto r = diag::deviation_rate_report(devs, d, eta);
      double worst = 0.0;
      for (std::size_t k = 0; k < thetas.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        const double exact = (devs.u[i] - (theta - eta * d.d - thetas[k]).squaredNorm()) / (devs.u[i] + devs.eps);
        worst = std::max(worst, std::abs(r.first_order[i] - exact));
      }
      return worst;
    };
    const double ratio = error_at(0.1) / error_at(0.05);
    worst_ratio_dev = std::max(worst_ratio_dev, std::abs(ratio - 4.0));
    ratios += (t ? "," : "") + fmt("%.3f", ratio);
  }
  report("AC4", ssl < 1e-4 && dev < 1e-4 && worst_ratio_dev <= 1.0,
         "gradcheck ssl " + fmt("%.3g", ssl) + ", log-deviation " + fmt("%.3g", dev) +
             " (< 1e-4 relative); step-halving ratios [" + ratios + "] (in [3,5])");
}

void ac5_dual_qp() {
  RngStream rng(105, 1);
  double worst_gap = 0.0, worst_sum = 0.0, min_p = 1.0;
  for (int k : {2, 3}) {
    for (int t = 0; t < 10; ++t) {
      const Mat r = gaussian_matrix(rng, static_cast<std::size_t>(k), static_cast<std::size_t>(1 + rng.below(4)));
      const Mat g = r * r.transpose();
      const auto w = agg::solve_weights_admm(g);
      const auto exact = oracle::simplex_qp_active_set(g);
      const auto grid = oracle::simplex_qp_grid(g);
      const double best = std::min(exact.value, grid.value);
      const double value = agg::dual_objective(g, w.p, 1.0, 0.1);
      worst_gap = std::max(worst_gap, value - agg::dual_objective(g, best == exact.value ? exact.p : grid.p, 1.0, 0.1));
      worst_sum = std::max(worst_sum, std::abs(w.p.sum() - 1.0));
      min_p = std::min(min_p, w.p.minCoeff());
    }
  }
  report("AC5", worst_gap <= 1e-6 && worst_sum <= 1e-6 && min_p >= 0.0,
         "admm dual objective excess over oracle " + fmt("%.3g", worst_gap) + " (<= 1e-6), |sum p - 1| " +
             fmt("%.3g", worst_sum) + ", min p " + fmt("%.3g", min_p));
}

void ac6_equal_rates() {
  RngStream rng(106, 1);
  double worst_spread = 0.0;
  int interior = 0;
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + static_cast<int>(rng.below(4));
    const ParamVector theta = gaussian(rng, 8);
    std::vector<ParamVector> thetas;
    for (int i = 0; i < k; ++i) thetas.push_back(theta + 0.1 * gaussian(rng, 8));
    const std::vector<std::size_t> counts(static_cast<std::size_t>(k), 10);
    const auto r = agg::eua_aggregate(theta, thetas, counts);
    if (r.weights.p.minCoeff() < 1e-4) continue;
    ++interior;
    const double scale = r.rates.cwiseAbs().maxCoeff();
    if (scale > 0.0) worst_spread = std::max(worst_spread, (r.rates.maxCoeff() - r.rates.minCoeff()) / scale);
  }

  const ParamVector theta = ParamVector::LinSpaced(5, -1.0, 1.0);
  const ParamVector v = ParamVector::LinSpaced(5, 0.3, -0.2);
  const std::vector<ParamVector> pair{theta + v, theta - v};
  const std::vector<std::size_t> counts{7, 7};
  const auto sym = agg::eua_aggregate(theta, pair, counts);
  const double p_err = std::max(std::abs(sym.weights.p[0] - 0.5), std::abs(sym.weights.p[1] - 0.5));
  const double d_norm = sym.dir.d.norm();
  report("AC6", interior > 0 && worst_spread <= 1e-4 && p_err <= 1e-9 && d_norm <= 1e-9,
         "rate spread on " + std::to_string(interior) + " interior solutions " + fmt("%.3g", worst_spread) +
             " (<= 1e-4 relative); symmetric pair |p - 1/2| " + fmt("%.3g", p_err) + ", ||d|| " +
             fmt("%.3g", d_norm) + " (<= 1e-9)");
}

void ac7_lemma() {
  Config cfg = smoke_config();
  cfg.rounds = 20;
  const auto result = fed::run(cfg);
  bool ok = result.records.size() == 20;
  double worst = 0.0;
  for (const auto& rec : result.records) {
    ok = ok && rec.lemma.ok;
    if (rec.lemma.rhs > 0.0) worst = std::max(worst, rec.lemma.lhs / rec.lemma.rhs);
  }
  report("AC7", ok, "deviation bound held in " + std::to_string(result.records.size()) +
                        " rounds; worst lhs/rhs " + fmt("%.3g", worst));
}

void ac8_ac9_sweep(const fs::path& out) {
  const Config cfg = smoke_config();
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto t0 = Clock::now();
  const auto sweep = cli::run_sweep(cfg, slurp(fs::path(FEDREP_SOURCE_DIR) / "configs" / "smoke.conf"), seeds,
                                    {Aggregator::kFedAvg, Aggregator::kEua}, out / "sweep", 4);
  const double secs = seconds_since(t0);
  const double lam = cfg.lambda_u;

  const double erank_on = cli::median_effective_rank(sweep, Aggregator::kEua, lam);
  const double erank_off = cli::median_effective_rank(sweep, Aggregator::kEua, 0.0);
  int knn_wins = 0;
  for (auto seed : seeds) {
    double on = -1.0, off = -1.0;
    for (const auto& c : sweep.cells) {
      if (c.seed != seed || c.aggregator != Aggregator::kEua || !c.ok) continue;
      (c.lambda_u > 0.0 ? on : off) = c.summary.final_knn;
    }
    if (on >= 0.0 && off >= 0.0 && on >= off) ++knn_wins;
  }
  report("AC8", sweep.all_ok() && erank_on > erank_off && knn_wins >= 4 && secs < 600.0,
         "median effective rank with regularizer " + fmt("%.9g", erank_on) + " vs without " + fmt("%.9g", erank_off) +
             " (margin " + fmt("%.3g", erank_on - erank_off) + "); knn with >= without in " +
             std::to_string(knn_wins) + "/5 seeds; sweep " + fmt("%.3g", secs) + " s");

  const double full = cli::median_knn(sweep, Aggregator::kEua, lam);
  const double no_fur = cli::median_knn(sweep, Aggregator::kEua, 0.0);
  const double no_eua = cli::median_knn(sweep, Aggregator::kFedAvg, lam);
  const bool ok = sweep.all_ok() && full >= no_fur && full >= no_eua;
  report("AC9", ok,
         "median knn full " + fmt("%.4g", full) + ", without regularizer " + fmt("%.4g", no_fur) +
             ", with fedavg " + fmt("%.4g", no_eua) + ", neither " +
             fmt("%.4g", cli::median_knn(sweep, Aggregator::kFedAvg, 0.0)) + (ok ? "" : " (directional, report only)"),
         false);
}

void ac10_determinism(const fs::path& out) {
  Config cfg = smoke_config();
  cfg.rounds = 10;
  const std::string raw = slurp(fs::path(FEDREP_SOURCE_DIR) / "configs" / "smoke.conf");
  cli::execute_run(cfg, raw, {}, out / "det_a", 1);
  cli::execute_run(cfg, raw, {}, out / "det_b", 2);
  const std::string a = slurp(out / "det_a" / "metrics.csv"), b = slurp(out / "det_b" / "metrics.csv");
  report("AC10", !a.empty() && a == b,
         "metrics.csv identical across two runs (" + std::to_string(a.size()) + " bytes)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedrep acceptance suite"};
  std::string out = "acceptance_out";
  app.add_option("--out", out, "Scratch directory for run outputs");
  CLI11_PARSE(app, argc, argv);
  fs::remove_all(out);
  fs::create_directories(out);

  const auto steps = {ac1_uot_oracle, ac2_closed_form, ac3_marginal_limit, ac4_gradients, ac5_dual_qp,
                      ac6_equal_rates, ac7_lemma};
  for (auto step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      report("AC?", false, std::string("threw: ") + e.what());
    }
  }
  try {
    ac8_ac9_sweep(out);
  } catch (const std::exception& e) {
    report("AC8", false, std::string("threw: ") + e.what());
  }
  try {
    ac10_determinism(out);
  } catch (const std::exception& e) {
    report("AC10", false, std::string("threw: ") + e.what());
  }
  std::printf("%s: %d criterion failure(s)\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
