// Acceptance driver: one PASS/FAIL line per criterion. `--only N` runs a
// single criterion; the exit status is nonzero when any selected one fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "scagwr.hpp"
#include "scagwr/benchmark.hpp"
#include "scagwr/cli.hpp"

using namespace scagwr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double worst_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double w = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) w = std::max(w, oracle::rel(a.row(i), b.row(i)));
  return w;
}

Eigen::MatrixXd library_beta(const FitParams& params, const MomentSet& ms) {
  return full_pass(params, ms, {}, {.trace_sts = false}).beta;
}

// Moment-based estimates against direct weighted least squares.
Outcome compression_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> n_dist(20, 200), k_dist(1, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int polys[] = {1, 4, 6};
  double worst_full = 0.0, worst_loo = 0.0, worst_cv = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = n_dist(rng), k = k_dist(rng);
    const int poly = polys[inst % 3];
    const std::size_t q = (inst / 3) % 2 ? std::min<std::size_t>(50, n - 1) : 5;
    const FitParams params{std::pow(10.0, -1.0 + 2.0 * unit(rng)), std::pow(10.0, -2.0 + 2.0 * unit(rng))};
    const auto family = inst % 5 == 4 ? KernelFamily::exponential : KernelFamily::gaussian;
    oracle::Problem p = oracle::random_problem(n, k, poly, q, 1000 + static_cast<std::uint64_t>(inst), family);
    oracle::Built b = oracle::build(p);
    for (std::size_t i = 0; i < n; ++i) {
      worst_full = std::max(worst_full, oracle::rel(beta_full(i, params, b.ms), oracle::beta_full(p, i, params)));
      worst_loo = std::max(worst_loo, oracle::rel(beta_loo(i, params, b.ms), oracle::beta_loo(p, i, params)));
    }
    worst_cv = std::max(worst_cv, oracle::rel(cv_score(params, b.ms), oracle::cv_score(p, params)));
  }
  const double tol = 1e-8;
  return {worst_full <= tol && worst_loo <= tol && worst_cv <= tol,
          "50 instances; max rel err beta_full " + fmt(worst_full) + ", beta_loo " + fmt(worst_loo) + ", cv " +
              fmt(worst_cv) + " (tol 1e-8)"};
}

// Traces, variances, N* and AICc against the explicit hat matrix.
Outcome diagnostics_oracle() {
  struct Case {
    std::size_t n, k, q;
    int poly;
    FitParams params;
  };
  const Case cases[] = {{40, 2, 6, 4, {0.7, 0.3}},  {90, 3, 12, 4, {1.5, 0.05}}, {150, 4, 20, 6, {0.4, 1.0}},
                        {200, 3, 50, 4, {3.0, 0.2}}, {60, 1, 10, 1, {2.0, 0.1}},  {120, 5, 30, 4, {0.9, 0.6}}};
  double worst = 0.0;
  std::uint64_t seed = 300;
  for (const Case& c : cases) {
    oracle::Problem p = oracle::random_problem(c.n, c.k, c.poly, c.q, seed++);
    oracle::Built b = oracle::build(p);
    oracle::Diagnostics want = oracle::diagnostics(p, c.params);
    DiagnosticsResult got = variance_and_aicc(c.params, b.ms);
    for (double e : {oracle::rel(got.trS, want.trS), oracle::rel(got.trStS, want.trStS),
                     oracle::rel(got.n_star, want.n_star), oracle::rel(got.aicc, want.aicc),
                     oracle::rel(trace_S(c.params, b.ms), want.trS), oracle::rel(trace_StS(c.params, b.ms), want.trStS),
                     worst_rel(got.beta_var, want.var)})
      worst = std::max(worst, e);
  }

  double worst_trio = 0.0;
  for (std::size_t k : {1u, 3u, 5u}) {
    oracle::Problem p = oracle::random_problem(120, k, 4, 15, 400 + k);
    oracle::Built b = oracle::build(p);
    DiagnosticsResult d = variance_and_aicc({0.0, 1.0}, b.ms);
    const double kk = static_cast<double>(k), n = 120.0;
    worst_trio = std::max({worst_trio, oracle::rel(d.trS, kk), oracle::rel(d.trStS, kk), oracle::rel(d.n_star, n - kk)});
  }
  return {worst <= 1e-8 && worst_trio <= 1e-12,
          "6 instances N<=200; max rel err " + fmt(worst) + " (tol 1e-8); b=0,alpha=1 trio vs (K,K,N-K) max rel err " +
              fmt(worst_trio) + " (tol 1e-12)"};
}

// b = 0 reproduces OLS everywhere; a huge alpha shrinks every local fit onto it.
Outcome ols_collapse() {
  double worst_collapse = 0.0, worst_shrink = 0.0;
  auto check = [&](const Dataset& data, std::size_t q) {
    NeighborGraph g = build_neighbor_graph(data.sites(), q);
    KernelSpec spec{KernelFamily::gaussian, 4, q, base_bandwidth(g, KernelFamily::gaussian)};
    MomentSet ms = build_moments(data, spec, g);
    const Eigen::RowVectorXd ols_beta = ols(data).beta.transpose();
    for (double alpha : {1e-3, 1.0, 50.0}) {
      Eigen::MatrixXd beta = library_beta({0.0, alpha}, ms);
      worst_collapse = std::max(worst_collapse, worst_rel(beta, ols_beta.replicate(beta.rows(), 1)));
    }
    Eigen::MatrixXd beta = library_beta({1.0, 1e6}, ms);
    for (Eigen::Index i = 0; i < beta.rows(); ++i)
      worst_shrink = std::max(worst_shrink, (beta.row(i) - ols_beta).norm() / ols_beta.norm());
  };
  check(oracle::random_problem(300, 3, 4, 30, 500).data, 30);
  DgpSpec dgp;
  dgp.n = 1000;
  dgp.seed = 501;
  check(generate_dataset(dgp).data, 100);
  return {worst_collapse <= 1e-10 && worst_shrink <= 1e-3,
          "b=0 max rel err vs OLS " + fmt(worst_collapse) + " (tol 1e-10); alpha=1e6 max ||beta_i-beta_ols||/||beta_ols|| " +
              fmt(worst_shrink) + " (tol 1e-3)"};
}

std::string ratios(const std::vector<BenchmarkTiming>& t) {
  std::string s;
  for (const auto& r : t) {
    s += " N=" + std::to_string(r.n) + ":" + fmt(r.median, 3) + "s";
    if (!std::isnan(r.ratio_to_previous)) s += "(x" + fmt(r.ratio_to_previous, 3) + ")";
  }
  return s;
}

// Per-doubling wall-time ratios, single thread, median of three runs.
Outcome scaling_law() {
  BenchmarkConfig fast;
  auto sca = run_benchmark(fast);
  BenchmarkConfig slow;
  slow.methods = {Method::gwr_loocv};
  slow.n_list = {1000, 2000, 4000};
  auto gwr = run_benchmark(slow);
  bool ok = true;
  for (const auto& r : sca)
    if (!std::isnan(r.ratio_to_previous) && r.ratio_to_previous > 3.0) ok = false;
  for (const auto& r : gwr)
    if (!std::isnan(r.ratio_to_previous) && r.ratio_to_previous < 3.5) ok = false;
  return {ok, "scagwr-loocv (each <= 3.0)" + ratios(sca) + "; gwr (each >= 3.5)" + ratios(gwr) +
                  "; scagwr 40000/10000 = " + fmt(sca.back().median / sca[2].median, 3)};
}

// Mean-RMSE ratio of ScaGWR to GWR at N = 3000 over 20 replicates.
Outcome monte_carlo() {
  ExperimentConfig cfg;
  cfg.n_list = {3000, 500};
  cfg.methods = {Method::scagwr_loocv, Method::gwr_loocv};
  cfg.replicates = 20;
  ExperimentReport rep = run_experiment(cfg);
  auto ratio = [&](std::size_t n, int k) {
    return rep.find(Method::scagwr_loocv, n).mean_rmse[static_cast<std::size_t>(k)] /
           rep.find(Method::gwr_loocv, n).mean_rmse[static_cast<std::size_t>(k)];
  };
  const double r1 = ratio(3000, 1), r2 = ratio(3000, 2);
  return {r1 < 1.1 && r2 < 1.0, "N=3000 ratio(beta1) " + fmt(r1) + " (< 1.1), ratio(beta2) " + fmt(r2) +
                                    " (< 1.0), ratio(beta0) " + fmt(ratio(3000, 0)) + "; N=500 ratio(beta1) " +
                                    fmt(ratio(500, 1)) + ", ratio(beta2) " + fmt(ratio(500, 2)) + " (reported only)"};
}

// ScaGWR RMSE against the true coefficient bandwidth.
Outcome bandwidth_robustness() {
  ExperimentConfig cfg;
  cfg.n_list = {2000};
  cfg.methods = {Method::scagwr_loocv};
  cfg.bandwidths = {0.5, 1.0, 2.0};
  cfg.replicates = 10;
  ExperimentReport rep = run_experiment(cfg);
  bool ok = true;
  std::string detail;
  for (int k = 0; k < 3; ++k) {
    detail += (k ? "; beta" : "beta") + std::to_string(k);
    double previous = std::numeric_limits<double>::infinity();
    for (double bw : cfg.bandwidths) {
      const double r = rep.find(Method::scagwr_loocv, 2000, bw).mean_rmse[static_cast<std::size_t>(k)];
      detail += " w=" + fmt(bw, 2) + ":" + fmt(r);
      if (r > previous) ok = false;
      previous = r;
    }
  }
  return {ok, "N=2000, 10 replicates, nonincreasing in w: " + detail};
}

// LOOCV- and AICc-calibrated ScaGWR give similar beta1 accuracy.
Outcome criterion_agreement() {
  ExperimentConfig cfg;
  cfg.n_list = {2000};
  cfg.methods = {Method::scagwr_loocv, Method::scagwr_aicc};
  cfg.replicates = 10;
  ExperimentReport rep = run_experiment(cfg);
  const double a = rep.find(Method::scagwr_loocv, 2000).mean_rmse[1];
  const double b = rep.find(Method::scagwr_aicc, 2000).mean_rmse[1];
  const double spread = std::max(a, b) / std::min(a, b) - 1.0;
  return {spread <= 0.15, "N=2000, 10 replicates, beta1 RMSE loocv " + fmt(a) + ", aicc " + fmt(b) +
                              ", larger/smaller - 1 = " + fmt(spread) + " (<= 0.15)"};
}

// Moments of 200 draws of a field with sd 2 and bandwidth 1 at 500 sites.
Outcome sampler_statistics() {
  const std::size_t n = 500;
  const int draws = 200;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  Coords c(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    c(i, 0) = normal(rng);
    c(i, 1) = normal(rng);
  }
  SiteSet sites(c);
  Eigen::MatrixXd f(static_cast<Eigen::Index>(n), draws);
  for (int d = 0; d < draws; ++d) f.col(d) = sample_gp_field(sites, 1.0, 2.0, 1.0, 9000 + static_cast<std::uint64_t>(d));
  const Eigen::VectorXd mean = f.rowwise().mean();
  const Eigen::MatrixXd centered = f.colwise() - mean;
  const Eigen::VectorXd var = centered.rowwise().squaredNorm() / static_cast<double>(draws - 1);
  auto corr = [&](std::size_t i, std::size_t j) {
    const auto a = centered.row(static_cast<Eigen::Index>(i)), b = centered.row(static_cast<Eigen::Index>(j));
    return a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
  };

  std::size_t bi = 0, bj = 1;
  double best_gap = std::numeric_limits<double>::infinity(), band_sum = 0.0;
  std::size_t band_pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double gap = std::abs(sites.distance(i, j) - 1.0);
      if (gap < best_gap) {
        best_gap = gap;
        bi = i;
        bj = j;
      }
      if (gap < 0.005) {
        band_sum += corr(i, j);
        ++band_pairs;
      }
    }
  const double target = std::exp(-1.0);
  const double pair = corr(bi, bj), band = band_sum / static_cast<double>(band_pairs);
  const bool ok = var.minCoeff() >= 3.0 && var.maxCoeff() <= 5.3 && std::abs(pair - target) <= 0.12 &&
                  std::abs(band - target) <= 0.12;
  const auto outside = (var.array() < 3.0 || var.array() > 5.3).count();
  return {ok, "per-site variance in [" + fmt(var.minCoeff()) + ", " + fmt(var.maxCoeff()) + "] (bounds [3.0, 5.3]), " +
                  std::to_string(outside) + " of " + std::to_string(n) + " sites outside, mean " + fmt(var.mean()) +
                  "; corr at d=" + fmt(sites.distance(bi, bj), 6) + " " + fmt(pair) +
                  ", mean over " + std::to_string(band_pairs) + " pairs with |d-1|<0.005 " + fmt(band) +
                  " (target 0.3679 +- 0.12)"};
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "scagwr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream log, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), log, err);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Two fits from one manifest write byte-identical coefficient files.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "scagwr_acceptance_determinism";
  fs::remove_all(dir);
  if (run_cli({"simulate", "--out", (dir / "data").string(), "--n-list", "2000", "--write-data", "--seed", "11"}) != 0)
    return {false, "simulate failed"};
  const std::string input = (dir / "data" / "data_2000_w1.csv").string();
  if (run_cli({"fit", "--input", input, "--out", (dir / "first").string(), "--threads", "4"}) != 0)
    return {false, "initial fit failed"};
  const std::string manifest = (dir / "first" / "manifest.json").string();
  for (const char* name : {"rerun_a", "rerun_b"})
    if (run_cli({"fit", "--manifest", manifest, "--out", (dir / name).string()}) != 0)
      return {false, std::string("fit from manifest failed: ") + name};
  const std::string first = slurp(dir / "first" / "coefficients.csv");
  const std::string a = slurp(dir / "rerun_a" / "coefficients.csv");
  const std::string b = slurp(dir / "rerun_b" / "coefficients.csv");
  const bool ok = !first.empty() && a == b && a == first;
  fs::remove_all(dir);
  return {ok, "N=2000, 4 threads; two manifest reruns " + std::string(a == b ? "identical" : "DIFFER") +
                  ", vs original run " + (a == first ? "identical" : "DIFFER") + " (" +
                  std::to_string(first.size()) + " bytes)"};
}

struct Check {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int a = 1; a < argc; ++a) {
    if (std::string(argv[a]) == "--only" && a + 1 < argc) {
      only = std::atoi(argv[++a]);
    } else {
      std::cerr << "usage: acceptance [--only N]\n";
      return 2;
    }
  }
  const std::vector<Check> all = {
      {1, "compression equivalence", compression_equivalence},
      {2, "diagnostics oracle", diagnostics_oracle},
      {3, "OLS collapse and shrinkage", ols_collapse},
      {4, "scaling law", scaling_law},
      {5, "Monte Carlo RMSE ratios", monte_carlo},
      {6, "bandwidth robustness", bandwidth_robustness},
      {7, "LOOCV vs AICc agreement", criterion_agreement},
      {8, "GP sampler statistics", sampler_statistics},
      {9, "determinism", determinism},
  };
  bool all_ok = true, any = false;
  for (const auto& c : all) {
    if (only && c.id != only) continue;
    any = true;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "AC" << c.id << ' ' << (o.pass ? "PASS" : "FAIL") << ' ' << c.name << ": " << o.detail << " ["
              << fmt(secs, 3) << " s]" << std::endl;
    all_ok = all_ok && o.pass;
  }
  if (!any) {
    std::cerr << "no criterion " << only << "\n";
    return 2;
  }
  return all_ok ? 0 : 1;
}
