#pragma once

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "scagwr/baseline.hpp"
#include "scagwr/benchmark.hpp"
#include "scagwr/calibration.hpp"
#include "scagwr/io.hpp"
#include "scagwr/simulation.hpp"

namespace scagwr::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { ok = 0, validation = 2, numerical = 3, resource_cap = 4 };

struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string out;
  std::string kernel = "gaussian";
  int poly = 4;
  std::size_t neighbors = 100;
  std::string criterion = "loocv";
  std::string singular_policy = "strict";
  std::string trace_variant = "exact";
  std::string optimizer = "golden";
  std::string significance = "normal";
  std::uint64_t seed = 1;
  /// 0 means all hardware threads.
  unsigned threads = 0;
  ColumnMapping columns;

  std::vector<std::size_t> n_list;
  std::vector<std::string> methods;
  std::vector<double> bandwidths{1.0};
  int replicates = 20;
  int runs = 3;
  double noise_sd = 1.0;
  bool override_gwr_cap = false;
  bool write_data = false;
};

/// The output directory is not part of the stored configuration; a re-run
/// names its own.
inline nlohmann::json to_json(const RunConfig& c) {
  return {{"subcommand", c.subcommand},
          {"input", c.input},
          {"kernel", c.kernel},
          {"poly", c.poly},
          {"neighbors", c.neighbors},
          {"criterion", c.criterion},
          {"singular_policy", c.singular_policy},
          {"trace_variant", c.trace_variant},
          {"optimizer", c.optimizer},
          {"significance", c.significance},
          {"seed", c.seed},
          {"threads", c.threads},
          {"coord_x", c.columns.coord_x},
          {"coord_y", c.columns.coord_y},
          {"response", c.columns.response},
          {"covariates", c.columns.covariates},
          {"id_column", c.columns.id_column},
          {"n_list", c.n_list},
          {"methods", c.methods},
          {"bandwidths", c.bandwidths},
          {"replicates", c.replicates},
          {"runs", c.runs},
          {"noise_sd", c.noise_sd},
          {"override_gwr_cap", c.override_gwr_cap},
          {"write_data", c.write_data}};
}

inline RunConfig from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    c.subcommand = j.at("subcommand").get<std::string>();
    c.input = j.value("input", c.input);
    c.kernel = j.value("kernel", c.kernel);
    c.poly = j.value("poly", c.poly);
    c.neighbors = j.value("neighbors", c.neighbors);
    c.criterion = j.value("criterion", c.criterion);
    c.singular_policy = j.value("singular_policy", c.singular_policy);
    c.trace_variant = j.value("trace_variant", c.trace_variant);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.significance = j.value("significance", c.significance);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.columns.coord_x = j.value("coord_x", c.columns.coord_x);
    c.columns.coord_y = j.value("coord_y", c.columns.coord_y);
    c.columns.response = j.value("response", c.columns.response);
    c.columns.covariates = j.value("covariates", c.columns.covariates);
    c.columns.id_column = j.value("id_column", c.columns.id_column);
    c.n_list = j.value("n_list", c.n_list);
    c.methods = j.value("methods", c.methods);
    c.bandwidths = j.value("bandwidths", c.bandwidths);
    c.replicates = j.value("replicates", c.replicates);
    c.runs = j.value("runs", c.runs);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.override_gwr_cap = j.value("override_gwr_cap", c.override_gwr_cap);
    c.write_data = j.value("write_data", c.write_data);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  return c;
}

inline RunConfig load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.contains("config")) throw ValidationError("manifest '" + path + "' has no config section");
  return from_json(j.at("config"));
}

namespace detail {

inline std::filesystem::path prepare_out(const std::string& out) {
  if (out.empty()) throw ValidationError("--out is required");
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw ValidationError("cannot create output directory '" + out + "': " + ec.message());
  return out;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw ValidationError("cannot write '" + p.string() + "'");
  return f;
}

inline nlohmann::json manifest_header(const RunConfig& cfg) {
  nlohmann::json m;
  m["tool"] = "scagwr";
  m["version"] = kVersion;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
#ifdef __VERSION__
  m["compiler"] = __VERSION__;
#endif
  m["config"] = to_json(cfg);
  return m;
}

inline void write_manifest(const std::filesystem::path& dir, const nlohmann::json& m) {
  auto f = open_out(dir / "manifest.json");
  f << m.dump(2) << '\n';
}

inline KernelSpec spec_checked(const RunConfig& cfg) {
  if (cfg.poly < 1 || cfg.poly > 8) throw ValidationError("--poly must be in [1, 8]");
  if (cfg.neighbors < 1) throw ValidationError("--neighbors must be >= 1");
  return KernelSpec{parse_kernel_family(cfg.kernel), cfg.poly, cfg.neighbors, 1.0};
}

inline FitConfig fit_config(const RunConfig& cfg, unsigned threads) {
  KernelSpec spec = spec_checked(cfg);
  FitConfig fc;
  fc.family = spec.family;
  fc.poly = spec.poly;
  fc.neighbors = spec.neighbors;
  fc.criterion = parse_criterion(cfg.criterion);
  fc.solve.singular_policy = parse_singular_policy(cfg.singular_policy);
  if (cfg.trace_variant == "exact" || cfg.trace_variant == "both") {
    fc.solve.trace_variant = TraceVariant::exact;
  } else if (cfg.trace_variant == "paper-faithful") {
    fc.solve.trace_variant = TraceVariant::paper_faithful;
  } else {
    throw ValidationError("unknown trace variant '" + cfg.trace_variant + "' (exact, paper-faithful, both)");
  }
  fc.both_traces = cfg.trace_variant == "both";
  fc.solve.threads = threads;
  fc.optimizer.kind = parse_optimizer(cfg.optimizer);
  if (cfg.significance == "normal") {
    fc.significance = SignificanceTest::normal;
  } else if (cfg.significance == "t") {
    fc.significance = SignificanceTest::student_t;
  } else {
    throw ValidationError("unknown significance test '" + cfg.significance + "' (normal, t)");
  }
  return fc;
}

inline std::vector<Method> methods_of(const RunConfig& cfg) {
  std::vector<Method> out;
  for (const auto& m : cfg.methods) out.push_back(parse_method(m));
  if (out.empty()) throw ValidationError("--methods is empty");
  return out;
}

inline GwrOptions gwr_options(const RunConfig& cfg, unsigned threads) {
  GwrOptions g;
  g.family = parse_kernel_family(cfg.kernel);
  g.override_cap = cfg.override_gwr_cap;
  g.threads = threads;
  return g;
}

template <typename T>
std::string csv_triplet(const std::array<T, 3>& v) {
  return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]);
}

}  // namespace detail

inline int fit_command(RunConfig cfg, std::ostream& log) {
  const unsigned threads = resolve_threads(cfg.threads);
  FitConfig fc = detail::fit_config(cfg, threads);
  if (cfg.input.empty()) throw ValidationError("--input is required");
  auto dir = detail::prepare_out(cfg.out);

  IngestResult in = read_dataset_csv(cfg.input, cfg.columns);
  log << "read " << in.mapping_summary << '\n';
  const Dataset& data = in.data;
  FitResult fit = fit_scagwr(data, fc);
  const DiagnosticsResult& d = fit.diagnostics;

  std::vector<std::string> names{"intercept"};
  names.insert(names.end(), in.covariate_names.begin(), in.covariate_names.end());
  {
    auto f = detail::open_out(dir / "coefficients.csv");
    f << "site_id,coord_x,coord_y";
    for (const auto& n : names) f << ",beta_" << n << ",se_" << n << ",t_" << n << ",sig_" << n;
    f << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      f << in.site_ids[i] << ',' << format_double(data.sites().x(i)) << ',' << format_double(data.sites().y(i));
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(names.size()); ++k) {
        f << ',' << format_double(fit.beta(ii, k)) << ',' << format_double(std::sqrt(d.beta_var(ii, k))) << ','
          << format_double(d.t_values(ii, k)) << ',' << (d.significant_5pct(ii, k) ? 1 : 0);
      }
      f << '\n';
    }
  }

  OlsResult o = ols(data);
  const double n = static_cast<double>(data.size());
  const double k = static_cast<double>(data.covariates());
  const double tss = (data.y().array() - data.y().mean()).square().sum();
  const double ols_adj_r2 = 1.0 - (o.rss / tss) * (n - 1.0) / (n - k);
  const double ols_aic = ols_aicc(data);

  nlohmann::json results = {{"b", fit.params.b},
                            {"alpha", fit.params.alpha},
                            {"h0", fit.spec.h0},
                            {"cv_score", fit.cv_score},
                            {"aicc", d.aicc},
                            {"trS", d.trS},
                            {"trStS", d.trStS},
                            {"n_star", d.n_star},
                            {"sigma2", d.sigma2_hat},
                            {"r2", d.r2},
                            {"adj_r2", d.adj_r2},
                            {"ols_aicc", ols_aic},
                            {"ols_adj_r2", ols_adj_r2},
                            {"ridge_events", d.ridge_events},
                            {"optimizer_rounds", fit.optimization.rounds},
                            {"objective_evaluations", fit.optimization.evaluations}};
  if (fc.both_traces) results["trStS_diagonal_only"] = d.trStS_paper;

  {
    auto f = detail::open_out(dir / "summary.txt");
    f << "rows: " << data.size() << '\n'
      << "columns: " << in.mapping_summary << '\n'
      << "kernel: " << to_string(fc.family) << '\n'
      << "P: " << fc.poly << '\n'
      << "Q: " << fc.neighbors << '\n'
      << "criterion: " << to_string(fc.criterion) << '\n'
      << "trace_variant: " << cfg.trace_variant << '\n'
      << "b: " << format_double(fit.params.b) << '\n'
      << "alpha: " << format_double(fit.params.alpha) << '\n'
      << "h0: " << format_double(fit.spec.h0) << '\n'
      << "cv_score: " << format_double(fit.cv_score) << '\n'
      << "aicc: " << format_double(d.aicc) << '\n'
      << "trS: " << format_double(d.trS) << '\n'
      << "trStS: " << format_double(d.trStS) << '\n';
    if (fc.both_traces) f << "trStS_diagonal_only: " << format_double(d.trStS_paper) << '\n';
    f << "n_star: " << format_double(d.n_star) << '\n'
      << "sigma2: " << format_double(d.sigma2_hat) << '\n'
      << "r2: " << format_double(d.r2) << '\n'
      << "adj_r2: " << format_double(d.adj_r2) << '\n'
      << "ols_aicc: " << format_double(ols_aic) << '\n'
      << "ols_adj_r2: " << format_double(ols_adj_r2) << '\n'
      << "ridge_events: " << d.ridge_events << '\n'
      << "threads: " << threads << '\n'
      << "time_neighbors_s: " << fit.times.neighbors << '\n'
      << "time_moments_s: " << fit.times.moments << '\n'
      << "time_calibration_s: " << fit.times.calibration << '\n'
      << "time_estimation_s: " << fit.times.estimation << '\n'
      << "time_total_s: " << fit.times.total() << '\n';
  }

  nlohmann::json m = detail::manifest_header(cfg);
  m["threads_resolved"] = threads;
  m["rows"] = data.size();
  m["results"] = results;
  detail::write_manifest(dir, m);
  log << "b=" << format_double(fit.params.b) << " alpha=" << format_double(fit.params.alpha)
      << " aicc=" << format_double(d.aicc) << " adj_r2=" << format_double(d.adj_r2) << '\n';
  return ok;
}

inline int simulate_command(RunConfig cfg, std::ostream& log) {
  const unsigned threads = resolve_threads(cfg.threads == 0 ? 1 : cfg.threads);
  auto dir = detail::prepare_out(cfg.out);
  ExperimentConfig ec;
  ec.n_list = cfg.n_list.empty() ? std::vector<std::size_t>{500, 3000} : cfg.n_list;
  ec.methods = detail::methods_of(cfg);
  ec.bandwidths = cfg.bandwidths;
  ec.replicates = cfg.replicates;
  ec.seed = cfg.seed;
  ec.dgp.noise_sd = cfg.noise_sd;
  ec.scagwr = detail::fit_config(cfg, threads);
  ec.gwr = detail::gwr_options(cfg, threads);

  if (cfg.write_data) {
    for (std::size_t n : ec.n_list) {
      for (std::size_t slot = 0; slot < ec.bandwidths.size(); ++slot) {
        DgpSpec dgp = ec.dgp;
        dgp.n = n;
        dgp.bandwidth = ec.bandwidths[slot];
        dgp.seed = replicate_seed(ec.seed, n, slot, 0);
        SimulatedData sim = generate_dataset(dgp);
        const std::string tag = std::to_string(n) + "_w" + format_double(dgp.bandwidth);
        write_dataset_csv((dir / ("data_" + tag + ".csv")).string(), sim.data, {"x1", "x2"});
        auto f = detail::open_out(dir / ("truth_" + tag + ".csv"));
        f << "site_id,beta0,beta1,beta2\n";
        for (Eigen::Index i = 0; i < sim.true_beta.rows(); ++i) {
          f << (i + 1) << ',' << format_double(sim.true_beta(i, 0)) << ',' << format_double(sim.true_beta(i, 1))
            << ',' << format_double(sim.true_beta(i, 2)) << '\n';
        }
      }
    }
    nlohmann::json m = detail::manifest_header(cfg);
    detail::write_manifest(dir, m);
    log << "wrote datasets to " << dir.string() << '\n';
    return ok;
  }

  ExperimentReport rep = run_experiment(ec);
  {
    auto f = detail::open_out(dir / "replicates.csv");
    f << "method,n,bandwidth,replicate,ok,approximate_dgp,rmse_b0,rmse_b1,rmse_b2,sd_b0,sd_b1,sd_b2,cv,aicc,"
         "seconds,b,alpha,h,error\n";
    for (const auto& r : rep.rows) {
      f << to_string(r.method) << ',' << r.n << ',' << format_double(r.bandwidth) << ',' << r.replicate << ','
        << (r.ok ? 1 : 0) << ',' << (r.approximate_dgp ? 1 : 0) << ',' << detail::csv_triplet(r.rmse) << ','
        << detail::csv_triplet(r.sd_estimate) << ',' << format_double(r.cv) << ',' << format_double(r.aicc) << ','
        << format_double(r.seconds) << ',' << format_double(r.b) << ',' << format_double(r.alpha) << ','
        << format_double(r.h) << ',' << '"' << r.error << '"' << '\n';
    }
  }
  {
    auto f = detail::open_out(dir / "summary.csv");
    f << "method,n,bandwidth,replicates,failed,mean_rmse_b0,mean_rmse_b1,mean_rmse_b2,pooled_rmse_b0,"
         "pooled_rmse_b1,pooled_rmse_b2,mean_sd_b0,mean_sd_b1,mean_sd_b2,mean_cv,mean_aicc,mean_seconds\n";
    for (const auto& s : rep.summary) {
      f << to_string(s.method) << ',' << s.n << ',' << format_double(s.bandwidth) << ',' << s.replicates << ','
        << s.failed << ',' << detail::csv_triplet(s.mean_rmse) << ',' << detail::csv_triplet(s.pooled_rmse) << ','
        << detail::csv_triplet(s.mean_sd_estimate) << ',' << format_double(s.mean_cv) << ','
        << format_double(s.mean_aicc) << ',' << format_double(s.mean_seconds) << '\n';
    }
  }
  nlohmann::json m = detail::manifest_header(cfg);
  m["threads_resolved"] = threads;
  detail::write_manifest(dir, m);
  for (const auto& s : rep.summary) {
    log << to_string(s.method) << " N=" << s.n << " w=" << s.bandwidth << " rmse(b0,b1,b2)=" << s.mean_rmse[0] << ","
        << s.mean_rmse[1] << "," << s.mean_rmse[2] << '\n';
  }
  return ok;
}

inline int benchmark_command(RunConfig cfg, std::ostream& log) {
  const unsigned threads = resolve_threads(cfg.threads == 0 ? 1 : cfg.threads);
  auto dir = detail::prepare_out(cfg.out);
  BenchmarkConfig bc;
  if (!cfg.n_list.empty()) bc.n_list = cfg.n_list;
  bc.methods = detail::methods_of(cfg);
  bc.runs = cfg.runs;
  bc.seed = cfg.seed;
  bc.scagwr = detail::fit_config(cfg, threads);
  bc.gwr = detail::gwr_options(cfg, threads);
  std::vector<BenchmarkTiming> timings = run_benchmark(bc);
  {
    auto f = detail::open_out(dir / "benchmark.csv");
    f << "method,n,run,seconds\n";
    for (const auto& t : timings)
      for (std::size_t r = 0; r < t.seconds.size(); ++r)
        f << to_string(t.method) << ',' << t.n << ',' << r << ',' << format_double(t.seconds[r]) << '\n';
  }
  {
    auto f = detail::open_out(dir / "benchmark_summary.csv");
    f << "method,n,runs,median_seconds,ratio_to_previous\n";
    for (const auto& t : timings) {
      f << to_string(t.method) << ',' << t.n << ',' << t.seconds.size() << ',' << format_double(t.median) << ','
        << format_double(t.ratio_to_previous) << '\n';
      log << to_string(t.method) << " N=" << t.n << " median=" << t.median << "s ratio=" << t.ratio_to_previous
          << '\n';
    }
  }
  nlohmann::json m = detail::manifest_header(cfg);
  m["threads_resolved"] = threads;
  detail::write_manifest(dir, m);
  return ok;
}

inline int dispatch(const RunConfig& cfg, std::ostream& log) {
  if (cfg.subcommand == "fit") return fit_command(cfg, log);
  if (cfg.subcommand == "simulate") return simulate_command(cfg, log);
  if (cfg.subcommand == "benchmark") return benchmark_command(cfg, log);
  throw ValidationError("unknown subcommand '" + cfg.subcommand + "'");
}

/// Parses arguments, runs the subcommand and maps failures to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Scalable geographically weighted regression"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunConfig cfg;
  std::string manifest;
  std::string covariates;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_option("--kernel", cfg.kernel, "Kernel family: gaussian or exponential");
    sub->add_option("--poly", cfg.poly, "Polynomial degree P of the kernel, 1..8");
    sub->add_option("--neighbors", cfg.neighbors, "Neighbor count Q");
    sub->add_option("--criterion", cfg.criterion, "loocv or aicc");
    sub->add_option("--singular-policy", cfg.singular_policy, "strict or ridge");
    sub->add_option("--trace-variant", cfg.trace_variant, "exact, paper-faithful or both");
    sub->add_option("--optimizer", cfg.optimizer, "golden or simplex");
    sub->add_option("--significance", cfg.significance, "normal or t");
    sub->add_option("--seed", cfg.seed, "Random seed");
    sub->add_option("--threads", cfg.threads, "Worker threads (0: all cores)");
    sub->add_option("--manifest", manifest, "Re-run the configuration stored in a manifest");
  };

  CLI::App* fit = app.add_subcommand("fit", "Calibrate and fit a dataset");
  common(fit);
  fit->add_option("--input", cfg.input, "Input CSV");
  fit->add_option("--coord-x", cfg.columns.coord_x, "X coordinate column");
  fit->add_option("--coord-y", cfg.columns.coord_y, "Y coordinate column");
  fit->add_option("--response", cfg.columns.response, "Response column");
  fit->add_option("--covariates", covariates, "Comma-separated covariate columns (default: all others)");
  fit->add_option("--id-column", cfg.columns.id_column, "Site id column");

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo experiment on simulated data");
  common(sim);
  sim->add_option("--n-list", cfg.n_list, "Sample sizes")->delimiter(',');
  sim->add_option("--methods", cfg.methods, "scagwr-loocv, scagwr-aicc, gwr, gwr-aicc")->delimiter(',');
  sim->add_option("--bandwidths", cfg.bandwidths, "True field bandwidths")->delimiter(',');
  sim->add_option("--replicates", cfg.replicates, "Replicates per configuration");
  sim->add_option("--noise-sd", cfg.noise_sd, "Noise standard deviation");
  sim->add_flag("--override-gwr-cap", cfg.override_gwr_cap, "Allow the dense baseline above its size cap");
  sim->add_flag("--write-data", cfg.write_data, "Only write the first replicate dataset per configuration");

  CLI::App* bench = app.add_subcommand("benchmark", "Wall-time scaling per method and N");
  common(bench);
  bench->add_option("--n-list", cfg.n_list, "Sample sizes")->delimiter(',');
  bench->add_option("--methods", cfg.methods, "scagwr-loocv, scagwr-aicc, gwr")->delimiter(',');
  bench->add_option("--runs", cfg.runs, "Timed runs per configuration (median reported)");
  bench->add_flag("--override-gwr-cap", cfg.override_gwr_cap, "Allow the dense baseline above its size cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, log, err);
    return code == 0 ? ok : validation;
  }

  CLI::App* chosen = app.get_subcommands().front();
  cfg.subcommand = chosen->get_name();
  if (cfg.methods.empty()) {
    cfg.methods = cfg.subcommand == "simulate" ? std::vector<std::string>{"scagwr-loocv", "gwr"}
                                               : std::vector<std::string>{"scagwr-loocv"};
  }
  if (cfg.subcommand == "benchmark" && chosen->count("--threads") == 0) cfg.threads = 1;

  try {
    if (!covariates.empty()) {
      std::stringstream ss(covariates);
      for (std::string c; std::getline(ss, c, ',');) cfg.columns.covariates.push_back(c);
    }
    if (!manifest.empty()) {
      RunConfig from = load_manifest(manifest);
      if (from.subcommand != cfg.subcommand) {
        throw ValidationError("manifest was written by '" + from.subcommand + "', not '" + cfg.subcommand + "'");
      }
      if (chosen->count("--out")) from.out = cfg.out;
      if (chosen->count("--threads")) from.threads = cfg.threads;
      cfg = std::move(from);
    }
    return dispatch(cfg, log);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return validation;
  } catch (const ResourceCapError& e) {
    err << "error: " << e.what() << '\n';
    return resource_cap;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return numerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return numerical;
  }
}

}  // namespace scagwr::cli
