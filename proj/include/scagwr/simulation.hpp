#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "scagwr/baseline.hpp"
#include "scagwr/calibration.hpp"
#include "scagwr/dataset.hpp"
#include "scagwr/error.hpp"
#include "scagwr/geometry.hpp"

namespace scagwr {

using Rng = std::mt19937_64;

/// Draws from a zero-mean Gaussian process with covariance
/// exp(-(d/w)^2) at fixed sites; scaled and shifted per draw.
///
/// Up to `exact_limit` sites the draw is exact through a Cholesky factor of
/// the dense covariance (with a small diagonal jitter when needed). Beyond
/// that the field is approximated with random Fourier features and
/// approximate() reports true.
class GaussianFieldSampler {
 public:
  static constexpr double kInitialJitter = 1e-10;
  static constexpr int kMaxJitterRetries = 3;
  static constexpr int kFourierFeatures = 1000;

  GaussianFieldSampler(const SiteSet& sites, double bandwidth, std::size_t exact_limit = 20000)
      : coords_(sites.coords()), bandwidth_(bandwidth) {
    if (!(bandwidth > 0.0)) throw ValidationError("field bandwidth must be > 0");
    approximate_ = sites.size() > exact_limit;
    if (!approximate_) factor();
  }

  bool approximate() const { return approximate_; }
  double jitter() const { return jitter_; }

  /// Standard (unit variance) field draw.
  Eigen::VectorXd standard_draw(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index n = coords_.rows();
    if (!approximate_) {
      Eigen::VectorXd z(n);
      for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
      return chol_.matrixL() * z;
    }
    // Spectral density of exp(-|d|^2 / w^2) is N(0, (2 / w^2) I).
    const double freq_sd = std::sqrt(2.0) / bandwidth_;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    for (int m = 0; m < kFourierFeatures; ++m) {
      const double wx = freq_sd * normal(rng);
      const double wy = freq_sd * normal(rng);
      const double a = normal(rng);
      const double b = normal(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double phase = wx * coords_(i, 0) + wy * coords_(i, 1);
        f(i) += a * std::cos(phase) + b * std::sin(phase);
      }
    }
    return f / std::sqrt(static_cast<double>(kFourierFeatures));
  }

  Eigen::VectorXd draw(double mean, double sd, Rng& rng) const {
    if (sd < 0.0) throw ValidationError("field standard deviation must be >= 0");
    if (sd == 0.0) return Eigen::VectorXd::Constant(coords_.rows(), mean);
    return (sd * standard_draw(rng)).array() + mean;
  }

 private:
  void factor() {
    const Eigen::Index n = coords_.rows();
    Eigen::MatrixXd cov(n, n);
    const double inv_w2 = 1.0 / (bandwidth_ * bandwidth_);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j; i < n; ++i) {
        cov(i, j) = std::exp(-(coords_.row(i) - coords_.row(j)).squaredNorm() * inv_w2);
      }
    }
    double jitter = 0.0;
    for (int attempt = 0; attempt <= kMaxJitterRetries + 1; ++attempt) {
      Eigen::MatrixXd work = cov;
      if (jitter > 0.0) work.diagonal().array() += jitter;
      chol_.compute(work);
      if (chol_.info() == Eigen::Success) {
        jitter_ = jitter;
        return;
      }
      if (attempt == kMaxJitterRetries + 1) break;
      jitter = jitter == 0.0 ? kInitialJitter : jitter * 10.0;
    }
    throw NumericalError("covariance factorization failed after maximum jitter");
  }

  Coords coords_;
  double bandwidth_;
  bool approximate_ = false;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> chol_;
};

/// One field draw with mean `mean`, marginal SD `sd` and bandwidth w.
inline Eigen::VectorXd sample_gp_field(const SiteSet& sites, double mean, double sd, double bandwidth,
                                       std::uint64_t seed, std::size_t exact_limit = 20000) {
  if (sd < 0.0) throw ValidationError("field standard deviation must be >= 0");
  if (sd == 0.0) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(sites.size()), mean);
  GaussianFieldSampler sampler(sites, bandwidth, exact_limit);
  Rng rng(seed);
  return sampler.draw(mean, sd, rng);
}

enum class CovariateSource { standard_normal, uniform };

/// Data-generating process y = b0 + x1 b1 + x2 b2 + e with each coefficient
/// surface a Gaussian-process draw around coefficient_mean.
struct DgpSpec {
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::array<double, 3> coefficient_sd{0.5, 2.0, 0.5};
  double coefficient_mean = 1.0;
  double bandwidth = 1.0;
  double noise_sd = 1.0;
  CovariateSource covariates = CovariateSource::standard_normal;
  std::size_t exact_limit = 20000;

  void validate() const {
    if (n < 4) throw ValidationError("simulated sample size must be >= 4");
    for (double s : coefficient_sd)
      if (!(s >= 0.0)) throw ValidationError("coefficient SDs must be >= 0");
    if (!(bandwidth > 0.0)) throw ValidationError("true bandwidth must be > 0");
    if (!(noise_sd >= 0.0)) throw ValidationError("noise SD must be >= 0");
  }
};

struct SimulatedData {
  Dataset data;
  Eigen::MatrixXd true_beta;  // N x 3
  bool approximate = false;
};

inline SimulatedData generate_dataset(const DgpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(spec.n);

  Coords coords(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    coords(i, 0) = normal(rng);
    coords(i, 1) = normal(rng);
  }
  SiteSet sites(coords);

  SimulatedData out;
  out.true_beta.resize(n, 3);
  {
    std::optional<GaussianFieldSampler> sampler;
    for (int k = 0; k < 3; ++k) {
      const double sd = spec.coefficient_sd[static_cast<std::size_t>(k)];
      if (sd > 0.0 && !sampler) sampler.emplace(sites, spec.bandwidth, spec.exact_limit);
      out.true_beta.col(k) = sd > 0.0 ? sampler->draw(spec.coefficient_mean, sd, rng)
                                      : Eigen::VectorXd::Constant(n, spec.coefficient_mean);
    }
    out.approximate = sampler && sampler->approximate();
  }

  Eigen::MatrixXd cov(n, 2);
  std::uniform_real_distribution<double> uniform(-std::sqrt(3.0), std::sqrt(3.0));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 2; ++c) {
      cov(i, c) = spec.covariates == CovariateSource::standard_normal ? normal(rng) : uniform(rng);
    }
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eps = spec.noise_sd * normal(rng);
    y(i) = out.true_beta(i, 0) + cov(i, 0) * out.true_beta(i, 1) + cov(i, 1) * out.true_beta(i, 2) + eps;
  }
  out.data = Dataset::with_intercept(std::move(y), cov, std::move(sites));
  return out;
}

enum class Method { scagwr_loocv, scagwr_aicc, gwr_loocv, gwr_aicc };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::scagwr_loocv: return "scagwr-loocv";
    case Method::scagwr_aicc: return "scagwr-aicc";
    case Method::gwr_loocv: return "gwr";
    case Method::gwr_aicc: return "gwr-aicc";
  }
  return "?";
}
inline Method parse_method(std::string_view s) {
  if (s == "scagwr-loocv" || s == "scagwr") return Method::scagwr_loocv;
  if (s == "scagwr-aicc") return Method::scagwr_aicc;
  if (s == "gwr" || s == "gwr-loocv") return Method::gwr_loocv;
  if (s == "gwr-aicc") return Method::gwr_aicc;
  throw ValidationError("unknown method '" + std::string(s) + "'");
}
inline bool is_gwr(Method m) { return m == Method::gwr_loocv || m == Method::gwr_aicc; }

/// Per-replicate seed derived from (base seed, N, bandwidth slot, replicate).
inline std::uint64_t replicate_seed(std::uint64_t base, std::size_t n, std::size_t slot, std::size_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(slot),
                    static_cast<std::uint32_t>(replicate)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct MethodOutcome {
  Eigen::MatrixXd beta;
  double cv = std::numeric_limits<double>::quiet_NaN();
  double aicc = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  double b = std::numeric_limits<double>::quiet_NaN();
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double h = std::numeric_limits<double>::quiet_NaN();
};

/// Calibrates and fits one method on one dataset. Timing covers calibration,
/// estimation and diagnostics.
inline MethodOutcome run_method(Method method, const Dataset& data, const FitConfig& scagwr_cfg,
                                const GwrOptions& gwr_opts) {
  MethodOutcome out;
  auto start = std::chrono::steady_clock::now();
  if (!is_gwr(method)) {
    FitConfig cfg = scagwr_cfg;
    cfg.criterion = method == Method::scagwr_loocv ? Criterion::loocv : Criterion::aicc;
    FitResult fit = fit_scagwr(data, cfg);
    out.beta = std::move(fit.beta);
    out.cv = fit.cv_score;
    out.aicc = fit.diagnostics.aicc;
    out.b = fit.params.b;
    out.alpha = fit.params.alpha;
  } else {
    BandwidthBounds bounds = default_gwr_bounds(data.sites());
    BandwidthResult bw = method == Method::gwr_loocv ? gwr_loocv_bandwidth(data, bounds, gwr_opts)
                                                     : gwr_aicc_bandwidth(data, bounds, gwr_opts);
    GwrFit fit = gwr_fit(bw.h, data, gwr_opts);
    out.beta = std::move(fit.beta);
    out.cv = method == Method::gwr_loocv ? bw.objective : gwr_cv_score(bw.h, data, gwr_opts);
    out.aicc = fit.aicc;
    out.h = bw.h;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

struct ExperimentConfig {
  std::vector<std::size_t> n_list{3000};
  std::vector<Method> methods{Method::scagwr_loocv, Method::gwr_loocv};
  std::vector<double> bandwidths{1.0};
  int replicates = 20;
  std::uint64_t seed = 1;
  /// Template for the data-generating process; n, seed and bandwidth are set per replicate.
  DgpSpec dgp;
  FitConfig scagwr;
  GwrOptions gwr;
  /// A configuration fails when more than this share of its replicates fail.
  double max_failure_share = 0.2;
};

struct ReplicateRow {
  Method method = Method::scagwr_loocv;
  std::size_t n = 0;
  double bandwidth = 1.0;
  int replicate = 0;
  bool ok = false;
  bool approximate_dgp = false;
  std::string error;
  std::array<double, 3> rmse{};
  std::array<double, 3> sd_estimate{};
  double cv = 0.0;
  double aicc = 0.0;
  double seconds = 0.0;
  double b = 0.0;
  double alpha = 0.0;
  double h = 0.0;
};

struct SummaryRow {
  Method method = Method::scagwr_loocv;
  std::size_t n = 0;
  double bandwidth = 1.0;
  int replicates = 0;
  int failed = 0;
  /// Mean over replicates of the per-replicate RMSE.
  std::array<double, 3> mean_rmse{};
  /// sqrt of the mean squared error pooled over replicates and sites.
  std::array<double, 3> pooled_rmse{};
  std::array<double, 3> mean_sd_estimate{};
  double mean_cv = 0.0;
  double mean_aicc = 0.0;
  double mean_seconds = 0.0;
};

struct ExperimentReport {
  std::vector<ReplicateRow> rows;
  std::vector<SummaryRow> summary;

  const SummaryRow& find(Method m, std::size_t n, double bandwidth = 1.0) const {
    for (const auto& s : summary)
      if (s.method == m && s.n == n && s.bandwidth == bandwidth) return s;
    throw ValidationError("no summary row for requested configuration");
  }
};

namespace detail {
inline double column_sd(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}
}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.replicates < 1) throw ValidationError("replicate count must be >= 1");
  if (cfg.n_list.empty() || cfg.methods.empty() || cfg.bandwidths.empty()) {
    throw ValidationError("experiment needs at least one N, method and bandwidth");
  }
  for (Method m : cfg.methods)
    for (std::size_t n : cfg.n_list)
      if (is_gwr(m)) check_gwr_cap(n, cfg.gwr);

  ExperimentReport report;
  for (std::size_t n : cfg.n_list) {
    for (std::size_t slot = 0; slot < cfg.bandwidths.size(); ++slot) {
      const double bw = cfg.bandwidths[slot];
      const std::size_t first_row = report.rows.size();
      for (int r = 0; r < cfg.replicates; ++r) {
        DgpSpec dgp = cfg.dgp;
        dgp.n = n;
        dgp.bandwidth = bw;
        dgp.seed = replicate_seed(cfg.seed, n, slot, static_cast<std::size_t>(r));
        SimulatedData sim = generate_dataset(dgp);
        for (Method m : cfg.methods) {
          ReplicateRow row;
          row.method = m;
          row.n = n;
          row.bandwidth = bw;
          row.replicate = r;
          row.approximate_dgp = sim.approximate;
          try {
            MethodOutcome o = run_method(m, sim.data, cfg.scagwr, cfg.gwr);
            for (int k = 0; k < 3; ++k) {
              const Eigen::VectorXd err = o.beta.col(k) - sim.true_beta.col(k);
              row.rmse[static_cast<std::size_t>(k)] = std::sqrt(err.squaredNorm() / static_cast<double>(n));
              row.sd_estimate[static_cast<std::size_t>(k)] = detail::column_sd(o.beta.col(k));
            }
            row.cv = o.cv;
            row.aicc = o.aicc;
            row.seconds = o.seconds;
            row.b = o.b;
            row.alpha = o.alpha;
            row.h = o.h;
            row.ok = true;
          } catch (const NumericalError& e) {
            row.error = e.what();
          }
          report.rows.push_back(std::move(row));
        }
      }
      for (Method m : cfg.methods) {
        SummaryRow s;
        s.method = m;
        s.n = n;
        s.bandwidth = bw;
        std::array<double, 3> mse{};
        for (std::size_t k = first_row; k < report.rows.size(); ++k) {
          const ReplicateRow& row = report.rows[k];
          if (row.method != m) continue;
          if (!row.ok) {
            ++s.failed;
            continue;
          }
          ++s.replicates;
          for (std::size_t c = 0; c < 3; ++c) {
            s.mean_rmse[c] += row.rmse[c];
            mse[c] += row.rmse[c] * row.rmse[c];
            s.mean_sd_estimate[c] += row.sd_estimate[c];
          }
          s.mean_cv += row.cv;
          s.mean_aicc += row.aicc;
          s.mean_seconds += row.seconds;
        }
        const int total = s.replicates + s.failed;
        if (s.failed > cfg.max_failure_share * total) {
          throw NumericalError(std::string(to_string(m)) + " failed in " + std::to_string(s.failed) + " of " +
                               std::to_string(total) + " replicates at N=" + std::to_string(n));
        }
        const double reps = static_cast<double>(s.replicates);
        for (std::size_t c = 0; c < 3; ++c) {
          s.mean_rmse[c] /= reps;
          s.pooled_rmse[c] = std::sqrt(mse[c] / reps);
          s.mean_sd_estimate[c] /= reps;
        }
        s.mean_cv /= reps;
        s.mean_aicc /= reps;
        s.mean_seconds /= reps;
        report.summary.push_back(s);
      }
    }
  }
  return report;
}

}  // namespace scagwr
