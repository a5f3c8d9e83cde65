#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "scagwr/dataset.hpp"
#include "scagwr/diagnostics.hpp"
#include "scagwr/error.hpp"
#include "scagwr/geometry.hpp"
#include "scagwr/kernel_family.hpp"
#include "scagwr/optimize.hpp"
#include "scagwr/parallel.hpp"

// Classical GWR with a full N-point kernel, plus OLS. Dense and unoptimized:
// this is the reference the scalable estimator is checked and timed against.

namespace scagwr {

struct OlsResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd residual;
  double rss = 0.0;
  /// Unbiased residual variance rss / (N - K).
  double sigma2 = 0.0;
};

inline OlsResult ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) throw ValidationError("design matrix is rank deficient; OLS undefined");
  OlsResult r;
  r.beta = qr.solve(y);
  r.residual = y - x * r.beta;
  r.rss = r.residual.squaredNorm();
  r.sigma2 = r.rss / static_cast<double>(x.rows() - x.cols());
  return r;
}

inline OlsResult ols(const Dataset& data) { return ols(data.x(), data.y()); }

/// Standard linear-model AICc with the same convention as the local models
/// (tr[S] = K, sigma^2 = rss / (N - K)).
inline double ols_aicc(const Dataset& data) {
  OlsResult r = ols(data);
  return aicc_value(static_cast<double>(data.size()), r.sigma2, static_cast<double>(data.covariates()));
}

/// Weighted least squares through the normal equations X'WX b = X'Wy.
inline Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                              const Eigen::VectorXd& w, std::size_t site = 0,
                                              double rcond_threshold = 1e-12) {
  Eigen::MatrixXd a = x.transpose() * w.asDiagonal() * x;
  Eigen::VectorXd rhs = x.transpose() * (w.array() * y.array()).matrix();
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= rcond_threshold)) {
    throw SingularFitError(site, "singular weighted least squares at site " + std::to_string(site));
  }
  return llt.solve(rhs);
}

struct GwrOptions {
  KernelFamily family = KernelFamily::gaussian;
  std::size_t max_sites = 20000;
  bool override_cap = false;
  /// Golden-section bracket tolerance in log10(h).
  double tolerance = 1e-3;
  double rcond_threshold = 1e-12;
  unsigned threads = 1;
};

inline void check_gwr_cap(std::size_t n, const GwrOptions& opts) {
  if (n > opts.max_sites && !opts.override_cap) {
    throw ResourceCapError("classical GWR capped at N=" + std::to_string(opts.max_sites) + " (got " +
                           std::to_string(n) + "); pass the override flag to run anyway");
  }
}

namespace detail {

inline double gwr_weight(double d2, double h, KernelFamily family) {
  if (family == KernelFamily::gaussian) {
    double r2 = d2 / (h * h);
    return r2 > 745.0 ? 0.0 : std::exp(-r2);
  }
  double r = std::sqrt(d2) / h;
  return r > 745.0 ? 0.0 : std::exp(-r);
}

// Dense local system A = X'G_i X, rhs = X'G_i y. With leave_out the i-th
// weight is zero.
class GwrLocal {
 public:
  GwrLocal(const Dataset& data, const GwrOptions& opts)
      : data_(data), opts_(opts), k_(data.covariates()),
        xr_(data.x()), a_(static_cast<Eigen::Index>(k_), static_cast<Eigen::Index>(k_)),
        rhs_(static_cast<Eigen::Index>(k_)), llt_(static_cast<Eigen::Index>(k_)) {}

  // Returns false when the local system is singular.
  bool factor(std::size_t i, double h, bool leave_out) {
    const std::size_t n = data_.size();
    const auto& sites = data_.sites();
    const double* xd = xr_.data();
    const double* yd = data_.y().data();
    acc_.assign(k_ * k_, 0.0);
    racc_.assign(k_, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (leave_out && j == i) continue;
      const double w = gwr_weight(sites.squared_distance(i, j), h, opts_.family);
      if (w == 0.0) continue;
      const double* xj = xd + j * k_;
      for (std::size_t a = 0; a < k_; ++a) {
        const double wa = w * xj[a];
        racc_[a] += wa * yd[j];
        for (std::size_t b = a; b < k_; ++b) acc_[a * k_ + b] += wa * xj[b];
      }
    }
    for (std::size_t a = 0; a < k_; ++a) {
      rhs_(static_cast<Eigen::Index>(a)) = racc_[a];
      for (std::size_t b = a; b < k_; ++b) {
        a_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = acc_[a * k_ + b];
        a_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = acc_[a * k_ + b];
      }
    }
    llt_.compute(a_);
    return llt_.info() == Eigen::Success && llt_.rcond() >= opts_.rcond_threshold;
  }

  Eigen::VectorXd beta() const { return llt_.solve(rhs_); }
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const { return llt_.solve(v); }
  const double* row(std::size_t j) const { return xr_.data() + j * k_; }

 private:
  const Dataset& data_;
  const GwrOptions& opts_;
  std::size_t k_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr_;
  Eigen::MatrixXd a_;
  Eigen::VectorXd rhs_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::vector<double> acc_;
  std::vector<double> racc_;
};

}  // namespace detail

/// Local GWR coefficients at site i with the full Gaussian (or exponential)
/// weight diagonal of bandwidth h.
inline Eigen::VectorXd gwr_beta(std::size_t i, double h, const Dataset& data, const GwrOptions& opts = {}) {
  if (!(h > 0.0)) throw ValidationError("GWR bandwidth must be > 0");
  if (i >= data.size()) throw ValidationError("site index out of range");
  detail::GwrLocal local(data, opts);
  if (!local.factor(i, h, false)) {
    throw SingularFitError(i, "singular GWR local fit at site " + std::to_string(i) +
                                  " with bandwidth h=" + std::to_string(h));
  }
  return local.beta();
}

/// Leave-one-out CV score; +inf when any local fit is singular.
inline double gwr_cv_score(double h, const Dataset& data, const GwrOptions& opts = {}) {
  if (!(h > 0.0)) throw ValidationError("GWR bandwidth must be > 0");
  check_gwr_cap(data.size(), opts);
  const std::size_t n = data.size();
  std::vector<double> sq(n, 0.0);
  std::vector<unsigned char> singular(n, 0);
  parallel_chunks(n, opts.threads, [&](std::size_t begin, std::size_t end, unsigned) {
    detail::GwrLocal local(data, opts);
    for (std::size_t i = begin; i < end; ++i) {
      if (!local.factor(i, h, true)) {
        singular[i] = 1;
        continue;
      }
      const double e = data.y()(static_cast<Eigen::Index>(i)) -
                       data.x().row(static_cast<Eigen::Index>(i)).dot(local.beta());
      sq[i] = e * e;
    }
  });
  double cv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (singular[i]) return std::numeric_limits<double>::infinity();
    cv += sq[i];
  }
  return cv;
}

struct BandwidthBounds {
  double lo = 0.0;
  double hi = 0.0;
};

/// Median pairwise distance; exact up to max_pairs pairs, otherwise over a
/// fixed-seed random sample of max_pairs pairs.
inline double median_interpoint_distance(const SiteSet& sites, std::size_t max_pairs = 5'000'000) {
  const std::size_t n = sites.size();
  const std::size_t total = n * (n - 1) / 2;
  std::vector<double> d;
  if (total <= max_pairs) {
    d.reserve(total);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) d.push_back(sites.distance(i, j));
  } else {
    std::mt19937_64 rng(0x5ca1ab1eULL);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    d.reserve(max_pairs);
    while (d.size() < max_pairs) {
      std::size_t i = pick(rng), j = pick(rng);
      if (i != j) d.push_back(sites.distance(i, j));
    }
  }
  return median(std::move(d));
}

/// [0.01, 100] x median inter-site distance.
inline BandwidthBounds default_gwr_bounds(const SiteSet& sites) {
  const double m = median_interpoint_distance(sites);
  return {0.01 * m, 100.0 * m};
}

struct BandwidthResult {
  double h = 0.0;
  double objective = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
};

/// Golden-section search on log h minimizing the GWR LOOCV score.
inline BandwidthResult gwr_loocv_bandwidth(const Dataset& data, BandwidthBounds bounds,
                                           const GwrOptions& opts = {}) {
  if (!(bounds.lo > 0.0) || !(bounds.hi > bounds.lo)) throw ValidationError("invalid bandwidth bounds");
  check_gwr_cap(data.size(), opts);
  ScalarMinimum m = golden_section([&](double lh) { return gwr_cv_score(std::pow(10.0, lh), data, opts); },
                                   std::log10(bounds.lo), std::log10(bounds.hi), opts.tolerance);
  if (!std::isfinite(m.f)) throw CalibrationError("GWR CV is degenerate (all local fits singular) over the bandwidth range");
  return {std::pow(10.0, m.x), m.f, m.evaluations};
}

struct GwrFit {
  double h = 0.0;
  Eigen::MatrixXd beta;
  double rss = 0.0;
  double trS = 0.0;
  double trStS = 0.0;
  double n_star = 0.0;
  double sigma2 = 0.0;
  /// NaN where undefined.
  double aicc = std::numeric_limits<double>::quiet_NaN();
};

/// Full-sample GWR at bandwidth h with tr[S] and tr[S'S] from the explicit
/// hat-matrix rows s_ij = x_i A_i^-1 x_j' w_ij.
inline GwrFit gwr_fit(double h, const Dataset& data, const GwrOptions& opts = {}) {
  if (!(h > 0.0)) throw ValidationError("GWR bandwidth must be > 0");
  check_gwr_cap(data.size(), opts);
  const std::size_t n = data.size();
  const std::size_t k = data.covariates();
  GwrFit out;
  out.h = h;
  out.beta.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  std::vector<double> sq(n), s_ii(n), sts(n);
  parallel_chunks(n, opts.threads, [&](std::size_t begin, std::size_t end, unsigned) {
    detail::GwrLocal local(data, opts);
    for (std::size_t i = begin; i < end; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (!local.factor(i, h, false)) {
        throw SingularFitError(i, "singular GWR local fit at site " + std::to_string(i) +
                                      " with bandwidth h=" + std::to_string(h));
      }
      Eigen::VectorXd b = local.beta();
      out.beta.row(ii) = b.transpose();
      const double e = data.y()(ii) - data.x().row(ii).dot(b);
      sq[i] = e * e;
      Eigen::VectorXd v = local.solve(data.x().row(ii).transpose());
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double w = detail::gwr_weight(data.sites().squared_distance(i, j), h, opts.family);
        if (w == 0.0) continue;
        const double* xj = local.row(j);
        double dot = 0.0;
        for (std::size_t a = 0; a < k; ++a) dot += xj[a] * v(static_cast<Eigen::Index>(a));
        const double s = dot * w;
        acc += s * s;
        if (j == i) s_ii[i] = s;
      }
      sts[i] = acc;
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    out.rss += sq[i];
    out.trS += s_ii[i];
    out.trStS += sts[i];
  }
  const double nn = static_cast<double>(n);
  out.n_star = effective_sample_size(nn, out.trS, out.trStS);
  out.sigma2 = out.rss / out.n_star;
  if (out.n_star > 0.0 && nn - 2.0 - out.trS > 0.0 && out.sigma2 > 0.0) {
    out.aicc = aicc_value(nn, out.sigma2, out.trS);
  }
  return out;
}

/// AICc at bandwidth h; +inf where undefined or singular.
inline double gwr_aicc(double h, const Dataset& data, const GwrOptions& opts = {}) {
  try {
    GwrFit f = gwr_fit(h, data, opts);
    return std::isfinite(f.aicc) ? f.aicc : std::numeric_limits<double>::infinity();
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

inline BandwidthResult gwr_aicc_bandwidth(const Dataset& data, BandwidthBounds bounds,
                                          const GwrOptions& opts = {}) {
  if (!(bounds.lo > 0.0) || !(bounds.hi > bounds.lo)) throw ValidationError("invalid bandwidth bounds");
  check_gwr_cap(data.size(), opts);
  ScalarMinimum m = golden_section([&](double lh) { return gwr_aicc(std::pow(10.0, lh), data, opts); },
                                   std::log10(bounds.lo), std::log10(bounds.hi), opts.tolerance);
  if (!std::isfinite(m.f)) throw CalibrationError("GWR AICc is undefined over the bandwidth range");
  return {std::pow(10.0, m.x), m.f, m.evaluations};
}

}  // namespace scagwr
