#pragma once

// Brute-force reference implementations used by the tests. Nothing here
// reuses the library's neighbor search, moment tables or solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "scagwr.hpp"

namespace oracle {

using scagwr::Dataset;
using scagwr::FitParams;
using scagwr::KernelFamily;

/// Q nearest neighbors of every site by a full sort on (distance, index).
inline std::vector<std::vector<std::size_t>> brute_knn(const scagwr::SiteSet& sites, std::size_t q) {
  const std::size_t n = sites.size();
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = sites.x(i) - sites.x(j), dy = sites.y(i) - sites.y(j);
      all.emplace_back(dx * dx + dy * dy, j);
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < q; ++r) out[i].push_back(all[r].second);
  }
  return out;
}

inline double brute_h0(const scagwr::SiteSet& sites, std::size_t q, KernelFamily family) {
  auto knn = brute_knn(sites, q);
  std::vector<double> d;
  for (std::size_t i = 0; i < sites.size(); ++i) d.push_back(sites.distance(i, knn[i].back()));
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size() / 2;
  const double med = d.size() % 2 ? d[m] : (d[m - 1] + d[m]) / 2.0;
  return family == KernelFamily::gaussian ? med / std::sqrt(3.0) : med / 3.0;
}

struct Problem {
  Dataset data;
  int poly = 4;
  std::size_t q = 10;
  KernelFamily family = KernelFamily::gaussian;
  std::vector<std::vector<std::size_t>> knn;
  double h0 = 1.0;
};

/// Random sites in the unit square, intercept plus standard normal
/// covariates, and a response with a smooth spatial trend plus noise.
inline Problem random_problem(std::size_t n, std::size_t k, int poly, std::size_t q, std::uint64_t seed,
                              KernelFamily family = KernelFamily::gaussian) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto nn = static_cast<Eigen::Index>(n);
  scagwr::Coords coords(nn, 2);
  for (Eigen::Index i = 0; i < nn; ++i) {
    coords(i, 0) = unit(rng);
    coords(i, 1) = unit(rng);
  }
  Eigen::MatrixXd x(nn, static_cast<Eigen::Index>(k));
  x.col(0).setOnes();
  for (Eigen::Index c = 1; c < x.cols(); ++c)
    for (Eigen::Index i = 0; i < nn; ++i) x(i, c) = normal(rng);
  Eigen::VectorXd y(nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    double v = 1.0 + std::sin(3.0 * coords(i, 0)) + normal(rng);
    for (Eigen::Index c = 1; c < x.cols(); ++c) v += x(i, c) * (0.5 + coords(i, 1) * static_cast<double>(c));
    y(i) = v;
  }
  Problem p{Dataset(y, x, scagwr::SiteSet(coords)), poly, q, family, {}, 1.0};
  p.knn = brute_knn(p.data.sites(), q);
  p.h0 = brute_h0(p.data.sites(), q, family);
  return p;
}

/// Diagonal of G_i: alpha everywhere plus sum_p b^p g0^(4/2^p) on site i and
/// its Q nearest neighbors. With leave_out the i-th entry is zero.
inline Eigen::VectorXd weights(const Problem& p, std::size_t i, const FitParams& params, bool leave_out = false) {
  const std::size_t n = p.data.size();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), params.alpha);
  auto add = [&](std::size_t j) {
    const double d = p.data.sites().distance(i, j);
    const double g0 = p.family == KernelFamily::gaussian ? std::exp(-(d / p.h0) * (d / p.h0)) : std::exp(-d / p.h0);
    double s = 0.0;
    for (int e = 1; e <= p.poly; ++e) s += std::pow(params.b, e) * std::pow(g0, 4.0 / std::pow(2.0, e));
    w(static_cast<Eigen::Index>(j)) += s;
  };
  add(i);
  for (std::size_t j : p.knn[i]) add(j);
  if (leave_out) w(static_cast<Eigen::Index>(i)) = 0.0;
  return w;
}

/// Weighted least squares through a QR factorization of sqrt(W) X.
inline Eigen::VectorXd wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  const Eigen::VectorXd s = w.array().sqrt();
  Eigen::MatrixXd xs = s.asDiagonal() * x;
  Eigen::VectorXd ys = s.asDiagonal() * y;
  return xs.colPivHouseholderQr().solve(ys);
}

inline Eigen::VectorXd beta_full(const Problem& p, std::size_t i, const FitParams& params) {
  return wls(p.data.x(), p.data.y(), weights(p, i, params));
}

inline Eigen::VectorXd beta_loo(const Problem& p, std::size_t i, const FitParams& params) {
  return wls(p.data.x(), p.data.y(), weights(p, i, params, true));
}

inline double cv_score(const Problem& p, const FitParams& params) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const double e = p.data.y()(static_cast<Eigen::Index>(i)) -
                     p.data.x().row(static_cast<Eigen::Index>(i)).dot(beta_loo(p, i, params));
    s += e * e;
  }
  return s;
}

/// C_i = (X'G_i X)^-1 X'G_i, so that beta_i = C_i y.
inline Eigen::MatrixXd coefficient_map(const Problem& p, std::size_t i, const FitParams& params) {
  const Eigen::MatrixXd& x = p.data.x();
  const Eigen::VectorXd w = weights(p, i, params);
  Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
  return (xtw * x).fullPivLu().solve(xtw);
}

/// Hat matrix S with rows x_i C_i.
inline Eigen::MatrixXd hat_matrix(const Problem& p, const FitParams& params) {
  const auto n = static_cast<Eigen::Index>(p.data.size());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    s.row(i) = p.data.x().row(i) * coefficient_map(p, static_cast<std::size_t>(i), params);
  return s;
}

struct Diagnostics {
  double trS, trStS, n_star, rss, sigma2, aicc;
  Eigen::MatrixXd var;  // N x K
};

inline Diagnostics diagnostics(const Problem& p, const FitParams& params) {
  const Eigen::MatrixXd s = hat_matrix(p, params);
  const double n = static_cast<double>(p.data.size());
  Diagnostics d;
  d.trS = s.trace();
  d.trStS = (s.transpose() * s).trace();
  d.n_star = n - 2.0 * d.trS + d.trStS;
  d.rss = (p.data.y() - s * p.data.y()).squaredNorm();
  d.sigma2 = d.rss / d.n_star;
  d.aicc = n * std::log(d.sigma2) + n * std::log(2.0 * 3.14159265358979323846) + n * (n + d.trS) / (n - 2.0 - d.trS);
  d.var.resize(s.rows(), p.data.x().cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Eigen::MatrixXd c = coefficient_map(p, static_cast<std::size_t>(i), params);
    d.var.row(i) = d.sigma2 * (c * c.transpose()).diagonal().transpose();
  }
  return d;
}

/// Library-side moment tables for a problem.
struct Built {
  scagwr::NeighborGraph graph;
  scagwr::KernelSpec spec;
  scagwr::MomentSet ms;
};

inline Built build(const Problem& p, unsigned threads = 1) {
  scagwr::NeighborGraph g = scagwr::build_neighbor_graph(p.data.sites(), p.q, threads);
  scagwr::KernelSpec spec{p.family, p.poly, p.q, scagwr::base_bandwidth(g, p.family)};
  scagwr::MomentSet ms = scagwr::build_moments(p.data, spec, g, threads);
  return Built{std::move(g), spec, std::move(ms)};
}

inline double rel(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

template <typename A, typename B>
double rel(const A& a, const B& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace oracle
