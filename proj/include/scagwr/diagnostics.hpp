#pragma once

#include <Eigen/Core>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "scagwr/error.hpp"
#include "scagwr/estimator.hpp"
#include "scagwr/moments.hpp"
#include "scagwr/parallel.hpp"

namespace scagwr {

enum class SignificanceTest { normal, student_t };

/// Two-sided 5% critical value of the standard normal.
inline constexpr double kNormalCritical5 = 1.959964;

struct DiagnosticsResult {
  double trS = 0.0;
  double trStS = 0.0;
  /// Diagonal-only tr[S'S]; NaN unless requested.
  double trStS_paper = std::numeric_limits<double>::quiet_NaN();
  double n_star = 0.0;
  double rss = 0.0;
  double sigma2_hat = 0.0;
  double aicc = 0.0;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  Eigen::MatrixXd beta_var;
  Eigen::MatrixXd t_values;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> significant_5pct;
  std::size_t ridge_events = 0;
};

/// Per-site quantities of one full-sample pass over all local fits.
struct FullPass {
  Eigen::MatrixXd beta;  // N x K
  Eigen::VectorXd residual;
  double rss = 0.0;
  double trS = 0.0;
  double trStS = 0.0;
  double trStS_other = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd var_unscaled;  // N x K, diag of A^-1 X'G_i^2 X A^-1
  std::size_t ridge_events = 0;
};

struct PassRequest {
  bool trace_sts = true;
  /// Also evaluate tr[S'S] under the trace variant not selected in SolveOptions.
  bool other_trace = false;
  bool variance = false;
};

namespace detail {

// X'G_i(b, alpha)^2 X expanded over the stored moments:
//   alpha^2 X'X + 2 alpha sum_p b^p M_i^(p) + sum_p sum_q b^(p+q) M_i^(p,q).
// `diag` receives the p == q part of the last sum, `cross` the p != q part.
inline void assemble_squared(const MomentSet& ms, std::size_t i, const FitParams& params,
                             const std::vector<double>& bpow, Eigen::MatrixXd& diag,
                             Eigen::MatrixXd& cross) {
  const double alpha = params.alpha;
  diag = (alpha * alpha) * ms.global_xx();
  cross.setZero();
  for (int p = 1; p <= ms.poly(); ++p) {
    const double cp = bpow[static_cast<std::size_t>(p - 1)];
    if (cp == 0.0) continue;
    diag.noalias() += (2.0 * alpha * cp) * ms.local_xx(i, p);
    diag.noalias() += (cp * cp) * ms.local_xx_pair(i, p, p);
    for (int q = p + 1; q <= ms.poly(); ++q) {
      const double cq = bpow[static_cast<std::size_t>(q - 1)];
      cross.noalias() += (2.0 * cp * cq) * ms.local_xx_pair(i, p, q);
    }
  }
}

}  // namespace detail

inline FullPass full_pass(const FitParams& params, const MomentSet& ms, const SolveOptions& opts,
                          PassRequest req = {}) {
  params.validate();
  const std::size_t n = ms.sites();
  const auto k = static_cast<Eigen::Index>(ms.covariates());
  const std::vector<double> bpow = scale_powers(params.b, ms.poly());
  double self_weight = params.alpha;
  for (double c : bpow) self_weight += c;

  FullPass out;
  out.beta.resize(static_cast<Eigen::Index>(n), k);
  out.residual.resize(static_cast<Eigen::Index>(n));
  if (req.variance) out.var_unscaled.resize(static_cast<Eigen::Index>(n), k);
  std::vector<double> s_ii(n, 0.0), sts(n, 0.0), sts_other(n, 0.0);
  std::vector<unsigned char> ridged(n, 0);
  const bool need_sq = req.trace_sts || req.variance || req.other_trace;
  const bool exact = opts.trace_variant == TraceVariant::exact;

  parallel_chunks(n, opts.threads, [&](std::size_t begin, std::size_t end, unsigned) {
    Eigen::MatrixXd a(k, k), diag(k, k), cross(k, k), sq(k, k), ainv(k, k);
    Eigen::VectorXd rhs(k), beta(k), v(k);
    LocalSolver solver(ms.covariates());
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(k, k);
    for (std::size_t i = begin; i < end; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      detail::assemble_local(ms, i, params, bpow, false, a, rhs);
      ridged[i] = solver.factor(a, ms, i, opts) ? 1 : 0;
      beta = solver.solve(rhs);
      out.beta.row(ii) = beta.transpose();
      out.residual(ii) = ms.response(i) - ms.row(i).dot(beta);
      v = solver.solve(ms.row(i).transpose());
      s_ii[i] = ms.row(i).dot(v) * self_weight;
      if (!need_sq) continue;
      detail::assemble_squared(ms, i, params, bpow, diag, cross);
      if (exact) {
        sq = diag + cross;
      } else {
        sq = diag;
      }
      sts[i] = v.dot(sq * v);
      if (req.other_trace) sts_other[i] = exact ? v.dot(diag * v) : v.dot((diag + cross) * v);
      if (req.variance) {
        ainv = solver.solve(identity);
        out.var_unscaled.row(ii) = (ainv * sq * ainv).diagonal().transpose();
      }
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    const double e = out.residual(static_cast<Eigen::Index>(i));
    out.rss += e * e;
    out.trS += s_ii[i];
    out.trStS += sts[i];
    out.ridge_events += ridged[i];
  }
  if (req.other_trace) {
    out.trStS_other = 0.0;
    for (double s : sts_other) out.trStS_other += s;
  }
  return out;
}

/// tr[S] = sum_i x_i A_i^-1 x_i' g_ii(b, alpha), A_i = X'G_i X from the moments.
inline double trace_S(const FitParams& params, const MomentSet& ms, const SolveOptions& opts = {}) {
  return full_pass(params, ms, opts, {.trace_sts = false}).trS;
}

/// tr[S'S] = sum_i x_i A_i^-1 X'G_i^2 X A_i^-1 x_i'.
inline double trace_StS(const FitParams& params, const MomentSet& ms, const SolveOptions& opts = {}) {
  return full_pass(params, ms, opts, {.trace_sts = true}).trStS;
}

inline double effective_sample_size(double n, double trS, double trStS) {
  return n - 2.0 * trS + trStS;
}

/// AICc = N log(sigma2) + N log(2 pi) + N (N + tr[S]) / (N - 2 - tr[S]).
inline double aicc_value(double n, double sigma2, double trS) {
  const double denom = n - 2.0 - trS;
  if (!(denom > 0.0)) {
    throw AiccUndefinedError("AICc undefined: N - 2 - tr[S] = " + std::to_string(denom) + " <= 0");
  }
  if (!(sigma2 > 0.0)) throw AiccUndefinedError("AICc undefined: residual variance is not positive");
  return n * std::log(sigma2) + n * std::log(2.0 * std::numbers::pi) + n * (n + trS) / denom;
}

/// AICc as a calibration objective: +inf where it is undefined.
inline ObjectiveValue aicc_objective(const FitParams& params, const MomentSet& ms,
                                     const SolveOptions& opts = {}) {
  FullPass pass = full_pass(params, ms, opts, {.trace_sts = true});
  const double n = static_cast<double>(ms.sites());
  const double n_star = effective_sample_size(n, pass.trS, pass.trStS);
  ObjectiveValue out;
  out.ridge_events = pass.ridge_events;
  if (!(n_star > 0.0) || !(n - 2.0 - pass.trS > 0.0) || !(pass.rss > 0.0)) return out;
  out.value = aicc_value(n, pass.rss / n_star, pass.trS);
  if (!std::isfinite(out.value)) out.value = std::numeric_limits<double>::infinity();
  return out;
}

inline double critical_value(SignificanceTest test, double dof) {
  if (test == SignificanceTest::normal) return kNormalCritical5;
  if (!(dof > 0.0)) throw ValidationError("t reference distribution needs positive degrees of freedom");
  boost::math::students_t dist(dof);
  return boost::math::quantile(dist, 0.975);
}

/// Residual variance, coefficient variances, t-values, significance flags and AICc
/// for the full-sample fit at the given parameters.
inline DiagnosticsResult variance_and_aicc(const FitParams& params, const MomentSet& ms,
                                           const SolveOptions& opts = {},
                                           SignificanceTest test = SignificanceTest::normal,
                                           bool with_other_trace = false,
                                           FullPass* pass_out = nullptr) {
  FullPass pass = full_pass(params, ms, opts,
                            {.trace_sts = true, .other_trace = with_other_trace, .variance = true});
  const double n = static_cast<double>(ms.sites());
  DiagnosticsResult d;
  d.trS = pass.trS;
  d.trStS = pass.trStS;
  if (with_other_trace) {
    d.trStS_paper = opts.trace_variant == TraceVariant::exact ? pass.trStS_other : pass.trStS;
  }
  d.n_star = effective_sample_size(n, d.trS, d.trStS);
  d.rss = pass.rss;
  if (!(d.n_star > 0.0)) throw NumericalError("effective sample size is not positive");
  d.sigma2_hat = d.rss / d.n_star;
  d.aicc = aicc_value(n, d.sigma2_hat, d.trS);

  const Eigen::VectorXd& y = ms.y();
  const double tss = (y.array() - y.mean()).square().sum();
  d.r2 = 1.0 - d.rss / tss;
  d.adj_r2 = 1.0 - (1.0 - d.r2) * (n - 1.0) / d.n_star;

  d.beta_var = d.sigma2_hat * pass.var_unscaled;
  d.t_values = pass.beta.array() / d.beta_var.array().sqrt();
  const double crit = critical_value(test, d.n_star - static_cast<double>(ms.covariates()));
  d.significant_5pct = d.t_values.array().abs() > crit;
  d.ridge_events = pass.ridge_events;
  if (pass_out) *pass_out = std::move(pass);
  return d;
}

}  // namespace scagwr
