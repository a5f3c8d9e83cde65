#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "scagwr/error.hpp"
#include "scagwr/kernel.hpp"
#include "scagwr/moments.hpp"
#include "scagwr/parallel.hpp"

namespace scagwr {

enum class SingularPolicy { strict, ridge };
enum class Criterion { loocv, aicc };
enum class TraceVariant { exact, paper_faithful };

inline std::string_view to_string(SingularPolicy p) { return p == SingularPolicy::strict ? "strict" : "ridge"; }
inline std::string_view to_string(Criterion c) { return c == Criterion::loocv ? "loocv" : "aicc"; }
inline std::string_view to_string(TraceVariant t) {
  return t == TraceVariant::exact ? "exact" : "paper-faithful";
}

inline SingularPolicy parse_singular_policy(std::string_view s) {
  if (s == "strict") return SingularPolicy::strict;
  if (s == "ridge") return SingularPolicy::ridge;
  throw ValidationError("unknown singular policy '" + std::string(s) + "'");
}
inline Criterion parse_criterion(std::string_view s) {
  if (s == "loocv") return Criterion::loocv;
  if (s == "aicc") return Criterion::aicc;
  throw ValidationError("unknown criterion '" + std::string(s) + "'");
}

struct SolveOptions {
  SingularPolicy singular_policy = SingularPolicy::strict;
  /// Local systems with a reciprocal condition estimate below this are singular.
  double rcond_threshold = 1e-12;
  /// Ridge policy adds ridge_lambda * trace(X'X)/K * I before re-solving.
  double ridge_lambda = 1e-10;
  /// tr[S'S] and coefficient variances: exact squared-kernel expansion or the
  /// diagonal-only (p == q) form.
  TraceVariant trace_variant = TraceVariant::exact;
  unsigned threads = 1;
};

/// Factorizes assembled K x K local systems and applies the singular policy.
class LocalSolver {
 public:
  explicit LocalSolver(std::size_t k)
      : llt_(static_cast<Eigen::Index>(k)), work_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) {}

  /// Returns true when the ridge fallback was needed.
  bool factor(const Eigen::MatrixXd& a, const MomentSet& ms, std::size_t site, const SolveOptions& opts) {
    llt_.compute(a);
    if (usable(opts)) return false;
    if (opts.singular_policy == SingularPolicy::strict) throw_singular(site);
    const double k = static_cast<double>(ms.covariates());
    work_ = a;
    work_.diagonal().array() += opts.ridge_lambda * ms.global_xx().trace() / k;
    llt_.compute(work_);
    if (!usable(opts)) throw_singular(site);
    return true;
  }

  template <typename Rhs>
  auto solve(const Rhs& rhs) const {
    return llt_.solve(rhs);
  }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

 private:
  bool usable(const SolveOptions& opts) const {
    if (llt_.info() != Eigen::Success) return false;
    double rc = llt_.rcond();
    return std::isfinite(rc) && rc >= opts.rcond_threshold;
  }
  [[noreturn]] static void throw_singular(std::size_t site) {
    throw SingularFitError(site, "singular local fit at site " + std::to_string(site) +
                                     " (reciprocal condition below threshold)");
  }

  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd work_;
};

namespace detail {

/// a = alpha X'X + sum_p b^p M_i^(p) and the matching right-hand side.
/// With leave_out the site's own contribution, weighted by
/// g_ii(b, alpha) = alpha + sum_p b^p, is removed.
inline void assemble_local(const MomentSet& ms, std::size_t i, const FitParams& params,
                           const std::vector<double>& bpow, bool leave_out, Eigen::MatrixXd& a,
                           Eigen::VectorXd& rhs) {
  a = params.alpha * ms.global_xx();
  rhs = params.alpha * ms.global_xy();
  double self_weight = params.alpha;
  for (int p = 1; p <= ms.poly(); ++p) {
    const double c = bpow[static_cast<std::size_t>(p - 1)];
    if (c == 0.0) continue;
    a.noalias() += c * ms.local_xx(i, p);
    rhs.noalias() += c * ms.local_xy(i, p);
    self_weight += c;
  }
  if (leave_out) {
    auto xi = ms.row(i);
    a.noalias() -= self_weight * (xi.transpose() * xi);
    rhs.noalias() -= (self_weight * ms.response(i)) * xi.transpose();
  }
}

inline void check_params(const FitParams& params) { params.validate(); }

}  // namespace detail

/// Full-sample local coefficients at site i, O(K^3) from the moments.
inline Eigen::VectorXd beta_full(std::size_t i, const FitParams& params, const MomentSet& ms,
                                 const SolveOptions& opts = {}) {
  detail::check_params(params);
  if (i >= ms.sites()) throw ValidationError("site index out of range");
  const auto k = static_cast<Eigen::Index>(ms.covariates());
  Eigen::MatrixXd a(k, k);
  Eigen::VectorXd rhs(k);
  detail::assemble_local(ms, i, params, scale_powers(params.b, ms.poly()), false, a, rhs);
  LocalSolver solver(ms.covariates());
  solver.factor(a, ms, i, opts);
  return solver.solve(rhs);
}

/// Leave-one-out local coefficients at site i (site i's whole weight zeroed).
inline Eigen::VectorXd beta_loo(std::size_t i, const FitParams& params, const MomentSet& ms,
                                const SolveOptions& opts = {}) {
  detail::check_params(params);
  if (i >= ms.sites()) throw ValidationError("site index out of range");
  const auto k = static_cast<Eigen::Index>(ms.covariates());
  Eigen::MatrixXd a(k, k);
  Eigen::VectorXd rhs(k);
  detail::assemble_local(ms, i, params, scale_powers(params.b, ms.poly()), true, a, rhs);
  LocalSolver solver(ms.covariates());
  solver.factor(a, ms, i, opts);
  return solver.solve(rhs);
}

struct ObjectiveValue {
  double value = std::numeric_limits<double>::infinity();
  std::size_t ridge_events = 0;
};

/// Leave-one-out CV score sum_i (y_i - x_i beta_{-i})^2. Under the strict
/// policy a singular site propagates SingularFitError.
inline ObjectiveValue loocv_objective(const FitParams& params, const MomentSet& ms,
                                      const SolveOptions& opts = {}) {
  detail::check_params(params);
  const std::size_t n = ms.sites();
  const auto k = static_cast<Eigen::Index>(ms.covariates());
  const std::vector<double> bpow = scale_powers(params.b, ms.poly());
  std::vector<double> sq(n);
  std::vector<unsigned char> ridged(n, 0);
  parallel_chunks(n, opts.threads, [&](std::size_t begin, std::size_t end, unsigned) {
    Eigen::MatrixXd a(k, k);
    Eigen::VectorXd rhs(k);
    Eigen::VectorXd beta(k);
    LocalSolver solver(ms.covariates());
    for (std::size_t i = begin; i < end; ++i) {
      detail::assemble_local(ms, i, params, bpow, true, a, rhs);
      ridged[i] = solver.factor(a, ms, i, opts) ? 1 : 0;
      beta = solver.solve(rhs);
      const double e = ms.response(i) - ms.row(i).dot(beta);
      sq[i] = e * e;
    }
  });
  ObjectiveValue out{0.0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    out.value += sq[i];
    out.ridge_events += ridged[i];
  }
  return out;
}

inline double cv_score(const FitParams& params, const MomentSet& ms, const SolveOptions& opts = {}) {
  return loocv_objective(params, ms, opts).value;
}

}  // namespace scagwr
