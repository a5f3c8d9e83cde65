#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <utility>

#include "scagwr/dataset.hpp"
#include "scagwr/diagnostics.hpp"
#include "scagwr/error.hpp"
#include "scagwr/estimator.hpp"
#include "scagwr/geometry.hpp"
#include "scagwr/kernel.hpp"
#include "scagwr/moments.hpp"
#include "scagwr/optimize.hpp"

namespace scagwr {

enum class OptimizerKind { coordinate_golden, simplex };

inline std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::coordinate_golden ? "golden" : "simplex";
}
inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "golden") return OptimizerKind::coordinate_golden;
  if (s == "simplex") return OptimizerKind::simplex;
  throw ValidationError("unknown optimizer '" + std::string(s) + "'");
}

/// Search over (log10 b, log10 alpha) in [lo, hi]^2.
struct OptimizerOptions {
  OptimizerKind kind = OptimizerKind::coordinate_golden;
  double log10_lo = -6.0;
  double log10_hi = 6.0;
  /// Golden-section bracket width at which a 1-d sweep stops (log10 units).
  double sweep_tolerance = 1e-3;
  /// Outer loop stops when a full round improves the objective by less than this, relatively.
  double relative_improvement = 1e-8;
  int max_rounds = 20;
  /// After both sweeps, also search along the round's displacement.
  bool pattern_search = true;
  FitParams start{1.0, 1.0};
};

struct OptimizationResult {
  FitParams params;
  double objective = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  int rounds = 0;
};

/// Calibration objective at (b, alpha); numerical failures count as +inf.
inline double evaluate_objective(const FitParams& params, const MomentSet& ms, Criterion criterion,
                                 const SolveOptions& opts) {
  try {
    return criterion == Criterion::loocv ? loocv_objective(params, ms, opts).value
                                         : aicc_objective(params, ms, opts).value;
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Minimizes the LOOCV score or AICc over b >= 0, alpha >= 0 on a log grid
/// box. The default scheme alternates golden-section sweeps on log10 b and
/// log10 alpha; a sweep result is accepted only if it improves the objective.
inline OptimizationResult optimize_params(const MomentSet& ms, Criterion criterion,
                                          const SolveOptions& opts = {},
                                          const OptimizerOptions& oo = {}) {
  auto objective = [&](double lb, double la) {
    return evaluate_objective({std::pow(10.0, lb), std::pow(10.0, la)}, ms, criterion, opts);
  };
  OptimizationResult out;
  double lb = std::log10(oo.start.b);
  double la = std::log10(oo.start.alpha);

  if (oo.kind == OptimizerKind::simplex) {
    PlaneMinimum m = nelder_mead_box([&](std::array<double, 2> p) { return objective(p[0], p[1]); },
                                     {lb, la}, oo.log10_lo, oo.log10_hi, 1.0,
                                     oo.relative_improvement, 4000);
    lb = m.x[0];
    la = m.x[1];
    out.objective = m.f;
    out.evaluations = m.evaluations;
    out.rounds = m.rounds;
  } else {
    double f = objective(lb, la);
    out.evaluations = 1;
    for (int round = 1; round <= oo.max_rounds; ++round) {
      out.rounds = round;
      const double before = f;
      const double start_b = lb, start_a = la;
      ScalarMinimum sb = golden_section([&](double t) { return objective(t, la); }, oo.log10_lo,
                                        oo.log10_hi, oo.sweep_tolerance);
      out.evaluations += sb.evaluations;
      if (sb.f < f) {
        f = sb.f;
        lb = sb.x;
      }
      ScalarMinimum sa = golden_section([&](double t) { return objective(lb, t); }, oo.log10_lo,
                                        oo.log10_hi, oo.sweep_tolerance);
      out.evaluations += sa.evaluations;
      if (sa.f < f) {
        f = sa.f;
        la = sa.x;
      }
      // From the second round on, line search along the round's net move so a
      // diagonal valley is followed rather than crossed a little at a time.
      const double db = lb - start_b, da = la - start_a;
      if (oo.pattern_search && round > 1 && std::isfinite(f) && (db != 0.0 || da != 0.0)) {
        double t_lo = -std::numeric_limits<double>::infinity(), t_hi = std::numeric_limits<double>::infinity();
        auto limit = [&](double x0, double dx) {
          if (dx == 0.0) return;
          double a = (oo.log10_lo - x0) / dx, b = (oo.log10_hi - x0) / dx;
          if (a > b) std::swap(a, b);
          t_lo = std::max(t_lo, a);
          t_hi = std::min(t_hi, b);
        };
        limit(start_b, db);
        limit(start_a, da);
        const double len = std::hypot(db, da);
        ScalarMinimum sl = golden_section([&](double t) { return objective(start_b + t * db, start_a + t * da); },
                                          t_lo, t_hi, oo.sweep_tolerance / len);
        out.evaluations += sl.evaluations;
        if (sl.f < f) {
          f = sl.f;
          lb = std::clamp(start_b + sl.x * db, oo.log10_lo, oo.log10_hi);
          la = std::clamp(start_a + sl.x * da, oo.log10_lo, oo.log10_hi);
        }
      }
      if (std::isfinite(before) && before - f <= oo.relative_improvement * std::abs(before)) break;
    }
    out.objective = f;
  }
  if (!std::isfinite(out.objective)) {
    throw CalibrationError("calibration failed: objective is non-finite over the whole search region");
  }
  out.params = {std::pow(10.0, lb), std::pow(10.0, la)};
  return out;
}

struct FitConfig {
  KernelFamily family = KernelFamily::gaussian;
  int poly = 4;
  std::size_t neighbors = 100;
  Criterion criterion = Criterion::loocv;
  SolveOptions solve;
  OptimizerOptions optimizer;
  SignificanceTest significance = SignificanceTest::normal;
  /// Report the diagonal-only tr[S'S] next to the selected variant.
  bool both_traces = false;
};

/// Wall time per phase, seconds. Estimation includes the diagnostics.
struct PhaseTimes {
  double neighbors = 0.0;
  double moments = 0.0;
  double calibration = 0.0;
  double estimation = 0.0;
  double total() const { return neighbors + moments + calibration + estimation; }
};

struct FitResult {
  Eigen::MatrixXd beta;
  FitParams params;
  KernelSpec spec;
  Criterion criterion = Criterion::loocv;
  double cv_score = 0.0;
  OptimizationResult optimization;
  DiagnosticsResult diagnostics;
  PhaseTimes times;
  std::size_t moment_elements = 0;
};

namespace detail {
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double lap() {
    auto now = std::chrono::steady_clock::now();
    double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};
}  // namespace detail

/// Full pipeline: neighbor graph and h0, moment pre-compression, calibration of
/// (b, alpha), then coefficient estimation with diagnostics.
inline FitResult fit_scagwr(const Dataset& data, const FitConfig& cfg) {
  if (cfg.neighbors >= data.size()) {
    throw ValidationError("neighbor count Q=" + std::to_string(cfg.neighbors) +
                          " must be below N=" + std::to_string(data.size()) + "; lower Q");
  }
  FitResult r;
  r.criterion = cfg.criterion;
  detail::Stopwatch clock;

  NeighborGraph graph = build_neighbor_graph(data.sites(), cfg.neighbors, cfg.solve.threads);
  r.spec = KernelSpec{cfg.family, cfg.poly, cfg.neighbors, base_bandwidth(graph, cfg.family)};
  r.spec.validate();
  r.times.neighbors = clock.lap();

  MomentSet ms = build_moments(data, r.spec, graph, cfg.solve.threads);
  r.moment_elements = ms.element_count();
  r.times.moments = clock.lap();

  r.optimization = optimize_params(ms, cfg.criterion, cfg.solve, cfg.optimizer);
  r.params = r.optimization.params;
  r.times.calibration = clock.lap();

  FullPass pass;
  r.diagnostics = variance_and_aicc(r.params, ms, cfg.solve, cfg.significance, cfg.both_traces, &pass);
  r.beta = std::move(pass.beta);
  r.cv_score = cfg.criterion == Criterion::loocv ? r.optimization.objective : cv_score(r.params, ms, cfg.solve);
  r.times.estimation = clock.lap();
  return r;
}

}  // namespace scagwr
