#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

namespace scagwr {

struct ScalarMinimum {
  double x = 0.0;
  double f = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
};

namespace detail {
inline double sanitize(double f) { return std::isnan(f) ? std::numeric_limits<double>::infinity() : f; }
}  // namespace detail

/// Golden-section search on [lo, hi] until the bracket is narrower than tol.
/// Returns the best point evaluated; NaN objective values count as +inf.
template <typename F>
ScalarMinimum golden_section(F&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  ScalarMinimum best;
  auto eval = [&](double x) {
    double v = detail::sanitize(f(x));
    ++best.evaluations;
    if (v < best.f || best.evaluations == 1) {
      best.f = v;
      best.x = x;
    }
    return v;
  };
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = eval(c);
  double fd = eval(d);
  while (hi - lo > tol) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = eval(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = eval(d);
    }
  }
  return best;
}

struct PlaneMinimum {
  std::array<double, 2> x{};
  double f = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  int rounds = 0;
};

/// Nelder-Mead on a box (points are clamped into [lo, hi]^2).
template <typename F>
PlaneMinimum nelder_mead_box(F&& f, std::array<double, 2> start, double lo, double hi, double step,
                             double ftol, int max_evaluations) {
  using Point = std::array<double, 2>;
  PlaneMinimum out;
  auto clamp = [&](Point p) {
    for (double& v : p) v = std::clamp(v, lo, hi);
    return p;
  };
  auto eval = [&](const Point& p) {
    ++out.evaluations;
    return detail::sanitize(f(p));
  };
  std::array<Point, 3> pts{clamp(start), clamp({start[0] + step, start[1]}), clamp({start[0], start[1] + step})};
  std::array<double, 3> fv{eval(pts[0]), eval(pts[1]), eval(pts[2])};
  while (out.evaluations < static_cast<std::size_t>(max_evaluations)) {
    ++out.rounds;
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int best = order[0], mid = order[1], worst = order[2];
    if (std::isfinite(fv[worst]) &&
        std::abs(fv[worst] - fv[best]) <= ftol * (std::abs(fv[best]) + 1e-300)) {
      break;
    }
    Point centroid{(pts[best][0] + pts[mid][0]) / 2.0, (pts[best][1] + pts[mid][1]) / 2.0};
    auto along = [&](double t) {
      return clamp({centroid[0] + t * (pts[worst][0] - centroid[0]),
                    centroid[1] + t * (pts[worst][1] - centroid[1])});
    };
    Point xr = along(-1.0);
    double fr = eval(xr);
    if (fr < fv[best]) {
      Point xe = along(-2.0);
      double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[mid]) {
      pts[worst] = xr;
      fv[worst] = fr;
    } else {
      Point xc = fr < fv[worst] ? along(-0.5) : along(0.5);
      double fc = eval(xc);
      if (fc < std::min(fr, fv[worst])) {
        pts[worst] = xc;
        fv[worst] = fc;
      } else {
        for (int s : {mid, worst}) {
          pts[s] = clamp({pts[best][0] + 0.5 * (pts[s][0] - pts[best][0]),
                          pts[best][1] + 0.5 * (pts[s][1] - pts[best][1])});
          fv[s] = eval(pts[s]);
        }
      }
    }
  }
  int best = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  out.x = pts[best];
  out.f = fv[best];
  return out;
}

}  // namespace scagwr
