#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "scagwr/error.hpp"
#include "scagwr/geometry.hpp"
#include "scagwr/kernel_family.hpp"

namespace scagwr {

/// Fixed ingredients of the polynomial multiscale kernel: base family,
/// polynomial count P, neighbor count Q and base bandwidth h0.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  int poly = 4;
  std::size_t neighbors = 100;
  double h0 = 1.0;

  void validate() const {
    if (poly < 1) throw ValidationError("polynomial count P must be >= 1");
    if (poly > 30) throw ValidationError("polynomial count P is unreasonably large");
    if (neighbors < 1) throw ValidationError("neighbor count Q must be >= 1");
    if (!(h0 > 0.0) || !std::isfinite(h0)) throw ValidationError("base bandwidth h0 must be > 0");
  }
};

/// Calibrated kernel parameters: scale b and global weight alpha.
struct FitParams {
  double b = 1.0;
  double alpha = 1.0;

  void validate() const {
    if (!(b >= 0.0) || !(alpha >= 0.0) || !std::isfinite(b) || !std::isfinite(alpha)) {
      throw ValidationError("kernel parameters must be finite and nonnegative");
    }
    if (b == 0.0 && alpha == 0.0) throw ValidationError("b and alpha cannot both be zero");
  }
};

/// exp[-(d/h)^2] (gaussian) or exp(-d/h) (exponential).
inline double base_kernel(double d, double h0, KernelFamily family) {
  if (!std::isfinite(d)) throw ValidationError("non-finite distance passed to base kernel");
  if (d < 0.0) throw ValidationError("negative distance passed to base kernel");
  if (!(h0 > 0.0)) throw ValidationError("kernel bandwidth must be > 0");
  double r = d / h0;
  return family == KernelFamily::gaussian ? std::exp(-r * r) : std::exp(-r);
}

/// Exponent 4/2^p of the p-th polynomial term (p is 1-based). Exact in
/// binary floating point.
inline double poly_exponent(int p) { return std::ldexp(4.0, -p); }

inline double poly_term(double g0, int p) {
  if (g0 <= 0.0) return 0.0;
  return std::exp(poly_exponent(p) * std::log(g0));
}

/// Terms g0^(4/2^p) for p = 1..P.
inline std::vector<double> poly_terms(double g0, int poly) {
  if (!(g0 >= 0.0 && g0 <= 1.0)) throw ValidationError("base weight must lie in [0, 1]");
  std::vector<double> out(static_cast<std::size_t>(poly));
  for (int p = 1; p <= poly; ++p) out[static_cast<std::size_t>(p - 1)] = poly_term(g0, p);
  return out;
}

/// Powers b^1..b^P.
inline std::vector<double> scale_powers(double b, int poly) {
  std::vector<double> out(static_cast<std::size_t>(poly));
  double acc = 1.0;
  for (int p = 0; p < poly; ++p) {
    acc *= b;
    out[static_cast<std::size_t>(p)] = acc;
  }
  return out;
}

/// Local part sum_p b^p g0^(4/2^p) of the multiscale kernel.
inline double local_weight(double g0, double b, int poly) {
  double w = 0.0;
  double bp = 1.0;
  for (int p = 1; p <= poly; ++p) {
    bp *= b;
    w += bp * poly_term(g0, p);
  }
  return w;
}

/// Multiscale weight of site j in the local model of site i: alpha plus the
/// polynomial sum when j is i itself or one of its Q nearest neighbors,
/// alpha alone otherwise.
inline double multiscale_weight(std::size_t i, std::size_t j, const FitParams& params,
                                const KernelSpec& spec, const NeighborGraph& graph) {
  if (graph.q() != spec.neighbors) {
    throw ValidationError("neighbor graph Q does not match kernel spec Q");
  }
  if (j == i) return params.alpha + local_weight(1.0, params.b, spec.poly);
  auto nbrs = graph.neighbors(i);
  auto dists = graph.distances(i);
  for (std::size_t r = 0; r < nbrs.size(); ++r) {
    if (nbrs[r] == j) {
      double g0 = base_kernel(dists[r], spec.h0, spec.family);
      return params.alpha + local_weight(g0, params.b, spec.poly);
    }
  }
  return params.alpha;
}

}  // namespace scagwr
