#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "scagwr/baseline.hpp"
#include "scagwr/calibration.hpp"
#include "scagwr/simulation.hpp"

namespace scagwr {

struct BenchmarkConfig {
  std::vector<std::size_t> n_list{2500, 5000, 10000, 20000, 40000};
  std::vector<Method> methods{Method::scagwr_loocv};
  int runs = 3;
  std::uint64_t seed = 1;
  /// Data come from the default process; the field sampler is forced onto its
  /// approximate path when N exceeds this (0: always), keeping setup cheap.
  std::size_t exact_field_limit = 0;
  FitConfig scagwr;
  GwrOptions gwr;
};

struct BenchmarkTiming {
  Method method = Method::scagwr_loocv;
  std::size_t n = 0;
  std::vector<double> seconds;
  double median = 0.0;
  /// median / median at the previous N of the same method; NaN for the first.
  double ratio_to_previous = std::numeric_limits<double>::quiet_NaN();
};

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Wall time of calibration plus estimation per (method, N), over `runs`
/// repetitions on one simulated dataset per N. Repetitions are interleaved
/// across N so that slow drift in machine speed is shared by every N.
inline std::vector<BenchmarkTiming> run_benchmark(const BenchmarkConfig& cfg) {
  if (cfg.runs < 1) throw ValidationError("benchmark needs at least one run");
  for (Method m : cfg.methods)
    for (std::size_t n : cfg.n_list)
      if (is_gwr(m)) check_gwr_cap(n, cfg.gwr);

  std::vector<Dataset> data;
  for (std::size_t n : cfg.n_list) {
    DgpSpec dgp;
    dgp.n = n;
    dgp.seed = replicate_seed(cfg.seed, n, 0, 0);
    dgp.exact_limit = cfg.exact_field_limit;
    data.push_back(generate_dataset(dgp).data);
  }

  std::vector<BenchmarkTiming> out;
  for (Method m : cfg.methods) {
    const std::size_t first = out.size();
    for (std::size_t n : cfg.n_list) {
      BenchmarkTiming t;
      t.method = m;
      t.n = n;
      out.push_back(std::move(t));
    }
    for (int r = 0; r < cfg.runs; ++r)
      for (std::size_t s = 0; s < data.size(); ++s)
        out[first + s].seconds.push_back(run_method(m, data[s], cfg.scagwr, cfg.gwr).seconds);
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t s = first; s < out.size(); ++s) {
      out[s].median = median_of(out[s].seconds);
      out[s].ratio_to_previous = out[s].median / previous;
      previous = out[s].median;
    }
  }
  return out;
}

}  // namespace scagwr
