#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

#include "scagwr/dataset.hpp"
#include "scagwr/error.hpp"
#include "scagwr/geometry.hpp"
#include "scagwr/kernel.hpp"
#include "scagwr/parallel.hpp"

namespace scagwr {

using MatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using VectorMap = Eigen::Map<const Eigen::VectorXd>;

/// Pre-compressed moments of the polynomial multiscale kernel.
///
/// For every site i and polynomial p in 1..P the local moments are
///   local_xx(i, p) = sum_j g_ij^(4/2^p) x_j x_j'
///   local_xy(i, p) = sum_j g_ij^(4/2^p) x_j y_j
/// where j runs over {i} and the Q nearest neighbors of i and g_ij is the base
/// kernel (g_ii = 1). The pair moments local_xx_pair(i, p, q), p <= q, use the
/// kernel factor g_ij^(4/2^p + 4/2^q) and feed the squared-kernel terms of
/// the diagnostics. Global moments are X'X and X'y over all sites.
///
/// Once built, no objective evaluation touches N- or Q-sized data beyond the
/// per-site K x K blocks stored here.
class MomentSet {
 public:
  MomentSet() = default;
  MomentSet(const Dataset& data, const KernelSpec& spec)
      : n_(data.size()),
        k_(data.covariates()),
        poly_(spec.poly),
        pairs_(static_cast<std::size_t>(spec.poly * (spec.poly + 1) / 2)),
        x_(data.x()),
        y_(data.y()),
        xx_(n_ * static_cast<std::size_t>(poly_) * k_ * k_, 0.0),
        xy_(n_ * static_cast<std::size_t>(poly_) * k_, 0.0),
        pair_(n_ * pairs_ * k_ * k_, 0.0),
        pair_index_(static_cast<std::size_t>(poly_ * poly_), 0) {
    std::size_t idx = 0;
    for (int p = 1; p <= poly_; ++p) {
      for (int q = p; q <= poly_; ++q) {
        pair_index_[static_cast<std::size_t>((p - 1) * poly_ + (q - 1))] = idx;
        pair_index_[static_cast<std::size_t>((q - 1) * poly_ + (p - 1))] = idx;
        ++idx;
      }
    }
  }

  std::size_t sites() const { return n_; }
  std::size_t covariates() const { return k_; }
  int poly() const { return poly_; }
  std::size_t pair_count() const { return pairs_; }

  const Eigen::MatrixXd& global_xx() const { return global_xx_; }
  const Eigen::VectorXd& global_xy() const { return global_xy_; }

  MatrixMap local_xx(std::size_t i, int p) const {
    return MatrixMap(xx_.data() + (i * poly_ + static_cast<std::size_t>(p - 1)) * k_ * k_,
                     static_cast<Eigen::Index>(k_), static_cast<Eigen::Index>(k_));
  }
  VectorMap local_xy(std::size_t i, int p) const {
    return VectorMap(xy_.data() + (i * poly_ + static_cast<std::size_t>(p - 1)) * k_,
                     static_cast<Eigen::Index>(k_));
  }
  MatrixMap local_xx_pair(std::size_t i, int p, int q) const {
    std::size_t slot = pair_index_[static_cast<std::size_t>((p - 1) * poly_ + (q - 1))];
    return MatrixMap(pair_.data() + (i * pairs_ + slot) * k_ * k_,
                     static_cast<Eigen::Index>(k_), static_cast<Eigen::Index>(k_));
  }

  /// Row x_i of the design matrix and the response y_i.
  auto row(std::size_t i) const { return x_.row(static_cast<Eigen::Index>(i)); }
  double response(std::size_t i) const { return y_(static_cast<Eigen::Index>(i)); }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }

  /// Stored moment elements (global, local, pair). Grows linearly in N.
  std::size_t element_count() const {
    return global_xx_.size() + global_xy_.size() + xx_.size() + xy_.size() + pair_.size();
  }

 private:
  friend MomentSet build_moments(const Dataset&, const KernelSpec&, const NeighborGraph&,
                                 unsigned);

  double* local_xx_data(std::size_t i, int p) {
    return xx_.data() + (i * poly_ + static_cast<std::size_t>(p - 1)) * k_ * k_;
  }
  double* local_xy_data(std::size_t i, int p) {
    return xy_.data() + (i * poly_ + static_cast<std::size_t>(p - 1)) * k_;
  }
  double* pair_data(std::size_t i, std::size_t slot) {
    return pair_.data() + (i * pairs_ + slot) * k_ * k_;
  }

  std::size_t n_ = 0;
  std::size_t k_ = 0;
  int poly_ = 0;
  std::size_t pairs_ = 0;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd global_xx_;
  Eigen::VectorXd global_xy_;
  std::vector<double> xx_;
  std::vector<double> xy_;
  std::vector<double> pair_;
  std::vector<std::size_t> pair_index_;
};

/// Step (I): one pass over every site's neighborhood. Cost O(N Q K^2 P^2).
inline MomentSet build_moments(const Dataset& data, const KernelSpec& spec,
                               const NeighborGraph& graph, unsigned threads = 1) {
  spec.validate();
  if (graph.sites() != data.size() || graph.q() != spec.neighbors) {
    throw ValidationError("neighbor graph does not match dataset/kernel spec");
  }
  MomentSet ms(data, spec);
  const std::size_t k = ms.k_;
  const int poly = ms.poly_;
  const Eigen::MatrixXd& x = ms.x_;
  const Eigen::VectorXd& y = ms.y_;

  ms.global_xx_ = x.transpose() * x;
  ms.global_xy_ = x.transpose() * y;

  parallel_chunks(ms.n_, threads, [&](std::size_t begin, std::size_t end, unsigned) {
    std::vector<double> terms(static_cast<std::size_t>(poly));
    Eigen::VectorXd xj(static_cast<Eigen::Index>(k));
    Eigen::MatrixXd outer(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = begin; i < end; ++i) {
      auto nbrs = graph.neighbors(i);
      auto dists = graph.distances(i);
      // r = 0 is the site itself (distance 0, base weight 1).
      for (std::size_t r = 0; r <= nbrs.size(); ++r) {
        std::size_t j = r == 0 ? i : nbrs[r - 1];
        double g0 = r == 0 ? 1.0 : base_kernel(dists[r - 1], spec.h0, spec.family);
        for (int p = 1; p <= poly; ++p) terms[static_cast<std::size_t>(p - 1)] = poly_term(g0, p);

        xj = x.row(static_cast<Eigen::Index>(j)).transpose();
        const double yj = y(static_cast<Eigen::Index>(j));
        outer.noalias() = xj * xj.transpose();
        for (int p = 1; p <= poly; ++p) {
          const double t = terms[static_cast<std::size_t>(p - 1)];
          if (t == 0.0) continue;
          Eigen::Map<Eigen::MatrixXd>(ms.local_xx_data(i, p), static_cast<Eigen::Index>(k),
                                      static_cast<Eigen::Index>(k)) += t * outer;
          Eigen::Map<Eigen::VectorXd>(ms.local_xy_data(i, p), static_cast<Eigen::Index>(k)) +=
              (t * yj) * xj;
        }
        std::size_t slot = 0;
        for (int p = 1; p <= poly; ++p) {
          for (int q = p; q <= poly; ++q, ++slot) {
            const double t = terms[static_cast<std::size_t>(p - 1)] * terms[static_cast<std::size_t>(q - 1)];
            if (t == 0.0) continue;
            Eigen::Map<Eigen::MatrixXd>(ms.pair_data(i, slot), static_cast<Eigen::Index>(k),
                                        static_cast<Eigen::Index>(k)) += t * outer;
          }
        }
      }
    }
  });
  return ms;
}

/// Leave-one-out moments for site i: every family minus the site's own
/// contribution x_i x_i' (and x_i y_i). The self base weight is 1 for every
/// polynomial, so one rank-one term serves all of them.
struct LooMoments {
  Eigen::MatrixXd global_xx;
  Eigen::VectorXd global_xy;
  std::vector<Eigen::MatrixXd> local_xx;  // index p-1
  std::vector<Eigen::VectorXd> local_xy;
};

inline LooMoments loo_downdate(const MomentSet& ms, std::size_t i) {
  if (i >= ms.sites()) throw ValidationError("site index out of range");
  Eigen::VectorXd xi = ms.row(i).transpose();
  Eigen::MatrixXd self_xx = xi * xi.transpose();
  Eigen::VectorXd self_xy = ms.response(i) * xi;
  LooMoments out;
  out.global_xx = ms.global_xx() - self_xx;
  out.global_xy = ms.global_xy() - self_xy;
  for (int p = 1; p <= ms.poly(); ++p) {
    out.local_xx.emplace_back(ms.local_xx(i, p) - self_xx);
    out.local_xy.emplace_back(ms.local_xy(i, p) - self_xy);
  }
  return out;
}

}  // namespace scagwr
