#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "scagwr/error.hpp"
#include "scagwr/geometry.hpp"

namespace scagwr {

/// Response y, design matrix X (first column all ones) and site locations.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Eigen::VectorXd y, Eigen::MatrixXd x, SiteSet sites)
      : y_(std::move(y)), x_(std::move(x)), sites_(std::move(sites)) {
    const auto n = y_.size();
    if (x_.rows() != n || static_cast<std::size_t>(n) != sites_.size()) {
      throw ValidationError("y, X and site counts disagree");
    }
    if (x_.cols() < 1) throw ValidationError("X needs at least the intercept column");
    if (n <= x_.cols()) {
      throw ValidationError("need more observations than covariates (N=" + std::to_string(n) +
                            ", K=" + std::to_string(x_.cols()) + ")");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(y_(i))) throw ValidationError("non-finite response at row " + std::to_string(i));
      if (x_(i, 0) != 1.0) throw ValidationError("first column of X must be all ones (row " + std::to_string(i) + ")");
      for (Eigen::Index k = 0; k < x_.cols(); ++k) {
        if (!std::isfinite(x_(i, k))) {
          throw ValidationError("non-finite covariate at row " + std::to_string(i));
        }
      }
    }
  }

  /// Builds X by prepending an intercept column to the given covariates.
  static Dataset with_intercept(Eigen::VectorXd y, const Eigen::MatrixXd& covariates, SiteSet sites) {
    Eigen::MatrixXd x(covariates.rows(), covariates.cols() + 1);
    x.col(0).setOnes();
    x.rightCols(covariates.cols()) = covariates;
    return Dataset(std::move(y), std::move(x), std::move(sites));
  }

  std::size_t size() const { return static_cast<std::size_t>(y_.size()); }
  std::size_t covariates() const { return static_cast<std::size_t>(x_.cols()); }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const SiteSet& sites() const { return sites_; }

 private:
  Eigen::VectorXd y_;
  Eigen::MatrixXd x_;
  SiteSet sites_;
};

}  // namespace scagwr
