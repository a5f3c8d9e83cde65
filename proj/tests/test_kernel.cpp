#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"
#include "scagwr/kernel.hpp"

using namespace scagwr;

TEST(BaseKernel, UnitAtZeroDistance) {
  for (double h : {0.1, 1.0, 7.5}) {
    EXPECT_EQ(base_kernel(0.0, h, KernelFamily::gaussian), 1.0);
    EXPECT_EQ(base_kernel(0.0, h, KernelFamily::exponential), 1.0);
  }
}

TEST(BaseKernel, GaussianValues) {
  EXPECT_NEAR(base_kernel(2.0, 2.0, KernelFamily::gaussian), 0.367879, 1e-6);
  EXPECT_NEAR(base_kernel(std::sqrt(3.0) * 0.4, 0.4, KernelFamily::gaussian), 0.049787, 1e-6);
  EXPECT_NEAR(base_kernel(3.0, 1.0, KernelFamily::exponential), std::exp(-3.0), 1e-16);
}

TEST(BaseKernel, RejectsBadDistance) {
  EXPECT_THROW(base_kernel(-1.0, 1.0, KernelFamily::gaussian), ValidationError);
  EXPECT_THROW(base_kernel(std::nan(""), 1.0, KernelFamily::gaussian), ValidationError);
  EXPECT_THROW(base_kernel(1.0, 0.0, KernelFamily::gaussian), ValidationError);
}

TEST(KernelFamilyParse, HardThresholdFamiliesRejected) {
  EXPECT_EQ(parse_kernel_family("exponential"), KernelFamily::exponential);
  EXPECT_THROW(parse_kernel_family("bisquare"), ValidationError);
  EXPECT_THROW(parse_kernel_family("tricube"), ValidationError);
}

TEST(PolyTerms, UnitBase) {
  EXPECT_EQ(poly_terms(1.0, 4), (std::vector<double>{1, 1, 1, 1}));
}

TEST(PolyTerms, QuarterBase) {
  auto t = poly_terms(0.25, 3);
  EXPECT_NEAR(t[0], 0.0625, 1e-16);
  EXPECT_NEAR(t[1], 0.25, 1e-16);
  EXPECT_NEAR(t[2], 0.5, 1e-16);
}

TEST(PolyTerms, SixTermsMatchDirectPowers) {
  auto t = poly_terms(0.9, 6);
  const double expect[] = {0.81, 0.9, 0.948683, 0.974004, 0.986916, 0.993437};
  for (int p = 0; p < 6; ++p) {
    EXPECT_NEAR(t[static_cast<std::size_t>(p)], std::pow(0.9, 4.0 / std::pow(2.0, p + 1)), 1e-15);
    EXPECT_NEAR(t[static_cast<std::size_t>(p)], expect[p], 1e-6);
  }
}

TEST(PolyTerms, RangeChecked) {
  EXPECT_THROW(poly_terms(1.5, 2), ValidationError);
  EXPECT_EQ(poly_terms(0.0, 2), (std::vector<double>{0, 0}));
}

TEST(MultiscaleWeight, TruncationAndCollapse) {
  oracle::Problem p = oracle::random_problem(40, 2, 5, 6, 3);
  oracle::Built b = oracle::build(p);
  const std::size_t i = 4;
  std::size_t far = 0;
  for (std::size_t j = 0; j < 40; ++j) {
    if (j != i && std::find(p.knn[i].begin(), p.knn[i].end(), j) == p.knn[i].end()) {
      far = j;
      break;
    }
  }
  EXPECT_EQ(multiscale_weight(i, far, {2.0, 0.3}, b.spec, b.graph), 0.3);
  for (std::size_t j = 0; j < 40; ++j) EXPECT_EQ(multiscale_weight(i, j, {0.0, 0.7}, b.spec, b.graph), 0.7);
}

TEST(MultiscaleWeight, TermByTermAgainstDirectSum) {
  oracle::Problem p = oracle::random_problem(60, 2, 5, 12, 8);
  oracle::Built b = oracle::build(p);
  const FitParams params{10.0, 0.05};
  for (std::size_t i : {0u, 17u, 59u}) {
    Eigen::VectorXd w = oracle::weights(p, i, params);
    for (std::size_t j = 0; j < 60; ++j) {
      EXPECT_NEAR(multiscale_weight(i, j, params, b.spec, b.graph), w(static_cast<Eigen::Index>(j)),
                  1e-10 * w(static_cast<Eigen::Index>(j)));
    }
  }
}

TEST(FitParamsTest, Validation) {
  EXPECT_THROW((FitParams{-1.0, 1.0}.validate()), ValidationError);
  EXPECT_THROW((FitParams{0.0, 0.0}.validate()), ValidationError);
  EXPECT_NO_THROW((FitParams{0.0, 1.0}.validate()));
}
