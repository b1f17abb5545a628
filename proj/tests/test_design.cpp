#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "kgcp/design.hpp"

using namespace kgcp;

namespace {

/// Each column occupies every one of the n equal strata exactly once.
bool latin(const Matrix& X, const Box& dom) {
  const auto n = X.rows();
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    std::set<long> bins;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = (X(i, k) - dom.lower()[k]) / dom.width()[k];
      if (!(u > 0.0 && u < 1.0)) return false;
      bins.insert(static_cast<long>(u * static_cast<double>(n)));
    }
    if (static_cast<Eigen::Index>(bins.size()) != n || *bins.begin() != 0 || *bins.rbegin() != n - 1) return false;
  }
  return true;
}

}  // namespace

TEST(MaximinLhs, SinglePointIsTheCenter) {
  const Box dom(Vector{{-5.0, 0.0}}, Vector{{10.0, 15.0}});
  const Matrix X = maximin_lhs(DesignSpec{1, 2, 9}, dom);
  ASSERT_EQ(X.rows(), 1);
  EXPECT_EQ(X.row(0).transpose(), dom.center());
}

TEST(MaximinLhs, LatinPropertyTenByTwo) {
  const Box dom(Vector{{-5.0, 0.0}}, Vector{{10.0, 15.0}});
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_TRUE(latin(maximin_lhs(DesignSpec{10, 2, s}, dom), dom)) << s;
}

TEST(MaximinLhs, LatinPropertyAcrossShapes) {
  for (std::size_t n : {2, 3, 7, 16})
    for (std::size_t d : {1, 3, 6}) {
      const Box dom = Box::uniform(d, -1.0, 4.0);
      const Matrix X = maximin_lhs(DesignSpec{n, d, 5, 100}, dom);
      EXPECT_EQ(static_cast<std::size_t>(X.rows()), n);
      EXPECT_TRUE(latin(X, dom)) << n << "x" << d;
    }
}

TEST(MaximinLhs, DeterministicForSeed) {
  const Box dom = Box::unit(3);
  EXPECT_EQ(maximin_lhs(DesignSpec{10, 3, 42}, dom), maximin_lhs(DesignSpec{10, 3, 42}, dom));
  EXPECT_NE(maximin_lhs(DesignSpec{10, 3, 42}, dom), maximin_lhs(DesignSpec{10, 3, 43}, dom));
}

TEST(MaximinLhs, BeatsMedianRandomHypercube) {
  // baseline: median minimum distance of 1000 independent random hypercubes
  std::mt19937_64 rng(2024);
  std::vector<double> base;
  for (int i = 0; i < 1000; ++i) base.push_back(min_pairwise_distance(random_lhs(10, 2, rng)));
  std::nth_element(base.begin(), base.begin() + 500, base.end());
  const double median = base[500];
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix X = maximin_lhs(DesignSpec{10, 2, s}, Box::unit(2));
    EXPECT_GE(min_pairwise_distance(X), median) << "seed " << s;
  }
}

TEST(MaximinLhs, RejectsEmptyDesign) {
  EXPECT_THROW(maximin_lhs(DesignSpec{0, 2, 1}, Box::unit(2)), InvalidArgument);
  EXPECT_THROW(maximin_lhs(DesignSpec{4, 3, 1}, Box::unit(2)), InvalidArgument);
}
