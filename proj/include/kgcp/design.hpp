#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "kgcp/box.hpp"
#include "kgcp/errors.hpp"

namespace kgcp {

struct DesignSpec {
  std::size_t n = 10;
  std::size_t d = 2;
  std::uint64_t seed = 0;
  std::size_t candidates = 1000;  // random Latin hypercubes compared under maximin
};

/// Latin hypercube on [0,1]^d with every point at its stratum center.
template <class Urbg>
Matrix random_lhs(std::size_t n, std::size_t d, Urbg& rng) {
  Matrix U(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i)
      U(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (static_cast<double>(perm[i]) + 0.5) / static_cast<double>(n);
  }
  return U;
}

/// Smallest Euclidean distance between two rows (+inf for a single row).
inline double min_pairwise_distance(const Matrix& P) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = i + 1; j < P.rows(); ++j) best = std::min(best, (P.row(i) - P.row(j)).norm());
  return best;
}

/// Best of spec.candidates random Latin hypercubes by minimum pairwise distance
/// (measured in the unit cube), mapped onto the domain. The first hypercube
/// wins ties.
inline Matrix maximin_lhs(const DesignSpec& spec, const Box& domain) {
  if (spec.n < 1 || spec.d < 1) throw InvalidArgument("maximin_lhs: n and d must be >= 1");
  if (domain.dim() != spec.d) throw InvalidArgument("maximin_lhs: domain dimension mismatch");
  std::mt19937_64 rng(spec.seed);
  Matrix best;
  double bestDist = -1.0;
  const std::size_t k = std::max<std::size_t>(spec.candidates, 1);
  for (std::size_t c = 0; c < k; ++c) {
    Matrix U = random_lhs(spec.n, spec.d, rng);
    const double dist = spec.n > 1 ? min_pairwise_distance(U) : 0.0;
    if (dist > bestDist) {
      bestDist = dist;
      best = std::move(U);
    }
    if (spec.n == 1) break;
  }
  Matrix X(best.rows(), best.cols());
  for (Eigen::Index i = 0; i < best.rows(); ++i) X.row(i) = domain.from_unit(best.row(i).transpose()).transpose();
  return X;
}

}  // namespace kgcp
