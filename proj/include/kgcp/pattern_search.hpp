#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "kgcp/box.hpp"

namespace kgcp {

struct PatternSearchOptions {
  double initialStepFraction = 0.05;  // of each domain width
  double minStepFraction = 1e-6;
  std::size_t budget = 200;           // objective evaluations, including the start
};

struct PatternSearchResult {
  Vector x;
  double value = -std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
};

/// Bounded compass search maximizing f. Polls +/- step along each coordinate,
/// moves on the first strict improvement, halves the step after a full failed
/// sweep. Nonfinite values count as -inf. The returned value never falls below
/// f(start).
template <class Objective>
PatternSearchResult pattern_search(Objective&& f, const Box& domain, const Vector& start,
                                   const PatternSearchOptions& opt = {}, double startValue = std::numeric_limits<double>::quiet_NaN()) {
  auto eval = [&](const Vector& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };
  PatternSearchResult res;
  res.x = domain.clip(start);
  if (std::isnan(startValue)) {
    res.value = eval(res.x);
    res.evaluations = 1;
  } else {
    res.value = std::isfinite(startValue) ? startValue : -std::numeric_limits<double>::infinity();
  }
  const Vector width = domain.width();
  double frac = opt.initialStepFraction;
  const auto d = res.x.size();

  while (res.evaluations < opt.budget && frac >= opt.minStepFraction) {
    bool improved = false;
    for (Eigen::Index i = 0; i < d && res.evaluations < opt.budget; ++i) {
      for (int sign : {+1, -1}) {
        if (res.evaluations >= opt.budget) break;
        Vector y = res.x;
        y[i] = std::clamp(res.x[i] + sign * frac * width[i], domain.lower()[i], domain.upper()[i]);
        if (y[i] == res.x[i]) continue;
        const double fy = eval(y);
        ++res.evaluations;
        if (fy > res.value) {
          res.x = std::move(y);
          res.value = fy;
          improved = true;
          break;
        }
      }
    }
    if (!improved) frac *= 0.5;
  }
  return res;
}

}  // namespace kgcp
