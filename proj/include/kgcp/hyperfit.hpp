#pragma once

// Hyperparameter selection for the Kriging model: concentrated likelihood,
// multistart MLE, slice sampling of the likelihood, and score-level ensembling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kgcp/box.hpp"
#include "kgcp/errors.hpp"
#include "kgcp/kriging.hpp"
#include "kgcp/pattern_search.hpp"
#include "kgcp/policies.hpp"

namespace kgcp {

using Rng = std::mt19937_64;

struct LikelihoodEvaluation {
  Vector theta;
  double negLogLik = std::numeric_limits<double>::infinity();
  bool valid = false;
};

namespace detail {

inline LikelihoodEvaluation likelihood_normalized(const NormalizedData& nd, const BasisSet& basis, const Vector& theta,
                                                  const JitterPolicy& jitter) {
  LikelihoodEvaluation ev;
  ev.theta = theta;
  auto core = fit_core(nd, basis, theta, jitter);
  if (!core) return ev;
  // constant responses give sigma2 == 0; keep the value finite
  const double s2 = std::max(core->sigma2, std::numeric_limits<double>::min());
  const double v = 0.5 * (static_cast<double>(nd.U.rows()) * std::log(s2) + core->logDetPsi);
  if (!std::isfinite(v)) return ev;
  ev.negLogLik = v;
  ev.valid = true;
  return ev;
}

inline bool lexicographically_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline bool better(const LikelihoodEvaluation& a, const LikelihoodEvaluation& b) {
  if (a.valid != b.valid) return a.valid;
  if (!a.valid) return false;
  if (a.negLogLik != b.negLogLik) return a.negLogLik < b.negLogLik;
  return lexicographically_less(a.theta, b.theta);
}

}  // namespace detail

/// 0.5 (n ln sigma2 + ln |Psi|) on standardized data; minimized by MLE.
/// A correlation matrix that cannot be factored yields valid == false.
inline LikelihoodEvaluation neg_concentrated_log_likelihood(const Dataset& data, const BasisSet& basis,
                                                            const Hyperparameters& theta,
                                                            const JitterPolicy& jitter = {}) {
  if (theta.dim() != data.dim()) throw InvalidArgument("likelihood: theta dimension does not match data dimension");
  if (data.size() < basis.size()) throw InsufficientData("likelihood: fewer observations than basis functions");
  return detail::likelihood_normalized(detail::normalize(data), basis, theta.values(), jitter);
}

struct MleOptions {
  Box log10Bounds;                // empty => [-3, 3]^d
  std::size_t starts = 20;
  std::size_t evaluationsPerStart = 500;
  double initialStepFraction = 1.0 / 12.0;  // half a decade on the default box
  double minStepFraction = 1e-4;
  JitterPolicy jitter{};
};

struct MleResult {
  LikelihoodEvaluation best;
  std::size_t evaluations = 0;
};

inline Box default_log10_bounds(std::size_t d) { return Box::uniform(d, -3.0, 3.0); }

/// Multistart bounded pattern search over log10(theta). Lowest negLogLik wins,
/// exact ties go to the lexicographically smallest theta.
inline MleResult mle_search(const Dataset& data, const BasisSet& basis, Rng& rng, const MleOptions& opt = {}) {
  const Box bounds = opt.log10Bounds.dim() == 0 ? default_log10_bounds(data.dim()) : opt.log10Bounds;
  if (bounds.dim() != data.dim()) throw InvalidArgument("mle: bounds dimension does not match data dimension");
  if (opt.starts == 0) throw InvalidArgument("mle: at least one start required");
  const auto nd = detail::normalize(data);

  MleResult result;
  auto objective = [&](const Vector& logTheta) {
    LikelihoodEvaluation ev =
        detail::likelihood_normalized(nd, basis, logTheta.unaryExpr([](double v) { return std::pow(10.0, v); }), opt.jitter);
    ++result.evaluations;
    if (detail::better(ev, result.best)) result.best = ev;
    return ev.valid ? -ev.negLogLik : -std::numeric_limits<double>::infinity();
  };

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PatternSearchOptions ps{opt.initialStepFraction, opt.minStepFraction, opt.evaluationsPerStart};
  for (std::size_t s = 0; s < opt.starts; ++s) {
    Vector u(static_cast<Eigen::Index>(data.dim()));
    for (auto& v : u) v = unif(rng);
    pattern_search(objective, bounds, bounds.from_unit(u), ps);
  }
  if (!result.best.valid)
    throw IllConditioned("mle: no start produced a factorable correlation matrix");
  return result;
}

inline KrigingModel mle_fit(const Dataset& data, const BasisSet& basis, Rng& rng, const MleOptions& opt = {}) {
  const MleResult r = mle_search(data, basis, rng, opt);
  return fit(data, basis, Hyperparameters(r.best.theta), opt.jitter);
}

enum class EnsembleOrigin { Mle, SliceSampling };

/// Models sharing one dataset; policies are averaged over members.
struct ModelEnsemble {
  std::vector<KrigingModel> models;
  EnsembleOrigin origin = EnsembleOrigin::Mle;

  static ModelEnsemble single(KrigingModel m) {
    ModelEnsemble e;
    e.models.push_back(std::move(m));
    return e;
  }
  std::size_t size() const { return models.size(); }
  const Dataset& data() const { return models.front().data(); }
};

struct SliceOptions {
  Box log10Bounds;                 // empty => [-3, 3]^d
  double width = 1.0;              // initial interval width, decades
  std::size_t maxDoublings = 10;
  std::size_t maxShrinkSteps = 200;
  JitterPolicy jitter{};
};

namespace detail {

/// Neal's univariate slice sampler with the doubling procedure and its
/// acceptance test. logDensity returns -inf outside the support.
template <class LogDensity>
double slice_step(LogDensity&& g, double x0, double g0, double w, std::size_t maxDoublings, std::size_t maxShrink,
                  Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  const double level = g0 - expo(rng);

  double L = x0 - w * unif(rng);
  double R = L + w;
  double gL = g(L);
  double gR = g(R);
  for (std::size_t k = 0; k < maxDoublings && (level < gL || level < gR); ++k) {
    if (unif(rng) < 0.5) {
      L -= R - L;
      gL = g(L);
    } else {
      R += R - L;
      gR = g(R);
    }
  }

  auto acceptable = [&](double x1) {
    double Lh = L, Rh = R;
    bool differ = false;
    double gLh = gL, gRh = gR;
    while (Rh - Lh > 1.1 * w) {
      const double M = 0.5 * (Lh + Rh);
      if ((x0 < M && x1 >= M) || (x0 >= M && x1 < M)) differ = true;
      if (x1 < M) {
        Rh = M;
        gRh = g(Rh);
      } else {
        Lh = M;
        gLh = g(Lh);
      }
      if (differ && level >= gLh && level >= gRh) return false;
    }
    return true;
  };

  double lo = L, hi = R;
  for (std::size_t it = 0; it < maxShrink; ++it) {
    const double x1 = lo + unif(rng) * (hi - lo);
    if (level < g(x1) && acceptable(x1)) return x1;
    if (x1 < x0) lo = x1;
    else hi = x1;
  }
  throw SamplingStalled("slice sampler: no acceptable point after " + std::to_string(maxShrink) + " shrink steps");
}

}  // namespace detail

/// Draws h theta vectors by coordinate-wise slice sampling of exp(-negLogLik)
/// in log10(theta), starting from thetaStart; one full sweep per retained draw.
inline ModelEnsemble slice_sample(const Dataset& data, const BasisSet& basis, const Hyperparameters& thetaStart,
                                  std::size_t h, Rng& rng, const SliceOptions& opt = {}) {
  if (h < 1) throw InvalidArgument("slice_sample: h must be >= 1");
  if (thetaStart.dim() != data.dim()) throw InvalidArgument("slice_sample: theta dimension mismatch");
  const Box bounds = opt.log10Bounds.dim() == 0 ? default_log10_bounds(data.dim()) : opt.log10Bounds;
  const auto nd = detail::normalize(data);

  auto logDensity = [&](const Vector& z) {
    if (!bounds.contains(z)) return -std::numeric_limits<double>::infinity();
    auto ev = detail::likelihood_normalized(nd, basis, z.unaryExpr([](double v) { return std::pow(10.0, v); }),
                                            opt.jitter);
    return ev.valid ? -ev.negLogLik : -std::numeric_limits<double>::infinity();
  };

  Vector z = bounds.clip(thetaStart.log10());
  double gz = logDensity(z);
  if (!std::isfinite(gz)) throw InvalidArgument("slice_sample: starting theta has zero likelihood");

  ModelEnsemble ens;
  ens.origin = EnsembleOrigin::SliceSampling;
  ens.models.reserve(h);
  for (std::size_t draw = 0; draw < h; ++draw) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      auto g1 = [&](double v) {
        Vector zz = z;
        zz[i] = v;
        return logDensity(zz);
      };
      z[i] = detail::slice_step(g1, z[i], gz, opt.width, opt.maxDoublings, opt.maxShrinkSteps, rng);
      gz = logDensity(z);
    }
    ens.models.push_back(fit(data, basis, Hyperparameters::from_log10(z), opt.jitter));
  }
  return ens;
}

/// Arithmetic mean of scores; gradients are averaged only when every member has one.
inline PolicyScore mean_score(std::span<const PolicyScore> scores) {
  if (scores.empty()) throw InvalidArgument("mean_score: no scores");
  PolicyScore out;
  double sum = 0.0;
  bool allGrad = true;
  for (const auto& s : scores) {
    sum += s.value;
    allGrad = allGrad && s.gradient.has_value();
  }
  out.value = sum / static_cast<double>(scores.size());
  if (allGrad) {
    Vector g = Vector::Zero(scores.front().gradient->size());
    for (const auto& s : scores) g += *s.gradient;
    out.gradient = g / static_cast<double>(scores.size());
  }
  return out;
}

/// Averages the policy over ensemble members (never over their predictions).
inline PolicyScore ensemble_policy_score(const ModelEnsemble& ensemble, PolicySpec policy, const Vector& x,
                                         const PolicyContext& ctx, bool withGradient = false) {
  if (ensemble.models.empty()) throw InvalidArgument("ensemble_policy_score: empty ensemble");
  if (ensemble.size() == 1) return policy_score(ensemble.models.front(), policy, x, ctx, withGradient);
  std::vector<PolicyScore> scores;
  scores.reserve(ensemble.size());
  for (const auto& m : ensemble.models) scores.push_back(policy_score(m, policy, x, ctx, withGradient));
  return mean_score(scores);
}

}  // namespace kgcp
