#pragma once

// Policy maximization over a box: uniform Monte-Carlo candidates, then bounded
// pattern search from the best few.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "kgcp/box.hpp"
#include "kgcp/errors.hpp"
#include "kgcp/hyperfit.hpp"
#include "kgcp/pattern_search.hpp"
#include "kgcp/policies.hpp"

namespace kgcp {

struct AcquisitionConfig {
  std::size_t mcCandidates = 0;  // 0 => 1000 * d
  std::size_t localRefineCount = 10;
  std::size_t localBudget = 200;
  double initialStepFraction = 0.05;
  double minStepFraction = 1e-6;
  double duplicateTolerance = 1e-9;  // normalized distance to a training point

  std::size_t candidates_for(std::size_t d) const { return mcCandidates ? mcCandidates : 1000 * d; }

  void validate(std::size_t d) const {
    if (localRefineCount < 1) throw ConfigError("acquisition: localRefineCount must be >= 1");
    if (candidates_for(d) < localRefineCount) throw ConfigError("acquisition: mcCandidates must be >= localRefineCount");
  }
};

struct Proposal {
  Vector x;
  double score = 0.0;
};

namespace detail {

inline bool near_any(const Vector& x, std::span<const Vector> points, const Box& domain, double tol) {
  const Vector invW = domain.width().cwiseInverse();
  for (const auto& p : points)
    if ((x - p).cwiseProduct(invW).norm() <= tol) return true;
  return false;
}

}  // namespace detail

/// Maximizes f over the domain. `seeds` are scored ahead of the random
/// candidates. Results closer than cfg.duplicateTolerance (normalized) to any
/// point in `exclude` are never returned. Ties keep the earliest candidate in
/// generation order.
template <class Objective>
Proposal maximize(Objective&& f, const Box& domain, const AcquisitionConfig& cfg, Rng& rng,
                  std::span<const Vector> exclude = {}, std::span<const Vector> seeds = {}) {
  const std::size_t d = domain.dim();
  cfg.validate(d);
  const std::size_t m = cfg.candidates_for(d) + seeds.size();
  auto eval = [&](const Vector& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vector> cand(m);
  std::vector<double> score(m);
  bool anyFinite = false;
  for (std::size_t i = 0; i < m; ++i) {
    if (i < seeds.size()) {
      cand[i] = domain.clip(seeds[i]);
    } else {
      Vector u(static_cast<Eigen::Index>(d));
      for (auto& v : u) v = unif(rng);
      cand[i] = domain.from_unit(u);
    }
    score[i] = eval(cand[i]);
    anyFinite = anyFinite || std::isfinite(score[i]);
  }
  if (!anyFinite) throw AcquisitionFailed("acquisition: every candidate score is nonfinite");

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  const PatternSearchOptions ps{cfg.initialStepFraction, cfg.minStepFraction, cfg.localBudget};
  const std::size_t top = std::min(cfg.localRefineCount, m);
  std::vector<Proposal> pool;
  pool.reserve(top + m);
  for (std::size_t k = 0; k < top; ++k) {
    const std::size_t i = order[k];
    auto r = pattern_search(eval, domain, cand[i], ps, score[i]);
    pool.push_back({domain.clip(r.x), r.value});
  }

  auto pick = [&](const std::vector<Proposal>& ps) -> const Proposal* {
    const Proposal* best = nullptr;
    for (const auto& p : ps) {
      if (!std::isfinite(p.score)) continue;
      if (detail::near_any(p.x, exclude, domain, cfg.duplicateTolerance)) continue;
      if (!best || p.score > best->score) best = &p;
    }
    return best;
  };
  if (const Proposal* best = pick(pool)) return *best;

  // every refined point collides with a training point: fall back to raw candidates
  pool.clear();
  for (std::size_t i : order) pool.push_back({cand[i], score[i]});
  if (const Proposal* best = pick(pool)) return *best;
  throw AcquisitionFailed("acquisition: no admissible candidate away from the training data");
}

/// Next decision under the policy, averaged over the ensemble.
inline Proposal propose(const ModelEnsemble& ensemble, PolicySpec policy, const PolicyContext& ctx, const Box& domain,
                        const AcquisitionConfig& cfg, Rng& rng) {
  if (ensemble.models.empty()) throw InvalidArgument("propose: empty ensemble");
  const Dataset& data = ensemble.data();
  std::vector<Vector> training;
  training.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) training.push_back(data.decision(i));
  auto f = [&](const Vector& x) { return ensemble_policy_score(ensemble, policy, x, ctx).value; };
  return maximize(f, domain, cfg, rng, training);
}

/// Maximizer of the ensemble-averaged prediction mean.
inline Vector model_argmax(const ModelEnsemble& ensemble, const Box& domain, const AcquisitionConfig& cfg, Rng& rng) {
  if (ensemble.models.empty()) throw InvalidArgument("model_argmax: empty ensemble");
  const PolicyContext ctx{};
  auto f = [&](const Vector& x) {
    return ensemble_policy_score(ensemble, PolicySpec{PolicyKind::PosteriorMean}, x, ctx).value;
  };
  // training points are legitimate maximizers of the mean, so they seed the search
  const Dataset& data = ensemble.data();
  std::vector<Vector> training;
  training.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) training.push_back(data.decision(i));
  return maximize(f, domain, cfg, rng, {}, training).x;
}

}  // namespace kgcp
