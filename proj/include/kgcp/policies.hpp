#pragma once

// Closed-form acquisition scores for deterministic observations, maximization
// orientation. Throughout, mu and s are the prediction mean and prediction
// standard deviation at x and z = (yMax - mu) / s.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "kgcp/box.hpp"
#include "kgcp/errors.hpp"
#include "kgcp/kriging.hpp"

namespace kgcp {

/// |z| beyond this uses the limiting linear forms of EI/ED.
inline constexpr double kTailClamp = 38.0;

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

enum class PolicyKind { ExpectedImprovement, ExpectedDecrement, Kgcp, SoftKgcp, Ucb, PosteriorMean };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::ExpectedImprovement: return "EI";
    case PolicyKind::ExpectedDecrement: return "ED";
    case PolicyKind::Kgcp: return "KGCP";
    case PolicyKind::SoftKgcp: return "SoftKGCP";
    case PolicyKind::Ucb: return "UCB";
    case PolicyKind::PosteriorMean: return "Mean";
  }
  return "?";
}

inline PolicyKind policy_from_string(const std::string& s) {
  if (s == "EI") return PolicyKind::ExpectedImprovement;
  if (s == "ED") return PolicyKind::ExpectedDecrement;
  if (s == "KGCP") return PolicyKind::Kgcp;
  if (s == "SoftKGCP") return PolicyKind::SoftKgcp;
  if (s == "UCB") return PolicyKind::Ucb;
  if (s == "Mean") return PolicyKind::PosteriorMean;
  throw ConfigError("unknown policy '" + s + "'");
}

struct PolicySpec {
  PolicyKind kind = PolicyKind::Kgcp;
};

struct PolicyContext {
  double yMax = 0.0;        // max of current observations
  std::size_t iteration = 0;
  double ucbBeta = 0.0;
  double softK = 1000.0;
};

struct PolicyScore {
  double value = 0.0;
  std::optional<Vector> gradient;
};

namespace detail {

inline void check_policy_args(double mu, double s, double yMax) {
  if (!std::isfinite(mu) || !std::isfinite(s) || !std::isfinite(yMax))
    throw InvalidArgument("policy: nonfinite input");
  if (s < 0.0) throw InvalidArgument("policy: negative standard deviation");
}

}  // namespace detail

/// E[max(mu' - yMax, 0)] = (mu - yMax) Phi(-z) + s phi(z).
inline double expected_improvement(double mu, double s, double yMax) {
  detail::check_policy_args(mu, s, yMax);
  if (s == 0.0) return std::max(mu - yMax, 0.0);
  const double z = (yMax - mu) / s;
  if (z > kTailClamp) return 0.0;
  if (z < -kTailClamp) return mu - yMax;
  return std::max(0.0, (mu - yMax) * normal_cdf(-z) + s * normal_pdf(z));
}

/// E[max(mu', yMax)] - mu = (yMax - mu) Phi(z) + s phi(z): EI of the mirrored problem.
inline double expected_decrement(double mu, double s, double yMax) {
  detail::check_policy_args(mu, s, yMax);
  if (s == 0.0) return std::max(yMax - mu, 0.0);
  const double z = (yMax - mu) / s;
  if (z > kTailClamp) return yMax - mu;
  if (z < -kTailClamp) return 0.0;
  return std::max(0.0, (yMax - mu) * normal_cdf(z) + s * normal_pdf(z));
}

/// Knowledge gradient for continuous parameters, deterministic observations.
inline double kgcp(double mu, double s, double yMax) {
  return std::min(expected_improvement(mu, s, yMax), expected_decrement(mu, s, yMax));
}

inline Vector ei_gradient(double mu, double s, const Vector& dmu, const Vector& ds, double yMax) {
  detail::check_policy_args(mu, s, yMax);
  if (s <= 0.0) throw UndefinedGradient("ei_gradient: zero prediction variance");
  const double z = (yMax - mu) / s;
  if (z > kTailClamp) return Vector::Zero(dmu.size());
  if (z < -kTailClamp) return dmu;
  const Vector dz = -(dmu + z * ds) / s;
  return (-z * normal_cdf(-z) + normal_pdf(z)) * ds - s * normal_cdf(-z) * dz;
}

inline Vector ed_gradient(double mu, double s, const Vector& dmu, const Vector& ds, double yMax) {
  detail::check_policy_args(mu, s, yMax);
  if (s <= 0.0) throw UndefinedGradient("ed_gradient: zero prediction variance");
  const double z = (yMax - mu) / s;
  if (z > kTailClamp) return -dmu;
  if (z < -kTailClamp) return Vector::Zero(dmu.size());
  const Vector dz = -(dmu + z * ds) / s;
  return (z * normal_cdf(z) + normal_pdf(z)) * ds + s * normal_cdf(z) * dz;
}

/// Log-sum-exp smoothing of min(EI, ED); always <= the hard minimum.
inline double soft_kgcp_value(double mu, double s, double yMax, double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw InvalidArgument("soft_kgcp: k must be positive and finite");
  const double ei = expected_improvement(mu, s, yMax);
  const double ed = expected_decrement(mu, s, yMax);
  const double lo = std::min(ei, ed);
  return lo - std::log1p(std::exp(-k * std::abs(ei - ed))) / k;
}

inline PolicyScore soft_kgcp(double mu, double s, double yMax, double k, const Vector& dmu, const Vector& ds) {
  PolicyScore out;
  out.value = soft_kgcp_value(mu, s, yMax, k);
  const double ei = expected_improvement(mu, s, yMax);
  const double ed = expected_decrement(mu, s, yMax);
  // weight of dEI is exp(-k EI) / (exp(-k EI) + exp(-k ED))
  const double wEi = 1.0 / (1.0 + std::exp(-k * (ed - ei)));
  out.gradient = wEi * ei_gradient(mu, s, dmu, ds, yMax) + (1.0 - wEi) * ed_gradient(mu, s, dmu, ds, yMax);
  return out;
}

inline double ucb(double mu, double s, double beta) {
  if (beta < 0.0) throw InvalidArgument("ucb: beta must be nonnegative");
  return mu + beta * s;
}

/// GP-UCB schedule sqrt(2 log(n^(d/2+2) pi^2 / (3 delta))).
inline double gp_ucb_beta(std::size_t n, std::size_t d, double delta = 0.1) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("gp_ucb_beta: delta must lie in (0,1)");
  const double nn = static_cast<double>(std::max<std::size_t>(n, 1));
  const double logArg = (static_cast<double>(d) / 2.0 + 2.0) * std::log(nn) +
                        std::log(std::numbers::pi * std::numbers::pi / (3.0 * delta));
  return std::sqrt(2.0 * std::max(logArg, 0.0));
}

/// Score from a predictive (mu, s). Gradient inputs are optional; when s == 0
/// a gradient is not reported for the variance-dependent policies.
inline PolicyScore policy_score(PolicySpec policy, const PolicyContext& ctx, double mu, double s,
                                const Vector* dmu = nullptr, const Vector* ds = nullptr) {
  PolicyScore out;
  const bool wantGrad = dmu != nullptr && ds != nullptr;
  switch (policy.kind) {
    case PolicyKind::ExpectedImprovement:
      out.value = expected_improvement(mu, s, ctx.yMax);
      if (wantGrad && s > 0.0) out.gradient = ei_gradient(mu, s, *dmu, *ds, ctx.yMax);
      break;
    case PolicyKind::ExpectedDecrement:
      out.value = expected_decrement(mu, s, ctx.yMax);
      if (wantGrad && s > 0.0) out.gradient = ed_gradient(mu, s, *dmu, *ds, ctx.yMax);
      break;
    case PolicyKind::Kgcp: {
      const double ei = expected_improvement(mu, s, ctx.yMax);
      const double ed = expected_decrement(mu, s, ctx.yMax);
      out.value = std::min(ei, ed);
      // one-sided: the branch that attains the minimum
      if (wantGrad && s > 0.0)
        out.gradient = ei <= ed ? ei_gradient(mu, s, *dmu, *ds, ctx.yMax) : ed_gradient(mu, s, *dmu, *ds, ctx.yMax);
      break;
    }
    case PolicyKind::SoftKgcp:
      if (wantGrad && s > 0.0) {
        out = soft_kgcp(mu, s, ctx.yMax, ctx.softK, *dmu, *ds);
      } else {
        out.value = soft_kgcp_value(mu, s, ctx.yMax, ctx.softK);
      }
      break;
    case PolicyKind::Ucb:
      out.value = ucb(mu, s, ctx.ucbBeta);
      if (wantGrad && s > 0.0) out.gradient = *dmu + ctx.ucbBeta * *ds;
      break;
    case PolicyKind::PosteriorMean:
      out.value = mu;
      if (wantGrad) out.gradient = *dmu;
      break;
  }
  return out;
}

/// Policy score of a single fitted model at x.
inline PolicyScore policy_score(const KrigingModel& model, PolicySpec policy, const Vector& x,
                                const PolicyContext& ctx, bool withGradient = false) {
  if (!withGradient) {
    const Prediction p = model.predict(x);
    return policy_score(policy, ctx, p.mean, std::sqrt(p.variance));
  }
  auto [p, g] = model.predict_with_gradient(x);
  const double s = std::sqrt(p.variance);
  const Vector ds = s > 0.0 ? Vector(g.variance / (2.0 * s)) : Vector(Vector::Zero(x.size()));
  return policy_score(policy, ctx, p.mean, s, &g.mean, &ds);
}

}  // namespace kgcp
