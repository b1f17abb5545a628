#pragma once

// Kriging (Gaussian-process interpolation with a GLS trend) under a Matérn 5/2
// correlation. Inputs are mapped to [0,1]^d through the dataset's domain and
// outputs are standardized before fitting; the length-scale parameters theta
// therefore live in normalized input space. predict() reports the mean and the
// prediction *variance* in original output units; policies take its square root.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "kgcp/box.hpp"
#include "kgcp/errors.hpp"

namespace kgcp {

/// Decisions X (n x d, one row per decision) with deterministic observations y.
class Dataset {
public:
  Dataset(Matrix X, Vector y, Box domain) : X_(std::move(X)), y_(std::move(y)), domain_(std::move(domain)) {
    const auto n = X_.rows();
    if (n < 1 || X_.cols() < 1) throw InvalidArgument("dataset needs at least one decision and one dimension");
    if (y_.size() != n) throw InvalidArgument("dataset: X has " + std::to_string(n) + " rows but y has " +
                                              std::to_string(y_.size()) + " entries");
    if (static_cast<std::size_t>(X_.cols()) != domain_.dim())
      throw InvalidArgument("dataset: decision dimension does not match domain dimension");
    if (!X_.allFinite() || !y_.allFinite()) throw InvalidArgument("dataset contains nonfinite values");
    for (Eigen::Index i = 0; i < n; ++i)
      if (!domain_.contains(X_.row(i).transpose()))
        throw InvalidArgument("dataset: decision " + std::to_string(i) + " lies outside the domain");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        if (X_.row(i) == X_.row(j))
          throw InvalidArgument("dataset: decisions " + std::to_string(i) + " and " + std::to_string(j) +
                                " are identical");
  }

  std::size_t size() const { return static_cast<std::size_t>(X_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X_.cols()); }
  const Matrix& X() const { return X_; }
  const Vector& y() const { return y_; }
  const Box& domain() const { return domain_; }
  Vector decision(std::size_t i) const { return X_.row(static_cast<Eigen::Index>(i)).transpose(); }

  /// Copy with one more observation appended.
  Dataset with(const Vector& x, double value) const {
    Matrix X(X_.rows() + 1, X_.cols());
    X << X_, x.transpose();
    Vector y(y_.size() + 1);
    y << y_, value;
    return Dataset(std::move(X), std::move(y), domain_);
  }

private:
  Matrix X_;
  Vector y_;
  Box domain_;
};

/// Regression basis functions, evaluated on normalized inputs.
class BasisSet {
public:
  struct Function {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
  };

  /// Ordinary Kriging: a single constant function.
  static BasisSet constant() {
    BasisSet b;
    b.functions_.push_back({[](const Vector&) { return 1.0; },
                            [](const Vector& u) { return Vector::Zero(u.size()).eval(); }});
    return b;
  }

  /// Constant plus one linear term per input dimension.
  static BasisSet linear(std::size_t d) {
    BasisSet b = constant();
    for (std::size_t k = 0; k < d; ++k) {
      const auto idx = static_cast<Eigen::Index>(k);
      b.functions_.push_back({[idx](const Vector& u) { return u[idx]; },
                              [idx](const Vector& u) {
                                Vector g = Vector::Zero(u.size());
                                g[idx] = 1.0;
                                return g;
                              }});
    }
    return b;
  }

  static BasisSet custom(std::vector<Function> functions) {
    if (functions.empty()) throw InvalidArgument("basis set must contain at least one function");
    BasisSet b;
    b.functions_ = std::move(functions);
    return b;
  }

  std::size_t size() const { return functions_.size(); }
  const Function& operator[](std::size_t i) const { return functions_[i]; }

  Vector values(const Vector& u) const {
    Vector m(static_cast<Eigen::Index>(size()));
    for (std::size_t j = 0; j < size(); ++j) m[static_cast<Eigen::Index>(j)] = functions_[j].value(u);
    return m;
  }

  /// p x d Jacobian.
  Matrix jacobian(const Vector& u) const {
    Matrix J(static_cast<Eigen::Index>(size()), u.size());
    for (std::size_t j = 0; j < size(); ++j) J.row(static_cast<Eigen::Index>(j)) = functions_[j].gradient(u).transpose();
    return J;
  }

private:
  std::vector<Function> functions_;
};

/// Anisotropic length-scale parameters, strictly positive and finite.
class Hyperparameters {
public:
  explicit Hyperparameters(Vector theta) : theta_(std::move(theta)) {
    if (theta_.size() == 0) throw InvalidArgument("theta must be nonempty");
    for (Eigen::Index i = 0; i < theta_.size(); ++i)
      if (!std::isfinite(theta_[i]) || theta_[i] <= 0.0)
        throw InvalidArgument("theta components must be positive and finite, got " + format_vector(theta_));
  }

  static Hyperparameters from_log10(const Vector& log10Theta) {
    return Hyperparameters(log10Theta.unaryExpr([](double v) { return std::pow(10.0, v); }));
  }

  const Vector& values() const { return theta_; }
  Vector log10() const { return theta_.array().log10().matrix(); }
  std::size_t dim() const { return static_cast<std::size_t>(theta_.size()); }

private:
  Vector theta_;
};

/// Diagonal jitter schedule for factoring the correlation matrix.
struct JitterPolicy {
  double initial = 1e-10;
  double growth = 10.0;
  double max = 1e-4;
};

namespace detail {

inline constexpr double kSqrt5 = 2.23606797749978969640917366873128;

inline double matern52_of_distance(double l) {
  const double a = kSqrt5 * l;
  return (1.0 + a + a * a / 3.0) * std::exp(-a);
}

template <class A, class B>
double scaled_distance(const A& xi, const B& xj, const Vector& theta) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double diff = xi[k] - xj[k];
    acc += theta[k] * diff * diff;
  }
  return std::sqrt(acc);
}

/// d psi / d xi, written without dividing by l so it is smooth at l = 0.
template <class A, class B>
Vector matern52_gradient_unchecked(const A& xi, const B& xj, const Vector& theta) {
  const double l = scaled_distance(xi, xj, theta);
  const double coef = -(5.0 / 3.0) * (1.0 + kSqrt5 * l) * std::exp(-kSqrt5 * l);
  Vector g(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) g[k] = coef * theta[k] * (xi[k] - xj[k]);
  return g;
}

inline void check_kernel_args(const Vector& xi, const Vector& xj, const Hyperparameters& theta) {
  if (xi.size() != xj.size() || static_cast<std::size_t>(xi.size()) != theta.dim())
    throw InvalidArgument("matern52: dimension mismatch");
  if (!xi.allFinite() || !xj.allFinite()) throw InvalidArgument("matern52: nonfinite input");
}

inline Matrix correlation_matrix(const Matrix& U, const Vector& theta) {
  const auto n = U.rows();
  Matrix psi(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    psi(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = matern52_of_distance(scaled_distance(U.row(i), U.row(j), theta));
      psi(i, j) = v;
      psi(j, i) = v;
    }
  }
  return psi;
}

struct Factorization {
  Matrix L;
  double jitter = 0.0;
};

inline std::optional<Factorization> factor_with_jitter(const Matrix& psi, const JitterPolicy& policy) {
  Eigen::LLT<Matrix> llt;
  double jitter = policy.initial;
  for (;;) {
    Matrix m = psi;
    m.diagonal().array() += jitter;
    llt.compute(m);
    if (llt.info() == Eigen::Success) {
      Matrix L = llt.matrixL();
      if (L.allFinite() && (L.diagonal().array() > 0.0).all()) return Factorization{std::move(L), jitter};
    }
    if (jitter <= 0.0 || policy.growth <= 1.0) return std::nullopt;
    jitter *= policy.growth;
    if (jitter > policy.max * (1.0 + 1e-9)) return std::nullopt;
  }
}

/// Inputs mapped to the unit cube and outputs standardized.
struct NormalizedData {
  Matrix U;
  Vector y;
  double yMean = 0.0;
  double yScale = 1.0;
};

inline NormalizedData normalize(const Dataset& data) {
  NormalizedData out;
  const auto n = static_cast<Eigen::Index>(data.size());
  out.U.resize(n, static_cast<Eigen::Index>(data.dim()));
  for (Eigen::Index i = 0; i < n; ++i) out.U.row(i) = data.domain().to_unit(data.X().row(i).transpose()).transpose();
  out.yMean = data.y().mean();
  double ss = 0.0;
  if (n > 1) ss = (data.y().array() - out.yMean).square().sum() / static_cast<double>(n - 1);
  out.yScale = ss > 0.0 ? std::sqrt(ss) : 1.0;
  out.y = (data.y().array() - out.yMean) / out.yScale;
  return out;
}

/// GLS solution on normalized data for one theta.
struct FitCore {
  Matrix L;            // chol(Psi + jitter I)
  double jitter = 0.0;
  Matrix Ft;           // L^{-1} F
  Matrix A;            // F' Psi^{-1} F
  Eigen::LLT<Matrix> Allt;
  Vector alpha;
  Vector gamma;        // Psi^{-1} (y - F alpha)
  double sigma2 = 0.0;
  double logDetPsi = 0.0;
};

enum class FitFailure { Correlation, Trend };

inline std::optional<FitCore> fit_core(const NormalizedData& nd, const BasisSet& basis, const Vector& theta,
                                       const JitterPolicy& policy, FitFailure* failure = nullptr) {
  const auto n = nd.U.rows();
  const auto p = static_cast<Eigen::Index>(basis.size());
  auto fac = factor_with_jitter(correlation_matrix(nd.U, theta), policy);
  if (!fac) {
    if (failure) *failure = FitFailure::Correlation;
    return std::nullopt;
  }
  FitCore core;
  core.L = std::move(fac->L);
  core.jitter = fac->jitter;
  const auto L = core.L.triangularView<Eigen::Lower>();

  Matrix F(n, p);
  for (Eigen::Index i = 0; i < n; ++i) F.row(i) = basis.values(nd.U.row(i).transpose()).transpose();
  core.Ft = L.solve(F);
  const Vector yt = L.solve(nd.y);
  core.A = core.Ft.transpose() * core.Ft;
  core.Allt.compute(core.A);
  if (core.Allt.info() != Eigen::Success) {
    if (failure) *failure = FitFailure::Trend;
    return std::nullopt;
  }
  core.alpha = core.Allt.solve(core.Ft.transpose() * yt);
  const Vector et = yt - core.Ft * core.alpha;
  core.sigma2 = std::max(0.0, et.squaredNorm() / static_cast<double>(n));
  core.gamma = core.L.transpose().triangularView<Eigen::Upper>().solve(et);
  core.logDetPsi = 2.0 * core.L.diagonal().array().log().sum();
  return core;
}

}  // namespace detail

/// Matérn 5/2 correlation (1 + sqrt5 l + 5 l^2 / 3) exp(-sqrt5 l),
/// l = sqrt((xi - xj)' diag(theta) (xi - xj)).
inline double matern52(const Vector& xi, const Vector& xj, const Hyperparameters& theta) {
  detail::check_kernel_args(xi, xj, theta);
  return detail::matern52_of_distance(detail::scaled_distance(xi, xj, theta.values()));
}

/// Gradient of matern52 with respect to xi; zero at xi == xj.
inline Vector matern52_gradient(const Vector& xi, const Vector& xj, const Hyperparameters& theta) {
  detail::check_kernel_args(xi, xj, theta);
  return detail::matern52_gradient_unchecked(xi, xj, theta.values());
}

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;     // clamped to >= 0
  double rawVariance = 0.0;  // before clamping
};

struct PredictionGradient {
  Vector mean;
  Vector variance;
};

class KrigingModel {
public:
  const Dataset& data() const { return data_; }
  const BasisSet& basis() const { return basis_; }
  const Hyperparameters& theta() const { return theta_; }
  double jitter() const { return core_.jitter; }
  /// Lower Cholesky factor of the (jittered) correlation matrix.
  const Matrix& chol_psi() const { return core_.L; }
  /// GLS coefficients on standardized outputs: mean = output_mean() + output_scale() * m(u) alpha.
  const Vector& alpha() const { return core_.alpha; }
  double output_mean() const { return norm_.yMean; }
  double output_scale() const { return norm_.yScale; }
  /// Process variance in standardized output units.
  double sigma2_normalized() const { return core_.sigma2; }
  /// Process variance in original output units.
  double process_variance() const { return core_.sigma2 * norm_.yScale * norm_.yScale; }
  double log_det_psi() const { return core_.logDetPsi; }

  Prediction predict(const Vector& x) const {
    Work w = evaluate(x);
    return w.prediction;
  }

  std::pair<Prediction, PredictionGradient> predict_with_gradient(const Vector& x) const {
    Work w = evaluate(x);
    const auto n = norm_.U.rows();
    const auto d = norm_.U.cols();

    Matrix Jr(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      Jr.row(i) = detail::matern52_gradient_unchecked(w.u, norm_.U.row(i), theta_.values()).transpose();
    const Matrix Jm = basis_.jacobian(w.u);

    Vector dmean = Jm.transpose() * core_.alpha + Jr.transpose() * core_.gamma;

    // d var = 2 sigma2 ( -Jr' Psi^-1 r + (Jm - F' Psi^-1 Jr)' A^-1 w )
    const auto Lt = core_.L.transpose().triangularView<Eigen::Upper>();
    const Vector psiInvR = Lt.solve(w.rt);
    const Vector q = core_.Allt.solve(w.trendResidual);
    const Vector psiInvFq = Lt.solve(core_.Ft * q);
    Vector dvar = 2.0 * core_.sigma2 * (Jm.transpose() * q - Jr.transpose() * (psiInvR + psiInvFq));

    const Vector invWidth = data_.domain().width().cwiseInverse();
    PredictionGradient g;
    g.mean = norm_.yScale * dmean.cwiseProduct(invWidth);
    g.variance = norm_.yScale * norm_.yScale * dvar.cwiseProduct(invWidth);
    return {w.prediction, std::move(g)};
  }

private:
  friend KrigingModel fit(const Dataset&, const BasisSet&, const Hyperparameters&, const JitterPolicy&);

  KrigingModel(Dataset data, BasisSet basis, Hyperparameters theta, detail::NormalizedData norm,
               detail::FitCore core)
      : data_(std::move(data)), basis_(std::move(basis)), theta_(std::move(theta)), norm_(std::move(norm)),
        core_(std::move(core)) {}

  struct Work {
    Vector u;
    Vector rt;             // L^{-1} r
    Vector trendResidual;  // m - Ft' rt
    Prediction prediction;
  };

  Work evaluate(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != data_.dim()) throw InvalidArgument("predict: dimension mismatch");
    if (!x.allFinite()) throw InvalidArgument("predict: nonfinite input");
    Work w;
    w.u = data_.domain().to_unit(x);
    const auto n = norm_.U.rows();
    Vector r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      r[i] = detail::matern52_of_distance(detail::scaled_distance(w.u, norm_.U.row(i), theta_.values()));
      // at a training decision the jittered row is used, so the data are
      // reproduced exactly rather than up to jitter * gamma
      if (r[i] == 1.0 && w.u == norm_.U.row(i).transpose()) r[i] += core_.jitter;
    }
    const Vector m = basis_.values(w.u);
    const double meanN = m.dot(core_.alpha) + r.dot(core_.gamma);
    w.rt = core_.L.triangularView<Eigen::Lower>().solve(r);
    w.trendResidual = m - core_.Ft.transpose() * w.rt;
    const double varN =
        core_.sigma2 * (1.0 - w.rt.squaredNorm() + w.trendResidual.dot(core_.Allt.solve(w.trendResidual)));
    w.prediction.mean = norm_.yMean + norm_.yScale * meanN;
    w.prediction.rawVariance = norm_.yScale * norm_.yScale * varN;
    w.prediction.variance = std::max(0.0, w.prediction.rawVariance);
    return w;
  }

  Dataset data_;
  BasisSet basis_;
  Hyperparameters theta_;
  detail::NormalizedData norm_;
  detail::FitCore core_;
};

/// Fits a Kriging model at fixed theta. Throws IllConditioned when the
/// correlation matrix cannot be factored within the jitter policy and
/// InsufficientData when n < p.
inline KrigingModel fit(const Dataset& data, const BasisSet& basis, const Hyperparameters& theta,
                        const JitterPolicy& jitter = {}) {
  if (theta.dim() != data.dim()) throw InvalidArgument("fit: theta dimension does not match data dimension");
  if (data.size() < basis.size())
    throw InsufficientData("fit: " + std::to_string(data.size()) + " observations for " +
                           std::to_string(basis.size()) + " basis functions");
  auto norm = detail::normalize(data);
  detail::FitFailure failure{};
  auto core = detail::fit_core(norm, basis, theta.values(), jitter, &failure);
  if (!core) {
    if (failure == detail::FitFailure::Correlation)
      throw IllConditioned("correlation matrix not positive definite up to jitter " + std::to_string(jitter.max) +
                           " at theta = " + format_vector(theta.values()));
    throw IllConditioned("trend matrix F' Psi^-1 F is singular at theta = " + format_vector(theta.values()));
  }
  return KrigingModel(data, basis, theta, std::move(norm), std::move(*core));
}

inline Prediction predict(const KrigingModel& model, const Vector& x) { return model.predict(x); }

inline PredictionGradient predict_gradient(const KrigingModel& model, const Vector& x) {
  return model.predict_with_gradient(x).second;
}

}  // namespace kgcp
