#pragma once

// Independent reference implementations used by the tests. They share only the
// data containers with the library and solve everything through explicit
// inverses and scalar loops, carried out in extended precision.

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/LU>

#include "kgcp/kgcp.hpp"

namespace oracle {

using kgcp::Matrix;
using kgcp::Vector;

using Real = long double;
using RMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

inline Real matern_ld(Real l) {
  const Real r5 = std::sqrt(Real(5));
  return (1 + r5 * l + 5 * l * l / 3) * std::exp(-r5 * l);
}

inline double matern(double l) { return static_cast<double>(matern_ld(l)); }

template <class A, class B>
Real kernel_ld(const A& a, const B& b, const Vector& theta) {
  Real s = 0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const Real diff = Real(a[k]) - Real(b[k]);
    s += Real(theta[k]) * diff * diff;
  }
  return matern_ld(std::sqrt(s));
}

inline double kernel(const Vector& a, const Vector& b, const Vector& theta) {
  return static_cast<double>(kernel_ld(a, b, theta));
}

/// Ordinary Kriging on unit-cube inputs and standardized outputs, solved with
/// an explicit inverse of Psi + jitter I.
struct DenseKriging {
  RMatrix U;
  RVector y;
  Vector theta;
  double yMean = 0.0, yScale = 1.0;
  kgcp::Box domain;
  RMatrix psiInv;
  double alpha = 0.0;  // standardized units
  double sigma2 = 0.0;  // standardized units
  double logDet = 0.0;
  double ones = 0.0;  // 1' Psi^-1 1

  DenseKriging(const kgcp::Dataset& data, const Vector& th, double jitter) : theta(th), domain(data.domain()) {
    const auto n = static_cast<Eigen::Index>(data.size());
    U.resize(n, static_cast<Eigen::Index>(data.dim()));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < U.cols(); ++k) U(i, k) = unit(data.X()(i, k), k);
    Real m = 0;
    for (Eigen::Index i = 0; i < n; ++i) m += data.y()[i];
    const Real ym = m / n;
    Real ss = 0;
    for (Eigen::Index i = 0; i < n; ++i) ss += (data.y()[i] - ym) * (data.y()[i] - ym);
    const Real ys = n > 1 && ss > 0 ? std::sqrt(ss / (n - 1)) : Real(1);
    yMean = static_cast<double>(ym);
    yScale = static_cast<double>(ys);
    y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = (data.y()[i] - ym) / ys;

    RMatrix psi(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        psi(i, j) = kernel_ld(U.row(i), U.row(j), theta) + (i == j ? Real(jitter) : Real(0));
    psiInv = psi.inverse();
    const RVector one = RVector::Ones(n);
    const Real o = one.dot(psiInv * one);
    const Real a = one.dot(psiInv * y) / o;
    const RVector res = y - a * one;
    const Real s2 = res.dot(psiInv * res) / n;
    ones = static_cast<double>(o);
    alpha = static_cast<double>(a);
    sigma2 = static_cast<double>(s2);
    logDet = static_cast<double>(std::log(psi.determinant()));
    nll = static_cast<double>((n * std::log(s2) + std::log(psi.determinant())) / 2);
  }

  double mean(const Vector& x) const {
    const RVector one = RVector::Ones(U.rows());
    return static_cast<double>(yMean + Real(yScale) * (Real(alpha) + r(x).dot(psiInv * (y - Real(alpha) * one))));
  }

  double variance(const Vector& x) const {
    const RVector rx = r(x);
    const RVector one = RVector::Ones(U.rows());
    const Real bias = 1 - one.dot(psiInv * rx);
    const Real sc = yScale;
    return static_cast<double>(sc * sc * Real(sigma2) * (1 - rx.dot(psiInv * rx) + bias * bias / Real(ones)));
  }

  double neg_log_lik() const { return nll; }

 private:
  double nll = 0.0;

  Real unit(double v, Eigen::Index k) const {
    return (Real(v) - domain.lower()[k]) / (Real(domain.upper()[k]) - domain.lower()[k]);
  }

  RVector r(const Vector& x) const {
    RVector u(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) u[k] = unit(x[k], k);
    RVector out(U.rows());
    for (Eigen::Index i = 0; i < U.rows(); ++i) out[i] = kernel_ld(u, U.row(i), theta);
    return out;
  }
};

/// Random dataset with distinct rows inside a random box.
inline kgcp::Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::uniform_real_distribution<double> lo(-5.0, 0.0), wid(0.5, 10.0), u(0.0, 1.0), noise(-1.0, 1.0);
  Vector lower(static_cast<Eigen::Index>(d)), upper(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) {
    lower[k] = lo(rng);
    upper[k] = lower[k] + wid(rng);
  }
  kgcp::Box box(lower, upper);
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Vector y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    Vector p(static_cast<Eigen::Index>(d));
    for (auto& v : p) v = u(rng);
    X.row(i) = box.from_unit(p).transpose();
    y[i] = std::sin(3.0 * p.sum()) + p.squaredNorm() + 0.1 * noise(rng);
  }
  return kgcp::Dataset(X, y, box);
}

inline double rel_err(double a, double b, double scale) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), scale});
}

}  // namespace oracle
