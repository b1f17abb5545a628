#pragma once

// Synthetic test problems in maximization orientation (the usual minimization
// forms, negated), with high-precision known optima.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "kgcp/box.hpp"
#include "kgcp/errors.hpp"

namespace kgcp {

struct Problem {
  std::string name;
  std::size_t d = 0;
  Box domain;
  std::function<double(const Vector&)> evaluate;
  double trueOptimum = 0.0;
  Vector trueOptimizer;
  std::size_t budgetN = 0;
};

namespace fn {

inline double branin(double x1, double x2) {
  constexpr double pi = std::numbers::pi;
  const double b = 5.1 / (4.0 * pi * pi);
  const double c = 5.0 / pi;
  const double t = 1.0 / (8.0 * pi);
  const double q = x2 - b * x1 * x1 + c * x1 - 6.0;
  return q * q + 10.0 * (1.0 - t) * std::cos(x1) + 10.0;
}

inline double hartmann6(const Vector& x) {
  static constexpr double alpha[4] = {1.0, 1.2, 3.0, 3.2};
  static constexpr double A[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                     {0.05, 10, 17, 0.1, 8, 14},
                                     {3, 3.5, 1.7, 10, 17, 8},
                                     {17, 8, 0.05, 10, 0.1, 14}};
  static constexpr double P[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                     {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                     {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                     {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < 6; ++j) {
      const double diff = x[j] - P[i][j];
      inner += A[i][j] * diff * diff;
    }
    sum += alpha[i] * std::exp(-inner);
  }
  return -sum;
}

inline double schwefel(const Vector& x) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) sum += x[i] * std::sin(std::sqrt(std::abs(x[i])));
  return 418.9829 * static_cast<double>(x.size()) - sum;
}

inline double eggholder(double x1, double x2) {
  return -(x2 + 47.0) * std::sin(std::sqrt(std::abs(x2 + x1 / 2.0 + 47.0))) -
         x1 * std::sin(std::sqrt(std::abs(x1 - (x2 + 47.0))));
}

}  // namespace fn

inline Problem branin() {
  Problem p;
  p.name = "branin";
  p.d = 2;
  p.domain = Box(Vector{{-5.0, 0.0}}, Vector{{10.0, 15.0}});
  p.evaluate = [](const Vector& x) { return -fn::branin(x[0], x[1]); };
  p.trueOptimizer = Vector{{std::numbers::pi, 2.275}};
  p.trueOptimum = -0.39788735772973816;
  p.budgetN = 20;
  return p;
}

inline Problem hartmann6() {
  Problem p;
  p.name = "hartmann6";
  p.d = 6;
  p.domain = Box::unit(6);
  p.evaluate = [](const Vector& x) { return -fn::hartmann6(x); };
  p.trueOptimizer = Vector{{0.20168950968761765, 0.15001069413863433, 0.47687396963094986, 0.27533242916768874,
                            0.31165161370991157, 0.6573005333899428}};
  p.trueOptimum = 3.322368011415514;
  p.budgetN = 40;
  return p;
}

inline Problem schwefel2() {
  Problem p;
  p.name = "schwefel";
  p.d = 2;
  p.domain = Box::uniform(2, -500.0, 500.0);
  p.evaluate = [](const Vector& x) { return -fn::schwefel(x); };
  p.trueOptimizer = Vector{{420.96871136867475, 420.96871136867475}};
  p.trueOptimum = -2.5455441573285498e-05;
  p.budgetN = 100;
  return p;
}

inline Problem eggholder() {
  Problem p;
  p.name = "eggholder";
  p.d = 2;
  p.domain = Box::uniform(2, -512.0, 512.0);
  p.evaluate = [](const Vector& x) { return -fn::eggholder(x[0], x[1]); };
  p.trueOptimizer = Vector{{512.0, 404.2318051457265}};
  p.trueOptimum = 959.6406627208507;
  p.budgetN = 100;
  return p;
}

inline std::vector<std::string> problem_names() { return {"branin", "hartmann6", "schwefel", "eggholder"}; }

inline Problem problem_by_name(const std::string& name) {
  if (name == "branin") return branin();
  if (name == "hartmann6" || name == "hartmann") return hartmann6();
  if (name == "schwefel" || name == "schwefel2") return schwefel2();
  if (name == "eggholder") return eggholder();
  throw ConfigError("unknown problem '" + name + "'");
}

/// trueOptimum - f(xHat); values down to -1e-6 are clamped to 0.
inline double opportunity_cost(const Problem& problem, const Vector& xHat) {
  if (!problem.domain.contains(xHat)) throw InvalidArgument("opportunity_cost: decision outside the domain");
  const double oc = problem.trueOptimum - problem.evaluate(xHat);
  return oc < 0.0 && oc >= -1e-6 ? 0.0 : oc;
}

}  // namespace kgcp
