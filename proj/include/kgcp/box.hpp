#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>

#include <Eigen/Core>

#include "kgcp/errors.hpp"

namespace kgcp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << v[i];
  }
  os << ']';
  return os.str();
}

/// Axis-aligned box domain [lower, upper].
class Box {
public:
  Box() = default;

  Box(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() == 0 || lower_.size() != upper_.size())
      throw InvalidArgument("box bounds must be nonempty and of equal dimension");
    if (!all_finite(lower_) || !all_finite(upper_))
      throw InvalidArgument("box bounds must be finite");
    if ((upper_.array() <= lower_.array()).any())
      throw InvalidArgument("box bounds must satisfy lower < upper componentwise");
  }

  static Box unit(std::size_t d) {
    return Box(Vector::Zero(static_cast<Eigen::Index>(d)), Vector::Ones(static_cast<Eigen::Index>(d)));
  }

  static Box uniform(std::size_t d, double lo, double hi) {
    return Box(Vector::Constant(static_cast<Eigen::Index>(d), lo),
               Vector::Constant(static_cast<Eigen::Index>(d), hi));
  }

  std::size_t dim() const { return static_cast<std::size_t>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Vector width() const { return upper_ - lower_; }
  Vector center() const { return 0.5 * (lower_ + upper_); }

  bool contains(const Vector& x, double tol = 0.0) const {
    if (x.size() != lower_.size()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double slack = tol * (upper_[i] - lower_[i]);
      if (!(x[i] >= lower_[i] - slack && x[i] <= upper_[i] + slack)) return false;
    }
    return true;
  }

  Vector clip(const Vector& x) const { return x.cwiseMax(lower_).cwiseMin(upper_); }

  /// Affine map onto [0,1]^d.
  Vector to_unit(const Vector& x) const {
    return ((x - lower_).array() / (upper_ - lower_).array()).matrix();
  }

  Vector from_unit(const Vector& u) const {
    return lower_ + (u.array() * (upper_ - lower_).array()).matrix();
  }

private:
  Vector lower_;
  Vector upper_;
};

}  // namespace kgcp
