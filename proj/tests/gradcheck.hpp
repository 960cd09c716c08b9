#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <functional>

namespace tapelab::testing {

/// Central differences of `f` around `x` (modified in place and restored).
inline Eigen::VectorXd numeric_gradient(const std::function<double()>& f, Eigen::Ref<Eigen::VectorXd> x,
                                        double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x(i);
    x(i) = saved + h;
    const double up = f();
    x(i) = saved - h;
    const double down = f();
    x(i) = saved;
    g(i) = (up - down) / (2 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace tapelab::testing
