#pragma once

#include "bilevel/types.hpp"

#include <cmath>

namespace bilevel {

/// f(w) = 1/2 w'Qw + q'w + constant over the stacked variable w = (x, y).
struct QuadObjective {
  Matrix Q;
  Vector q;
  double constant = 0.0;

  double value(const Vector& w) const { return 0.5 * w.dot(Q * w) + q.dot(w) + constant; }
  Vector gradient(const Vector& w) const { return Q * w + q; }

  void validate(Eigen::Index dim) const {
    if (Q.rows() != dim || Q.cols() != dim || q.size() != dim)
      throw DimensionError("QuadObjective: dimensions do not match (x, y)");
    if (!Q.allFinite() || !q.allFinite() || !std::isfinite(constant))
      throw DimensionError("QuadObjective: non-finite entry");
    const double scale = 1.0 + Q.cwiseAbs().maxCoeff();
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw DimensionError("QuadObjective: Q is not symmetric");
  }

  QuadObjective scaled(double t) const { return {t * Q, t * q, t * constant}; }
};

}  // namespace bilevel
