#pragma once

// Subdifferentials of phi(z) = min(f1(z), f2(z)) for smooth f1, f2, given
// their values and gradients at the point.

#include "bilevel/types.hpp"

#include <algorithm>
#include <vector>

namespace bilevel {

enum class SubdiffKind { Singleton, Pair, Segment };
enum class SubdiffOf { Limiting, Clarke, LimitingOfNegative };

struct SubdiffDescription {
  SubdiffKind kind = SubdiffKind::Singleton;
  std::vector<Vector> points;  // one point, two points, or segment endpoints

  bool contains(const Vector& v, double tol = 1e-12) const {
    switch (kind) {
      case SubdiffKind::Singleton:
      case SubdiffKind::Pair:
        for (const auto& p : points)
          if ((p - v).cwiseAbs().maxCoeff() <= tol) return true;
        return false;
      case SubdiffKind::Segment: {
        const Vector dir = points[1] - points[0];
        const double len2 = dir.squaredNorm();
        const double t = len2 > 0 ? std::clamp((v - points[0]).dot(dir) / len2, 0.0, 1.0) : 0.0;
        return (points[0] + t * dir - v).cwiseAbs().maxCoeff() <= tol;
      }
    }
    return false;
  }
};

/// `tie_tol` widens the kink test |val1 - val2| <= tie_tol; the exact
/// formulas correspond to tie_tol = 0.
inline SubdiffDescription min_subdifferential(const Vector& grad1, const Vector& grad2,
                                              double val1, double val2, SubdiffOf which,
                                              double tie_tol = 0.0) {
  if (grad1.size() != grad2.size())
    throw DimensionError("min_subdifferential: gradient sizes differ");
  const double sign = which == SubdiffOf::LimitingOfNegative ? -1.0 : 1.0;
  SubdiffDescription out;
  if (val1 < val2 - tie_tol) {
    out.points = {sign * grad1};
    return out;
  }
  if (val1 > val2 + tie_tol) {
    out.points = {sign * grad2};
    return out;
  }
  if (grad1 == grad2) {
    out.points = {sign * grad1};
    return out;
  }
  out.kind = which == SubdiffOf::Limiting ? SubdiffKind::Pair : SubdiffKind::Segment;
  out.points = {sign * grad1, sign * grad2};
  return out;
}

}  // namespace bilevel
