#pragma once

// Bilevel program with affine constraints and a linear lower level:
//
//   min_{x,y} f(x, y)  s.t.  Cx + Dy <= d,  y in argmin_y { c'y : Ax + By <= b }
//
// Variables are stacked as w = (x, y).

#include "bilevel/affine_system.hpp"
#include "bilevel/lp.hpp"
#include "bilevel/quadratic.hpp"
#include "bilevel/value_function.hpp"

#include <optional>
#include <string>
#include <utility>

namespace bilevel {

struct BilevelInstance {
  std::string name;
  LowerLevel lower;
  Matrix C;  // q x n
  Matrix D;  // q x m
  Vector d;  // q
  QuadObjective objective;
  Vector box_lo, box_hi;  // start box over w
  std::optional<double> f_star;
  double fval_offset = 1e-4;  // profile offset for function values

  Eigen::Index n() const { return lower.n(); }
  Eigen::Index m() const { return lower.m(); }
  Eigen::Index p() const { return lower.p(); }
  Eigen::Index q() const { return C.rows(); }
  Eigen::Index dim() const { return n() + m(); }

  Vector x_of(const Vector& w) const { return w.head(n()); }
  Vector y_of(const Vector& w) const { return w.tail(m()); }
  Vector stack(const Vector& x, const Vector& y) const {
    Vector w(dim());
    w << x, y;
    return w;
  }

  /// Z_l ∩ Z_u as one inequality system in w; lower-level rows come first.
  AffineSystem feasible_set() const {
    Matrix M(p() + q(), dim());
    Vector g(p() + q());
    if (p() > 0) M.topRows(p()) << lower.A, lower.B;
    if (q() > 0) M.bottomRows(q()) << C, D;
    g << lower.b, d;
    return AffineSystem(std::move(M), std::move(g));
  }

  double upper_value(const Vector& w) const { return objective.value(w); }

  /// Dimension checks plus one LP proving Z_u ∩ Z_l is nonempty.
  void validate() const {
    lower.validate();
    if (C.cols() != n() || D.rows() != C.rows() || D.cols() != m() || d.size() != C.rows())
      throw DimensionError("BilevelInstance '" + name + "': upper-level block sizes");
    if (!C.allFinite() || !D.allFinite() || !d.allFinite())
      throw DimensionError("BilevelInstance '" + name + "': non-finite upper-level data");
    objective.validate(dim());
    if (box_lo.size() != dim() || box_hi.size() != dim())
      throw DimensionError("BilevelInstance '" + name + "': start box must cover (x, y)");
    if ((box_hi - box_lo).minCoeff() < 0.0)
      throw DimensionError("BilevelInstance '" + name + "': start box lo > hi");
    const LPSolution s = solve_lp(Vector::Zero(dim()), feasible_set());
    if (s.status != LpStatus::Optimal)
      throw InfeasibleInstance("BilevelInstance '" + name + "': Z_u ∩ Z_l is empty");
  }
};

namespace builtin {

/// Linear upper and lower level, optimum -3.25 at x = (2, 0), y = (1.5, 0).
inline BilevelInstance linear_ex1() {
  BilevelInstance in;
  in.name = "ex1";
  // 2x1 - y1 + y2 >= 5/2, x1 + x2 <= 2, x1 - 3x2 + y2 <= 2, y >= 0
  in.lower.A = Matrix{{-2, 0}, {1, 1}, {1, -3}, {0, 0}, {0, 0}};
  in.lower.B = Matrix{{1, -1}, {0, 0}, {0, 1}, {-1, 0}, {0, -1}};
  in.lower.b = Vector{{-2.5, 2, 2, 0, 0}};
  in.lower.c = Vector{{-4, 1}};
  in.C = Matrix{{-1, 0}, {0, -1}};
  in.D = Matrix::Zero(2, 2);
  in.d = Vector::Zero(2);
  in.objective = {Matrix::Zero(4, 4), Vector{{-2, 1, 0.5, 0}}, 0.0};
  in.box_lo = Vector::Zero(4);
  in.box_hi = Vector::Constant(4, 2.0);
  in.f_star = -3.25;
  in.fval_offset = 1e-4;
  return in;
}

/// Convex quadratic upper level with theta = 0 everywhere, optimum 0.5.
inline BilevelInstance quadratic_ex2() {
  BilevelInstance in;
  in.name = "ex2";
  // x + y1 + y2 >= 1, y >= 0
  in.lower.A = Matrix{{-1}, {0}, {0}};
  in.lower.B = Matrix{{-1, -1}, {-1, 0}, {0, -1}};
  in.lower.b = Vector{{-1, 0, 0}};
  in.lower.c = Vector{{1, 0}};
  in.C = Matrix{{-1}};
  in.D = Matrix::Zero(1, 2);
  in.d = Vector{{-0.5}};
  // x^2 + (y1 + y2)^2
  in.objective = {Matrix{{2, 0, 0}, {0, 2, 2}, {0, 2, 2}}, Vector::Zero(3), 0.0};
  in.box_lo = Vector::Zero(3);
  in.box_hi = Vector::Constant(3, 2.0);
  in.f_star = 0.5;
  in.fval_offset = 1e-5;
  return in;
}

/// Data of the inverse transportation problem (5 warehouses, 7 consumers).
struct TransportData {
  static constexpr int warehouses = 5;
  static constexpr int consumers = 7;
  Matrix cost;
  Vector demand;
  Matrix observed;  // y_o
};

inline TransportData transport_data() {
  TransportData t;
  t.cost = Matrix{{0.5757, 0.8423, 0.4997, 0.4390, 0.1491, 0.0283, 0.7567},
                  {0.7961, 0.2936, 0.1152, 0.3751, 0.8289, 0.8418, 0.6652},
                  {0.9601, 0.9431, 0.1127, 0.6483, 0.4808, 0.0665, 0.8978},
                  {0.4972, 0.7713, 0.0604, 0.2625, 0.6511, 0.01336, 0.6385},
                  {0.3849, 0.7657, 0.6529, 0.3815, 0.0300, 0.3401, 0.9189}};
  t.demand = Vector{{5, 5, 5, 10, 3, 9, 1}};
  t.observed = Matrix{{-0.0032, 0.0053, -0.0031, 0.0024, 2.9991, 4.5902, 0.0020},
                      {0.0020, 5.0030, 1.5969, -0.0001, 0.0040, 0.0078, 0.9911},
                      {-0.0080, 0.0030, 3.2053, 0.0098, -0.0075, 4.3973, 0.0035},
                      {-0.0025, 0.0073, 0.1958, 7.3927, 0.0035, -0.0059, 0.0074},
                      {5.0050, -0.0016, -0.0100, 2.5930, -0.0045, 0.0074, 0.0020}};
  return t;
}

/// Inverse transportation problem: recover warehouse offers x from a noisy
/// plan y_o.  y is stored row-major, y[i * consumers + j].
inline BilevelInstance inverse_transportation(const TransportData& t = transport_data(),
                                              const std::string& name = "ex3") {
  const int nw = TransportData::warehouses;
  const int nc = TransportData::consumers;
  const int m = nw * nc;

  BilevelInstance in;
  in.name = name;
  const int p = nw + nc + m;
  in.lower.A = Matrix::Zero(p, nw);
  in.lower.B = Matrix::Zero(p, m);
  in.lower.b = Vector::Zero(p);
  in.lower.c = Vector(m);
  for (int i = 0; i < nw; ++i) {
    in.lower.A(i, i) = -1.0;  // sum_j y_ij - x_i <= 0
    for (int j = 0; j < nc; ++j) in.lower.B(i, i * nc + j) = 1.0;
  }
  for (int j = 0; j < nc; ++j) {
    for (int i = 0; i < nw; ++i) in.lower.B(nw + j, i * nc + j) = -1.0;
    in.lower.b(nw + j) = -t.demand(j);  // sum_i y_ij >= demand_j
  }
  for (int k = 0; k < m; ++k) in.lower.B(nw + nc + k, k) = -1.0;
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nc; ++j) in.lower.c(i * nc + j) = t.cost(i, j);

  // x >= 0, e'x >= e'demand
  in.C = Matrix::Zero(nw + 1, nw);
  in.C.topRows(nw) = -Matrix::Identity(nw, nw);
  in.C.row(nw).setConstant(-1.0);
  in.D = Matrix::Zero(nw + 1, m);
  in.d = Vector::Zero(nw + 1);
  in.d(nw) = -t.demand.sum();

  // 1/2 |y - y_o|^2
  Vector yo(m);
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nc; ++j) yo(i * nc + j) = t.observed(i, j);
  in.objective.Q = Matrix::Zero(nw + m, nw + m);
  in.objective.Q.bottomRightCorner(m, m) = Matrix::Identity(m, m);
  in.objective.q = Vector::Zero(nw + m);
  in.objective.q.tail(m) = -yo;
  in.objective.constant = 0.5 * yo.squaredNorm();

  in.box_lo = Vector::Zero(nw + m);
  in.box_hi = Vector::Constant(nw + m, 6.0);
  in.f_star = 5.000776e-4;
  in.fval_offset = 1e-2;
  return in;
}

/// The printed cost matrix makes y_d non-optimal for x_d: two reduced costs
/// on y_d's (spanning-tree) support are negative. Raising exactly those two
/// entries restores y_d in Psi(x_d).
inline TransportData consistent_transport_data() {
  TransportData t = transport_data();
  t.cost(4, 4) = 0.3000;
  t.cost(3, 5) = 0.1336;
  return t;
}

inline BilevelInstance inverse_transportation_consistent() {
  return inverse_transportation(consistent_transport_data(), "ex3-consistent");
}

}  // namespace builtin

}  // namespace bilevel
