#include "bilevel/qp.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace bilevel;

TEST(SolveQp, ClampedProjection) {
  // min 1/2 (x-3)^2  s.t. x <= 1
  AffineSystem sys(Matrix::Ones(1, 1), Vector::Ones(1));
  const auto s = solve_qp(Matrix::Identity(1, 1), Vector::Constant(1, -3.0), sys);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR(s.x(0), 1.0, 1e-12);
  EXPECT_NEAR(s.multipliers(0), 2.0, 1e-12);
  EXPECT_LE(qp_kkt_residual(Matrix::Identity(1, 1), Vector::Constant(1, -3.0), sys, s), 1e-8);
}

TEST(SolveQp, ComponentwiseClamp) {
  Matrix M(4, 2);
  M << 1, 0, 0, 1, -1, 0, 0, -1;
  AffineSystem sys(M, Vector::Ones(4));
  const Vector q{{-2, 3}};
  const auto s = solve_qp(Matrix::Identity(2, 2), q, sys);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR(s.x(0), 1.0, 1e-12);
  EXPECT_NEAR(s.x(1), -1.0, 1e-12);
  EXPECT_EQ(s.active_set, (IndexSet{0, 3}));
}

TEST(SolveQp, InfeasibleSystem) {
  AffineSystem sys(Matrix{{1}, {-1}}, Vector{{-1, -2}});
  const auto s = solve_qp(Matrix::Identity(1, 1), Vector::Zero(1), sys);
  EXPECT_EQ(s.status, QpStatus::Infeasible);
}

TEST(SolveQp, RejectsIndefiniteMatrix) {
  AffineSystem sys(Matrix::Ones(1, 2), Vector::Ones(1));
  Matrix Q{{1, 0}, {0, -1}};
  EXPECT_THROW(solve_qp(Q, Vector::Zero(2), sys), NotSPD);
  Matrix psd{{1, 0}, {0, 0}};
  EXPECT_THROW(solve_qp(psd, Vector::Zero(2), sys), NotSPD);
}

TEST(SolveQp, EqualityConstrained) {
  // min 1/2 |x|^2 s.t. x1 + x2 + x3 = 3, x1 <= 0.5
  Matrix Me = Matrix::Ones(1, 3);
  AffineSystem sys(Matrix{{1, 0, 0}}, Vector{{0.5}}, Me, Vector{{3.0}});
  const auto s = solve_qp(Matrix::Identity(3, 3), Vector::Zero(3), sys);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR(s.x(0), 0.5, 1e-12);
  EXPECT_NEAR(s.x(1), 1.25, 1e-12);
  EXPECT_NEAR(s.x(2), 1.25, 1e-12);
  EXPECT_LE(qp_kkt_residual(Matrix::Identity(3, 3), Vector::Zero(3), sys, s), 1e-8);
}

TEST(SolveQp, WarmStartGivesSameMinimiser) {
  Matrix M(3, 2);
  M << 1, 1, -1, 0, 0, -1;
  AffineSystem sys(M, Vector{{2, 0, 0}});
  Matrix Q{{2, 0.5}, {0.5, 1}};
  const Vector q{{-4, -3}};
  const auto cold = solve_qp(Q, q, sys);
  const auto warm = solve_qp(Q, q, sys, Vector{{0.1, 0.2}});
  ASSERT_EQ(cold.status, QpStatus::Optimal);
  EXPECT_LE((cold.x - warm.x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ProjectPolyhedron, FeasiblePointIsFixed) {
  Matrix M(3, 2);
  M << 1, 1, -1, 0, 0, -1;
  AffineSystem sys(M, Vector{{2, 0, 0}});
  const Vector w{{0.3, 0.4}};
  EXPECT_EQ(project_polyhedron(w, sys), w);
}

TEST(ProjectPolyhedron, NegativeOntoNonnegativeHalfLine) {
  AffineSystem sys(-Matrix::Identity(1, 1), Vector::Zero(1));
  EXPECT_NEAR(project_polyhedron(Vector::Constant(1, -1.0), sys)(0), 0.0, 1e-15);
}

TEST(ProjectPolyhedron, SymmetricCornerCase) {
  Matrix M(3, 2);
  M << 1, 1, -1, 0, 0, -1;
  AffineSystem sys(M, Vector{{2, 0, 0}});
  const Vector p = project_polyhedron(Vector{{2, 2}}, sys);
  EXPECT_NEAR(p(0), 1.0, 1e-12);
  EXPECT_NEAR(p(1), 1.0, 1e-12);
  // KKT: w0 - p = μ (1, 1) with μ = 1 >= 0
  EXPECT_NEAR((Vector{{2, 2}} - p)(0), (Vector{{2, 2}} - p)(1), 1e-12);
}

TEST(ProjectPolyhedron, EmptyPolyhedronThrows) {
  AffineSystem sys(Matrix{{1}, {-1}}, Vector{{-1, -2}});
  EXPECT_THROW(project_polyhedron(Vector::Zero(1), sys), InfeasibleProblem);
}

namespace {

Matrix random_spd(oracle::Rng& rng, int n) {
  Matrix L(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) L(i, j) = rng.uniform(-1, 1);
  return L * L.transpose() + 0.1 * Matrix::Identity(n, n);
}

}  // namespace

TEST(SolveQpProperty, KktAndActiveSetEnumerationOracle) {
  oracle::Rng rng(7);
  for (int trial = 0; trial < 250; ++trial) {
    const int n = rng.integer(1, 6);
    const int extra = rng.integer(0, 3);
    Matrix M(2 * n + extra, n);
    Vector g(2 * n + extra);
    M.topRows(n) = Matrix::Identity(n, n);
    M.middleRows(n, n) = -Matrix::Identity(n, n);
    for (int j = 0; j < n; ++j) {
      g(j) = rng.uniform(0.0, 2.0);
      g(n + j) = rng.uniform(0.0, 2.0);
    }
    for (int r = 0; r < extra; ++r) {
      for (int j = 0; j < n; ++j) M(2 * n + r, j) = rng.uniform(-1, 1);
      g(2 * n + r) = rng.uniform(0.0, 1.0);
    }
    const Matrix Q = random_spd(rng, n);
    Vector q(n);
    for (int j = 0; j < n; ++j) q(j) = rng.uniform(-4, 4);
    AffineSystem sys(M, g);
    const auto s = solve_qp(Q, q, sys);
    ASSERT_EQ(s.status, QpStatus::Optimal) << "trial " << trial;
    EXPECT_LE(qp_kkt_residual(Q, q, sys, s), 1e-8) << "trial " << trial;
    EXPECT_LE(sys.violation(s.x), 1e-9);
    const auto ref = oracle::qp_by_active_sets(Q, q, M, g);
    ASSERT_TRUE(ref.has_value());
    const double ref_obj = 0.5 * ref->dot(Q * *ref) + q.dot(*ref);
    EXPECT_NEAR(s.objective, ref_obj, 1e-6) << "trial " << trial;
    EXPECT_LE((s.x - *ref).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
  }
}

TEST(ProjectPolyhedronProperty, Idempotent) {
  oracle::Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.integer(1, 5);
    const int m = rng.integer(1, 6);
    Matrix M(m + 1, n);
    Vector g(m + 1);
    for (int r = 0; r < m; ++r) {
      for (int j = 0; j < n; ++j) M(r, j) = rng.uniform(-1, 1);
      g(r) = rng.uniform(0.0, 1.0);  // origin stays feasible
    }
    M.row(m).setOnes();
    g(m) = 1.0;
    AffineSystem sys(M, g);
    Vector w(n);
    for (int j = 0; j < n; ++j) w(j) = rng.uniform(-3, 3);
    const Vector p = project_polyhedron(w, sys);
    EXPECT_LE(sys.violation(p), 1e-9);
    const Vector pp = project_polyhedron(p, sys);
    EXPECT_LE((pp - p).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
  }
}
