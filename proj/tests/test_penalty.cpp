#include "bilevel/bench.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace bilevel;

namespace {

void expect_report_contract(const BilevelInstance& inst, const RunReport& r,
                            const PenaltyParams& p) {
  ASSERT_EQ(r.sigma_history.size(), r.outer_iters);
  for (std::size_t k = 0; k < r.sigma_history.size(); ++k)
    EXPECT_EQ(r.sigma_history[k], p.sigma0 * std::pow(p.gamma, static_cast<double>(k)));
  std::size_t inner = 0;
  for (auto c : r.inner_counts) inner += c;
  EXPECT_EQ(inner, r.total_inner_iters);
  if (r.method != Method::PDG) EXPECT_EQ(r.steps.size(), r.total_inner_iters);
  EXPECT_LE(inst.feasible_set().violation(inst.stack(r.x, r.y)), 1e-9);
  if (r.terminated) {
    EXPECT_LE(r.final_gap, p.outer_tol + 1e-12);
    // independent recomputation of the gap
    EXPECT_LE(duality_gap(inst.lower, r.x, r.y), p.outer_tol + 1e-12);
    if (r.method != Method::PDG) EXPECT_LE(r.stationarity_residual, 1e-5);
  } else {
    EXPECT_EQ(r.outer_iters, p.outer_cap);
  }
}

}  // namespace

TEST(PenaltyParams, DefaultsAndOverrides) {
  PenaltyParams p;
  EXPECT_EQ(p.sigma0, 1.0);
  EXPECT_EQ(p.gamma, 1.2);
  EXPECT_EQ(p.outer_tol, 1e-7);
  EXPECT_EQ(p.outer_cap, 200u);
  EXPECT_EQ(p.inner_cap, 100u);
  EXPECT_EQ(p.inner_tol, 1e-4);
  EXPECT_EQ(p.line_search.step0, 1.0);
  EXPECT_EQ(p.line_search.alpha, 1e-2);
  EXPECT_EQ(p.line_search.beta, 1e-1);
  EXPECT_EQ(p.line_search.max_trials, 10);
  p.set("gamma", "2");
  p.set("outer_cap", "7");
  EXPECT_EQ(p.gamma, 2.0);
  EXPECT_EQ(p.outer_cap, 7u);
  EXPECT_THROW(p.set("gamma", "x"), ParseError);
  EXPECT_THROW(p.set("outer_cap", "1.5"), ParseError);
  EXPECT_THROW(p.set("nonsense", "1"), ParseError);
  p.gamma = 1.0;
  EXPECT_THROW(p.validate(), DomainError);
}

TEST(ParseMethod, Names) {
  EXPECT_EQ(parse_method("pbdc"), Method::PBDC);
  EXPECT_EQ(parse_method("PDC"), Method::PDC);
  EXPECT_EQ(parse_method("Pdg"), Method::PDG);
  EXPECT_THROW(parse_method("dca"), ParseError);
}

TEST(InitDual, QuadraticEx2) {
  const Vector u = init_dual(builtin::quadratic_ex2());
  EXPECT_NEAR(u(0), 0.0, 1e-12);
  EXPECT_NEAR(u(1), 1.0, 1e-12);
  EXPECT_NEAR(u(2), 0.0, 1e-12);
}

TEST(InitDual, LinearEx1MatchesVertexOracle) {
  const auto inst = builtin::linear_ex1();
  const Vector u = init_dual(inst);
  const Eigen::Index p = inst.p();
  // Equalities B'u = -c as two inequalities each, plus u >= 0.
  Matrix M(2 * inst.m() + p, p);
  Vector g(2 * inst.m() + p);
  M << inst.lower.B.transpose(), -inst.lower.B.transpose(), -Matrix::Identity(p, p);
  g << -inst.lower.c, inst.lower.c, Vector::Zero(p);
  const auto ref = oracle::lp_by_vertices(Vector::Ones(p), M, g);
  ASSERT_TRUE(ref.feasible);
  EXPECT_NEAR(u.sum(), ref.value, 1e-9);
  EXPECT_LE((inst.lower.B.transpose() * u + inst.lower.c).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(InitDual, SingletonDualSet) {
  // B = [-1] (y >= b-ish), c = 1: B'u = -1 forces u = 1.
  BilevelInstance inst;
  inst.lower.A = Matrix::Zero(1, 1);
  inst.lower.B = Matrix::Constant(1, 1, -1.0);
  inst.lower.b = Vector::Zero(1);
  inst.lower.c = Vector::Ones(1);
  EXPECT_NEAR(init_dual(inst)(0), 1.0, 1e-12);
}

TEST(InitDual, EmptyDualSetThrows) {
  BilevelInstance inst;
  inst.lower.A = Matrix::Zero(1, 1);
  inst.lower.B = Matrix::Constant(1, 1, 1.0);  // y <= 0, minimise y: unbounded
  inst.lower.b = Vector::Zero(1);
  inst.lower.c = Vector::Ones(1);
  EXPECT_THROW(init_dual(inst), DualInfeasible);
}

TEST(PdgSubproblem, FixedPointNeedsOneAlternation) {
  const auto inst = builtin::quadratic_ex2();
  const Vector w = (Vector(3) << 0.5, 0.0, 0.5).finished();
  const Vector u = init_dual(inst);
  const PdgPoint pt = pdg_subproblem(inst, 1.0, w, u);
  EXPECT_EQ(pt.alternations, 1u);
  EXPECT_LE((pt.w - w).norm(), 1e-9);
  EXPECT_LE((pt.u - u).norm(), 1e-12);
}

TEST(PdgSubproblem, ObjectiveIsMonotone) {
  for (const char* name : {"ex1", "ex2", "ex3"}) {
    const auto inst = *builtin_instance(name);
    const Vector u0 = init_dual(inst);
    for (const auto& w0 : random_starts(inst, 5, 17)) {
      for (double sigma : {1.0, 5.0}) {
        const PdgPoint pt = pdg_subproblem(inst, sigma, w0, u0);
        double prev = pdg_objective(inst, sigma, w0, u0);
        for (double v : pt.objective) {
          EXPECT_LE(v, prev + 1e-9 * (1 + std::abs(prev))) << name;
          prev = v;
        }
      }
    }
  }
}

TEST(PdgSubproblem, RejectsDualInfeasibleWarmStart) {
  const auto inst = builtin::quadratic_ex2();
  const Vector w = (Vector(3) << 0.5, 0.0, 0.5).finished();
  EXPECT_THROW(pdg_subproblem(inst, 1.0, w, Vector::Zero(3)), DualInfeasible);
}

TEST(RunPenalty, InfeasibleStartThrows) {
  const auto inst = builtin::quadratic_ex2();
  EXPECT_THROW(run_penalty(inst, Vector::Zero(3), Method::PBDC), InfeasibleStart);
}

TEST(RunPenalty, StartOnSolutionTerminatesAfterOneOuterIteration) {
  const auto inst = builtin::quadratic_ex2();
  const Vector w = (Vector(3) << 0.5, 0.0, 0.5).finished();
  for (Method m : {Method::PBDC, Method::PDC, Method::PDG}) {
    const RunReport r = run_penalty(inst, w, m);
    EXPECT_TRUE(r.terminated);
    EXPECT_EQ(r.outer_iters, 1u);
    EXPECT_NEAR(r.final_value, 0.5, 1e-9);
  }
}

class RunPenaltyOnInstance
    : public ::testing::TestWithParam<std::tuple<std::string, Method>> {};

TEST_P(RunPenaltyOnInstance, ReachesKnownOptimumAndHonoursContract) {
  const auto& [name, method] = GetParam();
  const auto inst = *builtin_instance(name);
  const PenaltyParams p;
  int hits = 0;
  const auto starts = random_starts(inst, 20, 99);
  for (const auto& w0 : starts) {
    const RunReport r = run_penalty(inst, w0, method, p);
    expect_report_contract(inst, r, p);
    if (std::abs(r.final_value - *inst.f_star) <= 1e-3) ++hits;
  }
  EXPECT_GE(hits, 18) << name << " " << to_string(method);
}

INSTANTIATE_TEST_SUITE_P(
    SmallInstances, RunPenaltyOnInstance,
    ::testing::Combine(::testing::Values("ex1", "ex2"),
                       ::testing::Values(Method::PBDC, Method::PDC, Method::PDG)),
    [](const auto& info) {
      return std::get<0>(info.param) + "_" + to_string(std::get<1>(info.param));
    });

TEST(RunPenalty, PolishCanBeDisabled) {
  const auto inst = builtin::quadratic_ex2();
  PenaltyParams p;
  p.polish.enabled = false;
  const auto w0 = random_starts(inst, 1, 5).front();
  const RunReport r = run_penalty(inst, w0, Method::PBDC, p);
  EXPECT_EQ(r.polish_iters, 0u);
  EXPECT_TRUE(r.terminated);
}

TEST(RunPenalty, OuterCapEndsUnterminated) {
  const auto inst = builtin::inverse_transportation();
  PenaltyParams p;
  p.outer_cap = 2;
  const auto w0 = random_starts(inst, 1, 5).front();
  const RunReport r = run_penalty(inst, w0, Method::PBDC, p);
  EXPECT_FALSE(r.terminated);
  EXPECT_EQ(r.outer_iters, 2u);
  expect_report_contract(inst, r, p);
}

TEST(RunPenalty, KeepTraceStoresEveryInnerStep) {
  const auto inst = builtin::linear_ex1();
  PenaltyParams p;
  p.keep_trace = true;
  const auto w0 = random_starts(inst, 1, 8).front();
  const RunReport r = run_penalty(inst, w0, Method::PDC, p);
  ASSERT_EQ(r.traces.size(), r.outer_iters);
  for (std::size_t k = 0; k < r.traces.size(); ++k) EXPECT_EQ(r.traces[k].size(), r.inner_counts[k]);
}
