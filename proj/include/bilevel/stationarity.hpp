#pragma once

// Certification of the bilevel stationarity system at a point (x, y):
//
//   0 = grad_x f + A'(λ - ν) + C'μ
//   0 = grad_y f + B'(λ - ν) + D'μ
//   0 = B'ν + σ c
//
// with λ, ν supported on the active lower-level rows, μ on the active
// upper-level rows, and λ, ν, μ, σ >= 0. Here ν stands for σλ', which turns
// the system into one LP; its attained minimum of the l1 norm of the first
// two blocks is the residual.

#include "bilevel/instance.hpp"

namespace bilevel {

struct StationarityCertificate {
  double residual = 0.0;
  Vector lambda;  // p, zero off active_ll
  Vector nu;      // p, zero off active_ll; equals σλ'
  Vector mu;      // q, zero off active_ul
  double sigma = 0.0;
  IndexSet active_ll;
  IndexSet active_ul;
  bool degenerate = false;  // σ = 0 while ν != 0
  bool sigma_at_cap = false;
};

/// l1 norm of the two gradient blocks for the given multipliers.
inline double stationarity_gradient_l1(const BilevelInstance& inst, const Vector& w,
                                       const StationarityCertificate& cert) {
  const Vector eta = cert.lambda - cert.nu;
  Vector r = inst.objective.gradient(w);
  r.head(inst.n()) += inst.lower.A.transpose() * eta + inst.C.transpose() * cert.mu;
  r.tail(inst.m()) += inst.lower.B.transpose() * eta + inst.D.transpose() * cert.mu;
  return r.lpNorm<1>();
}

inline StationarityCertificate stationarity_residual(const BilevelInstance& inst,
                                                     const Vector& x, const Vector& y,
                                                     double tol_active = 1e-6,
                                                     double sigma_cap = 1e6) {
  const Vector w = inst.stack(x, y);
  const AffineSystem Z = inst.feasible_set();
  if (Z.violation(w) > tol_active)
    throw InfeasiblePoint("stationarity_residual: point is not in Z_u ∩ Z_l");

  StationarityCertificate cert;
  const Vector slack_ll = inst.lower.b - inst.lower.A * x - inst.lower.B * y;
  const Vector slack_ul = inst.d - inst.C * x - inst.D * y;
  for (Eigen::Index i = 0; i < slack_ll.size(); ++i)
    if (slack_ll(i) <= tol_active) cert.active_ll.push_back(static_cast<std::size_t>(i));
  for (Eigen::Index k = 0; k < slack_ul.size(); ++k)
    if (slack_ul(k) <= tol_active) cert.active_ul.push_back(static_cast<std::size_t>(k));

  const Eigen::Index N = inst.dim();
  const Eigen::Index m = inst.m();
  const auto al = static_cast<Eigen::Index>(cert.active_ll.size());
  const auto au = static_cast<Eigen::Index>(cert.active_ul.size());
  // Variable layout: λ_A | ν_A | μ_A | σ | s+ | s-
  const Eigen::Index off_nu = al, off_mu = 2 * al, off_sigma = 2 * al + au;
  const Eigen::Index off_sp = off_sigma + 1, off_sm = off_sp + N;
  const Eigen::Index nv = off_sm + N;

  Matrix Meq = Matrix::Zero(N + m, nv);
  Vector geq = Vector::Zero(N + m);
  geq.head(N) = -inst.objective.gradient(w);
  for (Eigen::Index a = 0; a < al; ++a) {
    const auto i = static_cast<Eigen::Index>(cert.active_ll[a]);
    Vector row(N);
    row << inst.lower.A.row(i).transpose(), inst.lower.B.row(i).transpose();
    Meq.block(0, a, N, 1) = row;
    Meq.block(0, off_nu + a, N, 1) = -row;
    Meq.block(N, off_nu + a, m, 1) = inst.lower.B.row(i).transpose();
  }
  for (Eigen::Index a = 0; a < au; ++a) {
    const auto k = static_cast<Eigen::Index>(cert.active_ul[a]);
    Vector row(N);
    row << inst.C.row(k).transpose(), inst.D.row(k).transpose();
    Meq.block(0, off_mu + a, N, 1) = row;
  }
  Meq.block(N, off_sigma, m, 1) = inst.lower.c;
  Meq.block(0, off_sp, N, N) = Matrix::Identity(N, N);
  Meq.block(0, off_sm, N, N) = -Matrix::Identity(N, N);

  Matrix Mub = Matrix::Zero(nv + 1, nv);
  Mub.topRows(nv) = -Matrix::Identity(nv, nv);
  Mub(nv, off_sigma) = 1.0;
  Vector gub = Vector::Zero(nv + 1);
  gub(nv) = sigma_cap;

  Vector cost = Vector::Zero(nv);
  cost.tail(2 * N).setOnes();

  const LPSolution s = solve_lp(cost, AffineSystem(Mub, gub, Meq, geq));
  if (s.status != LpStatus::Optimal)
    throw NumericDegeneracy("stationarity_residual: residual LP not solved");

  cert.lambda = Vector::Zero(inst.p());
  cert.nu = Vector::Zero(inst.p());
  cert.mu = Vector::Zero(inst.q());
  for (Eigen::Index a = 0; a < al; ++a) {
    cert.lambda(static_cast<Eigen::Index>(cert.active_ll[a])) = std::max(s.x(a), 0.0);
    cert.nu(static_cast<Eigen::Index>(cert.active_ll[a])) = std::max(s.x(off_nu + a), 0.0);
  }
  for (Eigen::Index a = 0; a < au; ++a)
    cert.mu(static_cast<Eigen::Index>(cert.active_ul[a])) = std::max(s.x(off_mu + a), 0.0);
  cert.sigma = std::max(s.x(off_sigma), 0.0);
  cert.residual = std::max(s.objective, 0.0);
  cert.degenerate = cert.sigma <= 1e-12 && cert.nu.size() > 0 &&
                    cert.nu.cwiseAbs().maxCoeff() > 1e-12;
  cert.sigma_at_cap = cert.sigma >= sigma_cap * (1.0 - 1e-12);
  return cert;
}

}  // namespace bilevel
