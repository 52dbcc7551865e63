#pragma once

// Index sets and sequential (asymptotic) stationarity predicates for
//
//   min f(z)  s.t.  g(z) <= 0,  h(z) = 0,  0 <= G(z) ⊥ H(z) >= 0,
//
// with the complementarity pairs written as min(G_i, H_i) = 0. A candidate
// z̄ is checked against a finite prefix of a sequence (z^k, λ^k, ε^k).

#include "bilevel/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bilevel {

struct MpccIndexSets {
  IndexSet plus_zero;  // G > 0, H = 0
  IndexSet zero_plus;  // G = 0, H > 0
  IndexSet zero_zero;  // G = H = 0
};

inline MpccIndexSets mpcc_index_sets(const Vector& G, const Vector& H, double tol) {
  if (G.size() != H.size()) throw DimensionError("mpcc_index_sets: |G| != |H|");
  MpccIndexSets out;
  for (Eigen::Index i = 0; i < G.size(); ++i) {
    const double gi = G(i), hi = H(i);
    if (gi < -tol || hi < -tol || std::abs(std::min(gi, hi)) > tol)
      throw InfeasibleComplementarity("mpcc_index_sets: pair " + std::to_string(i) +
                                      " violates 0 <= G ⊥ H >= 0");
    const bool g0 = std::abs(gi) <= tol;
    const bool h0 = std::abs(hi) <= tol;
    const auto idx = static_cast<std::size_t>(i);
    if (g0 && h0)
      out.zero_zero.push_back(idx);
    else if (h0)
      out.plus_zero.push_back(idx);
    else
      out.zero_plus.push_back(idx);
  }
  return out;
}

struct MpccMultipliers {
  Vector g, h, G, H;
};

/// ∇f + Jg'λ^g + Jh'λ^h + JG'λ^G + JH'λ^H; Jacobians are row-per-constraint.
inline Vector mpcc_lagrangian_gradient(const Vector& grad_f, const Matrix& Jg,
                                       const Matrix& Jh, const Matrix& JG, const Matrix& JH,
                                       const MpccMultipliers& lam) {
  Vector r = grad_f;
  if (Jg.rows()) r += Jg.transpose() * lam.g;
  if (Jh.rows()) r += Jh.transpose() * lam.h;
  if (JG.rows()) r += JG.transpose() * lam.G;
  if (JH.rows()) r += JH.transpose() * lam.H;
  return r;
}

struct MpccSample {
  Vector point;
  MpccMultipliers lambda;
  Vector epsilon;                  // ε^k
  double gradient_residual = 0.0;  // |ε^k - ∇_z L(z^k, λ^k)|
  Vector G_at, H_at;               // G(z^k), H(z^k); empty selects the weak I^00 test
};

enum class MpccMode { Clarke, Limiting };

struct MpccVerdict {
  std::vector<bool> per_sample;
  bool limit = false;
};

struct MpccCheckOptions {
  double tol = 1e-10;        // sign/complementarity and gradient identity
  double tol_limit = 1e-6;   // |ε^k| at the end of the sequence
};

/// `g_bar` holds g(z̄). On I^00 the test follows the order of G(z^k) and
/// H(z^k) when a sample carries them: G < H forces λ^H = 0, G > H forces
/// λ^G = 0, and a tie requires λ^G λ^H >= 0 (Clarke) or both < 0 or product 0
/// (limiting). Without them only the tie condition is imposed.
inline MpccVerdict check_mpcc_astat(const std::vector<MpccSample>& samples,
                                    const Vector& g_bar, const MpccIndexSets& sets,
                                    MpccMode mode, const MpccCheckOptions& opts = {}) {
  MpccVerdict out;
  const double tol = opts.tol;
  bool all = true;
  for (const auto& s : samples) {
    bool ok = s.gradient_residual <= tol;
    for (Eigen::Index i = 0; ok && i < g_bar.size(); ++i)
      ok = std::abs(std::min(s.lambda.g(i), -g_bar(i))) <= tol;
    for (auto i : sets.plus_zero)
      ok = ok && std::abs(s.lambda.G(static_cast<Eigen::Index>(i))) <= tol;
    for (auto i : sets.zero_plus)
      ok = ok && std::abs(s.lambda.H(static_cast<Eigen::Index>(i))) <= tol;
    for (auto i : sets.zero_zero) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double a = s.lambda.G(ii);
      const double b = s.lambda.H(ii);
      if (s.G_at.size() && s.H_at.size() && std::abs(s.G_at(ii) - s.H_at(ii)) > tol) {
        ok = ok && std::abs(s.G_at(ii) < s.H_at(ii) ? b : a) <= tol;
        continue;
      }
      if (mode == MpccMode::Clarke)
        ok = ok && a * b >= -tol;
      else
        ok = ok && ((a < 0.0 && b < 0.0) || std::abs(a * b) <= tol);
    }
    out.per_sample.push_back(ok);
    all = all && ok;
  }
  if (!all || samples.empty()) return out;

  // ε^k must be nonincreasing over the second half and end below tol_limit.
  const std::size_t tail = samples.size() / 2;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = tail; k < samples.size(); ++k) {
    const double e = samples[k].epsilon.size() ? samples[k].epsilon.norm() : 0.0;
    if (e > prev + tol) return out;
    prev = e;
  }
  out.limit = prev <= opts.tol_limit;
  return out;
}

}  // namespace bilevel
