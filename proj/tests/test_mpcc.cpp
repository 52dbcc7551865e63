#include "bilevel/mpcc.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bilevel;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Feasible set {z in R^3 : -z1 <= 0, -z3 <= 0, min(G(z), H(z)) = 0} with
// G = z1^3 + z2 + z3, H = z1^3 - z2 + z3, objective f = -z1, z̄ = 0.
struct CubicExample {
  static Vector G(const Vector& z) { return vec({std::pow(z(0), 3) + z(1) + z(2)}); }
  static Vector H(const Vector& z) { return vec({std::pow(z(0), 3) - z(1) + z(2)}); }
  static Matrix JG(const Vector& z) { return Matrix{{3 * z(0) * z(0), 1, 1}}; }
  static Matrix JH(const Vector& z) { return Matrix{{3 * z(0) * z(0), -1, 1}}; }
  static Matrix Jg() { return Matrix{{-1, 0, 0}, {0, 0, -1}}; }

  /// z^k = ((3k/2)^(-1/2), 0, 0), λ^g = (1, k), λ^G = λ^H = k/2.
  static MpccSample sample(double k) {
    MpccSample s;
    s.point = vec({std::pow(1.5 * k, -0.5), 0, 0});
    s.lambda.g = vec({1, k});
    s.lambda.h = Vector();
    s.lambda.G = vec({k / 2});
    s.lambda.H = vec({k / 2});
    const Vector grad = mpcc_lagrangian_gradient(vec({-1, 0, 0}), Jg(), Matrix(0, 3),
                                                 JG(s.point), JH(s.point), s.lambda);
    s.epsilon = Vector::Zero(3);
    s.gradient_residual = (s.epsilon - grad).cwiseAbs().maxCoeff();
    s.G_at = G(s.point);
    s.H_at = H(s.point);
    return s;
  }
};

MpccSample zero_sample(int m) {
  MpccSample s;
  s.point = Vector::Zero(2);
  s.lambda.g = Vector::Zero(0);
  s.lambda.G = Vector::Zero(m);
  s.lambda.H = Vector::Zero(m);
  s.epsilon = Vector::Zero(2);
  return s;
}

}  // namespace

TEST(MpccIndexSets, Examples) {
  auto s = mpcc_index_sets(vec({1, 0, 0}), vec({0, 1, 0}), 1e-12);
  EXPECT_EQ(s.plus_zero, IndexSet{0});
  EXPECT_EQ(s.zero_plus, IndexSet{1});
  EXPECT_EQ(s.zero_zero, IndexSet{2});

  s = mpcc_index_sets(Vector::Zero(4), Vector::Zero(4), 0.0);
  EXPECT_EQ(s.zero_zero, (IndexSet{0, 1, 2, 3}));
  EXPECT_TRUE(s.plus_zero.empty() && s.zero_plus.empty());

  s = mpcc_index_sets(vec({1e-9, 2}), vec({3, 1e-9}), 1e-6);
  EXPECT_EQ(s.zero_plus, IndexSet{0});
  EXPECT_EQ(s.plus_zero, IndexSet{1});
}

TEST(MpccIndexSets, InfeasiblePairsThrow) {
  EXPECT_THROW(mpcc_index_sets(vec({1}), vec({1}), 1e-8), InfeasibleComplementarity);
  EXPECT_THROW(mpcc_index_sets(vec({-1}), vec({0}), 1e-8), InfeasibleComplementarity);
  EXPECT_THROW(mpcc_index_sets(vec({1}), vec({0, 0}), 1e-8), DimensionError);
}

TEST(MpccIndexSets, AlwaysAPartition) {
  std::mt19937_64 eng(3);
  for (int t = 0; t < 200; ++t) {
    const int m = 1 + static_cast<int>(eng() % 6);
    Vector G(m), H(m);
    for (int i = 0; i < m; ++i) {
      const auto kind = eng() % 3;
      const double v = 0.1 + static_cast<double>(eng() % 100) / 10.0;
      G(i) = kind == 0 ? v : 0.0;
      H(i) = kind == 1 ? v : 0.0;
    }
    const auto s = mpcc_index_sets(G, H, 1e-12);
    std::vector<int> seen(static_cast<std::size_t>(m), 0);
    for (const auto* set : {&s.plus_zero, &s.zero_plus, &s.zero_zero})
      for (auto i : *set) ++seen[i];
    for (int c : seen) EXPECT_EQ(c, 1);
  }
}

TEST(CheckMpccAstat, CubicSequenceIsClarkeButNotLimiting) {
  std::vector<MpccSample> samples;
  for (int k = 1; k <= 50; ++k) samples.push_back(CubicExample::sample(k));
  for (const auto& s : samples) {
    EXPECT_LE(s.gradient_residual, 1e-12);
    EXPECT_EQ(s.G_at(0), s.H_at(0));
  }
  const Vector zbar = Vector::Zero(3);
  const auto sets = mpcc_index_sets(CubicExample::G(zbar), CubicExample::H(zbar), 1e-12);
  ASSERT_EQ(sets.zero_zero, IndexSet{0});
  const Vector g_bar = vec({0, 0});

  const auto clarke = check_mpcc_astat(samples, g_bar, sets, MpccMode::Clarke);
  for (bool ok : clarke.per_sample) EXPECT_TRUE(ok);
  EXPECT_TRUE(clarke.limit);

  const auto limiting = check_mpcc_astat(samples, g_bar, sets, MpccMode::Limiting);
  for (bool ok : limiting.per_sample) EXPECT_FALSE(ok);
  EXPECT_FALSE(limiting.limit);
}

TEST(CheckMpccAstat, ZeroMultipliersPassBothModes) {
  const auto sets = mpcc_index_sets(Vector::Zero(2), Vector::Zero(2), 0.0);
  const std::vector<MpccSample> samples(5, zero_sample(2));
  for (auto mode : {MpccMode::Clarke, MpccMode::Limiting}) {
    const auto v = check_mpcc_astat(samples, Vector(), sets, mode);
    for (bool ok : v.per_sample) EXPECT_TRUE(ok);
    EXPECT_TRUE(v.limit);
  }
}

TEST(CheckMpccAstat, OppositeSignsOnBiactiveFailClarke) {
  const auto sets = mpcc_index_sets(Vector::Zero(1), Vector::Zero(1), 0.0);
  MpccSample s = zero_sample(1);
  s.lambda.G(0) = 1.0;
  s.lambda.H(0) = -1.0;
  const auto v = check_mpcc_astat({s}, Vector(), sets, MpccMode::Clarke);
  EXPECT_FALSE(v.per_sample[0]);
  EXPECT_FALSE(v.limit);
  // both negative passes the limiting test
  s.lambda.G(0) = -1.0;
  EXPECT_TRUE(check_mpcc_astat({s}, Vector(), sets, MpccMode::Limiting).per_sample[0]);
}

TEST(CheckMpccAstat, StrictOrderAtSampleForcesOneMultiplierToZero) {
  const auto sets = mpcc_index_sets(Vector::Zero(1), Vector::Zero(1), 0.0);
  MpccSample s = zero_sample(1);
  s.G_at = vec({0.1});
  s.H_at = vec({0.3});  // G < H: lambda^H must vanish
  s.lambda.G(0) = -5.0;
  EXPECT_TRUE(check_mpcc_astat({s}, Vector(), sets, MpccMode::Clarke).per_sample[0]);
  s.lambda.H(0) = 1.0;
  EXPECT_FALSE(check_mpcc_astat({s}, Vector(), sets, MpccMode::Clarke).per_sample[0]);
}

TEST(CheckMpccAstat, SlackInequalityNeedsZeroMultiplier) {
  const auto sets = mpcc_index_sets(Vector::Zero(1), Vector::Zero(1), 0.0);
  MpccSample s = zero_sample(1);
  s.lambda.g = vec({0.5});
  EXPECT_FALSE(check_mpcc_astat({s}, vec({-1.0}), sets, MpccMode::Clarke).per_sample[0]);
  EXPECT_TRUE(check_mpcc_astat({s}, vec({0.0}), sets, MpccMode::Clarke).per_sample[0]);
}

TEST(CheckMpccAstat, LimitNeedsVanishingEpsilon) {
  const auto sets = mpcc_index_sets(Vector::Zero(1), Vector::Zero(1), 0.0);
  std::vector<MpccSample> samples;
  for (int k = 1; k <= 10; ++k) {
    MpccSample s = zero_sample(1);
    s.epsilon = Vector::Constant(2, 1.0 / k);
    samples.push_back(s);
  }
  EXPECT_FALSE(check_mpcc_astat(samples, Vector(), sets, MpccMode::Clarke).limit);
  for (int k = 1; k <= 10; ++k) samples[static_cast<std::size_t>(k - 1)].epsilon *= std::pow(10.0, -k);
  EXPECT_TRUE(check_mpcc_astat(samples, Vector(), sets, MpccMode::Clarke).limit);
}
