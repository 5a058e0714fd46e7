#include <cmath>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "ptloc.hpp"

using namespace ptloc;

namespace {

WeightedPointSet from_cols(std::initializer_list<Vec> cols) {
  Mat m(cols.begin()->size(), static_cast<Eigen::Index>(cols.size()));
  Eigen::Index j = 0;
  for (const auto& c : cols) m.col(j++) = c.normalized();
  return WeightedPointSet::uniform(m);
}

Vec e(Eigen::Index d, Eigen::Index i) { return Vec::Unit(d, i); }

WeightedPointSet random_pair(Rng& rng, Eigen::Index d, Eigen::Index n) {
  Mat m(d, n);
  for (Eigen::Index i = 0; i < n; ++i) m.col(i) = rng.unit_vec(d);
  return WeightedPointSet::uniform(m);
}

}  // namespace

TEST(Isotropy, HandBuiltFeasibility) {
  EXPECT_TRUE(exact_isotropic_feasible(from_cols({e(2, 0), e(2, 1)})));
  EXPECT_FALSE(exact_isotropic_feasible(from_cols({e(2, 0), e(2, 0), e(2, 1)})));
  // mass exactly k/d on a line, rest on a complementary line
  EXPECT_TRUE(exact_isotropic_feasible(from_cols({e(3, 0), e(3, 1), e(3, 2)})));
  // span(e2,e3) holds mass 2/3 and the rest is one line
  EXPECT_TRUE(exact_isotropic_feasible(from_cols({e(3, 0), e(3, 1), e(3, 1) + e(3, 2)})));
  // two points on span(e1) out of four in R^2: mass 1/2 = k/d, rest must lie on one line
  Vec a(2), b(2);
  a << 1, 1;
  b << 1, -1;
  EXPECT_TRUE(exact_isotropic_feasible(from_cols({e(2, 0), e(2, 0), a, a})));
  EXPECT_FALSE(exact_isotropic_feasible(from_cols({e(2, 0), e(2, 0), a, b})));
}

TEST(Isotropy, HeavyWitnessForRepeatedPoint) {
  auto pair = from_cols({e(2, 0), e(2, 0), e(2, 1)});
  auto w = heavy_subspace_witness(pair, true);
  ASSERT_TRUE(w.has_value());
  EXPECT_EQ(w->k(), 1);
  EXPECT_NEAR(w->mass, 2.0 / 3.0, 1e-12);
  EXPECT_FALSE(heavy_subspace_witness(from_cols({e(2, 0), e(2, 1)}), true).has_value());
  // non-strict mode reports the tight subspaces of {e1,e2}
  EXPECT_TRUE(heavy_subspace_witness(from_cols({e(2, 0), e(2, 1)}), false).has_value());
}

TEST(Isotropy, BruteForceCapEnforced) {
  Rng rng(1);
  auto big = random_pair(rng, 3, kBruteForceMaxPoints + 1);
  EXPECT_THROW(heavy_subspace_witness(big, true), SizeLimitExceeded);
  EXPECT_THROW(exact_isotropic_feasible(big), SizeLimitExceeded);
}

TEST(Isotropy, WeightedSpectrumMatchesDenseEigensolver) {
  Rng rng(2);
  for (int t = 0; t < 30; ++t) {
    auto pair = random_pair(rng, 1 + static_cast<Eigen::Index>(rng.index(7)), 3 + static_cast<Eigen::Index>(rng.index(40)));
    Eigen::SelfAdjointEigenSolver<Mat> es(covariance(pair));
    SymEigen s = weighted_spectrum(pair);
    for (Eigen::Index i = 0; i < s.values.size(); ++i) EXPECT_NEAR(s.values(i), es.eigenvalues()(i), 1e-12);
    Mat rebuilt = s.vectors * s.values.asDiagonal() * s.vectors.transpose();
    EXPECT_LT((rebuilt - covariance(pair)).norm(), 1e-12);
  }
}

TEST(Isotropy, ResidualOfOrthonormalBasisIsZero) {
  auto pair = from_cols({e(3, 0), e(3, 1), e(3, 2)});
  EXPECT_TRUE(is_eps_isotropic(pair, 1e-12));
  EXPECT_FALSE(is_eps_isotropic(from_cols({e(2, 0), e(2, 0), e(2, 1)}), 0.25));
}

TEST(Forster, RandomInstancesBecomeIsotropic) {
  Rng rng(3);
  for (int t = 0; t < 40; ++t) {
    Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(10));
    auto pair = random_pair(rng, d, 3 * d + static_cast<Eigen::Index>(rng.index(50)));
    ForsterResult r = forster_transform(pair, 0.25);
    ASSERT_TRUE(std::holds_alternative<IsotropicTransform>(r)) << "d=" << d;
    const auto& tr = std::get<IsotropicTransform>(r);
    Mat y(d, pair.size());
    for (Eigen::Index i = 0; i < pair.size(); ++i) y.col(i) = tr.apply(pair.point(i));
    EXPECT_TRUE(is_eps_isotropic(WeightedPointSet(y, pair.weights()), 0.25));
  }
}

TEST(Forster, SkewedButFeasibleInstance) {
  // most mass near e1 but in general position: feasible, needs many iterations
  Rng rng(4);
  Mat m(3, 30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    Vec v = e(3, 0) + 0.05 * rng.normal_vec(3);
    m.col(i) = v.normalized();
  }
  ForsterResult r = forster_transform(WeightedPointSet::uniform(m), 0.25);
  EXPECT_TRUE(std::holds_alternative<IsotropicTransform>(r));
}

TEST(Forster, RepeatedPointReportsVerifiedHeavySubspace) {
  auto pair = from_cols({e(2, 0), e(2, 0), e(2, 1)});
  ForsterResult r = forster_transform(pair, 0.25);
  ASSERT_TRUE(std::holds_alternative<HeavySubspaceDetected>(r));
  const auto& h = std::get<HeavySubspaceDetected>(r);
  EXPECT_TRUE(h.verified);
  EXPECT_EQ(h.witness.k(), 1);
  EXPECT_NEAR(std::abs(h.witness.basis(0, 0)), 1.0, 1e-9);
}

TEST(Forster, RankDeficientInputReturnsSpan) {
  auto pair = from_cols({e(3, 0), e(3, 1), e(3, 0) + e(3, 1)});
  ForsterResult r = forster_transform(pair, 0.25);
  ASSERT_TRUE(std::holds_alternative<HeavySubspaceDetected>(r));
  EXPECT_EQ(std::get<HeavySubspaceDetected>(r).witness.k(), 2);
  EXPECT_TRUE(std::get<HeavySubspaceDetected>(r).verified);
}

// Components of size 1e-9 outside a hyperplane are real directions, not noise.
TEST(Forster, NearDegenerateInstanceStillScales) {
  Rng rng(5);
  const Eigen::Index d = 6;
  Mat m(d, 60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    Vec v = rng.unit_vec(d);
    v(0) = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(1e-9, 2e-9);
    m.col(i) = v.normalized();
  }
  ForsterResult r = forster_transform(WeightedPointSet::uniform(m), 0.25);
  EXPECT_TRUE(std::holds_alternative<IsotropicTransform>(r));
}

TEST(DenseSubspace, RecursesIntoHeavySubspace) {
  // {e1, e1, e2} in R^2 plus nothing else: dense subspace is span(e1)
  auto pair = from_cols({e(2, 0), e(2, 0), e(2, 1)});
  DenseSubspace ds = dense_isotropic_subspace(pair, 0.25);
  EXPECT_TRUE(ds.isotropic);
  EXPECT_EQ(ds.subspace.k(), 1);
  EXPECT_EQ(ds.subspace.member_indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_NEAR(ds.subspace.mass, 2.0 / 3.0, 1e-12);
}

TEST(DenseSubspace, MassAtLeastDimensionShare) {
  Rng rng(6);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index d = 4;
    Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.index(3));
    Mat basis = Eigen::HouseholderQR<Mat>(rng.normal_vec(d * k).reshaped(d, k)).householderQ() * Mat::Identity(d, k);
    Mat m(d, 40);
    for (Eigen::Index i = 0; i < 40; ++i)
      m.col(i) = i < 30 ? Vec((basis * rng.unit_vec(k)).normalized()) : rng.unit_vec(d);
    auto pair = WeightedPointSet::uniform(m);
    DenseSubspace ds = dense_isotropic_subspace(pair, 0.25);
    ASSERT_TRUE(ds.isotropic);
    EXPECT_GE(ds.subspace.mass + 1e-12, static_cast<double>(ds.subspace.k()) / static_cast<double>(d));
    // restricted, transformed members are 1/4-isotropic
    Mat y(ds.transform.k(), static_cast<Eigen::Index>(ds.subspace.member_indices.size()));
    for (std::size_t j = 0; j < ds.subspace.member_indices.size(); ++j)
      y.col(static_cast<Eigen::Index>(j)) = ds.transform.apply(pair.point(static_cast<Eigen::Index>(ds.subspace.member_indices[j])));
    EXPECT_TRUE(is_eps_isotropic(WeightedPointSet::uniform(y), 0.25));
  }
}

TEST(Forster, OneDimensionalIsIdentity) {
  Mat m(1, 3);
  m << 1, -1, 1;
  ForsterResult r = forster_transform(WeightedPointSet::uniform(m), 0.25);
  ASSERT_TRUE(std::holds_alternative<IsotropicTransform>(r));
  EXPECT_DOUBLE_EQ(std::get<IsotropicTransform>(r).map(0, 0), 1.0);
}
