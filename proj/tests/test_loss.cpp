#include <gdt/loss.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"

using namespace gdt;
using gdt::testing::central_difference;
using gdt::testing::random_vector;
using gdt::testing::random_vectors;
using gdt::testing::relative_error;

namespace {

std::vector<PairTarget> all_pairs_with_random_targets(Rng& rng, std::size_t n) {
  std::vector<PairTarget> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same = rng.coin();
      pairs.push_back({i, j, same ? PairLabel::Positive : PairLabel::Negative, same ? rng.uniform(-1, 1) : -1.0});
    }
  return pairs;
}

}  // namespace

TEST(Cosine, Examples) {
  EXPECT_EQ(cosine_similarity(Vector{1, 0}, Vector{1, 0}), 1.0);
  EXPECT_EQ(cosine_similarity(Vector{1, 0}, Vector{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Vector{1, 1}, Vector{-1, -1}), -1.0);
}

TEST(Cosine, ClampedAndScaleInvariant) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const Vector u = random_vector(rng, 5);
    Vector v = u;
    for (double& x : v) x *= 3.7;
    const double c = cosine_similarity(u, v);
    EXPECT_LE(c, 1.0);
    EXPECT_NEAR(c, 1.0, 1e-15);
  }
}

TEST(Cosine, DegenerateVectorIsAnError) {
  EXPECT_THROW(cosine_similarity(Vector{0, 0}, Vector{1, 0}), DegenerateVector);
  EXPECT_THROW(cosine_similarity(Vector{1, 0}, Vector{1e-13, 0}), DegenerateVector);
}

TEST(GdtTarget, Examples) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Vector a = random_vector(rng, 4), b = random_vector(rng, 4);
    EXPECT_EQ(gdt_target(a, b, true, 1.0), 1.0);
    EXPECT_EQ(gdt_target(a, b, false, rng.uniform()), -1.0);
  }
  // cos((1,0), (1/2, sqrt(3)/2)) = 1/2
  const Vector u{1.0, 0.0};
  const Vector v{0.5, std::sqrt(3.0) / 2.0};
  EXPECT_NEAR(gdt_target(u, v, true, 0.4), 0.7, 1e-15);
}

TEST(GdtTarget, RejectsLambdaOutsideUnitInterval) {
  EXPECT_THROW(gdt_target(Vector{1}, Vector{1}, true, -0.01), ConfigError);
  EXPECT_THROW(gdt_target(Vector{1}, Vector{1}, true, 1.5), ConfigError);
  EXPECT_THROW(gdt_target(Vector{1}, Vector{1}, false, NAN), ConfigError);
}

TEST(GdtTarget, EndpointsAndMonotoneInLambda) {
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    const Vector a = random_vector(rng, 6), b = random_vector(rng, 6);
    EXPECT_EQ(gdt_target(a, b, true, 0.0), cosine_similarity(a, b));
    EXPECT_EQ(gdt_target(a, b, true, 1.0), 1.0);
    double prev = -2.0;
    for (int k = 0; k <= 20; ++k) {
      const double cur = gdt_target(a, b, true, k / 20.0);
      EXPECT_GE(cur, prev);
      EXPECT_GE(cur, -1.0);
      EXPECT_LE(cur, 1.0);
      prev = cur;
    }
  }
}

TEST(GdtLoss, Examples) {
  const std::vector<Vector> ys{{1.0, 2.0}, {2.0, 4.0}};
  EXPECT_NEAR(gdt_loss(ys, {{0, 1, PairLabel::Positive, 1.0}}), 0.0, 1e-30);
  EXPECT_EQ(gdt_loss(ys, {{0, 1, PairLabel::Negative, -1.0}}), 2.0);
}

TEST(GdtLoss, MatchesDoubleLoopOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ys = random_vectors(rng, 4, 3);
    const auto pairs = all_pairs_with_random_targets(rng, 4);
    ASSERT_EQ(pairs.size(), 6u);
    double oracle = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        if (i >= j) continue;
        for (const PairTarget& p : pairs)
          if (p.i == i && p.j == j) oracle += 0.5 * std::pow(cosine_similarity(ys[i], ys[j]) - p.target, 2);
      }
    EXPECT_NEAR(gdt_loss(ys, pairs), oracle, 1e-12);
    EXPECT_GE(gdt_loss(ys, pairs), 0.0);
  }
}

TEST(GdtLoss, InvariantToPositiveRescaling) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto ys = random_vectors(rng, 6, 5);
    const auto pairs = all_pairs_with_random_targets(rng, 6);
    const double before = gdt_loss(ys, pairs);
    for (auto& y : ys) {
      const double s = rng.uniform(0.01, 100.0);
      for (double& v : y) v *= s;
    }
    EXPECT_NEAR(gdt_loss(ys, pairs), before, 1e-12);
  }
}

TEST(GdtLoss, DegenerateVectorNamesIndex) {
  const std::vector<Vector> ys{{1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}};
  try {
    gdt_loss(ys, {{0, 2, PairLabel::Negative, -1.0}});
    FAIL() << "expected DegenerateVector";
  } catch (const DegenerateVector& e) {
    EXPECT_EQ(e.index(), 2u);
  }
  EXPECT_THROW(gdt_loss_grad(ys, {{0, 1, PairLabel::Negative, -1.0}}), DegenerateVector);
}

TEST(GdtLoss, BadPairIndex) {
  const std::vector<Vector> ys{{1.0, 0.0}, {0.0, 1.0}};
  EXPECT_THROW(gdt_loss(ys, {{0, 2, PairLabel::Negative, -1.0}}), InvalidInput);
  EXPECT_THROW(gdt_loss(ys, {{1, 1, PairLabel::Negative, -1.0}}), InvalidInput);
}

TEST(GdtLossGrad, ZeroWhenEveryTargetIsMet) {
  Rng rng(6);
  const auto ys = random_vectors(rng, 5, 4);
  std::vector<PairTarget> pairs;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j)
      pairs.push_back({i, j, PairLabel::Positive, std::clamp(dot(ys[i], ys[j]) / (norm(ys[i]) * norm(ys[j])), -1.0, 1.0)});
  for (const Vector& g : gdt_loss_grad(ys, pairs))
    for (double v : g) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(GdtLossGrad, PairTermsAreOrthogonalToTheirVector) {
  Rng rng(12);
  for (int t = 0; t < 500; ++t) {
    const std::size_t d = 2 + rng.below(15);
    const Vector yi = random_vector(rng, d), yj = random_vector(rng, d);
    const PairGradient g = gdt_pair_gradient(yi, yj, rng.uniform(-1, 1));
    EXPECT_LT(std::abs(dot(yi, g.wrt_i)) / norm(yi), 1e-10);
    EXPECT_LT(std::abs(dot(yj, g.wrt_j)) / norm(yj), 1e-10);
  }
}

TEST(GdtLossGrad, EqualsSumOfPairTerms) {
  Rng rng(13);
  const auto ys = random_vectors(rng, 5, 6);
  const auto pairs = all_pairs_with_random_targets(rng, 5);
  std::vector<Vector> summed(5, Vector(6, 0.0));
  for (const PairTarget& p : pairs) {
    const PairGradient g = gdt_pair_gradient(ys[p.i], ys[p.j], p.target);
    axpy(1.0, g.wrt_i, summed[p.i]);
    axpy(1.0, g.wrt_j, summed[p.j]);
  }
  const auto grads = gdt_loss_grad(ys, pairs);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(grads[i][k], summed[i][k], 1e-12);
}

TEST(GdtLossGrad, MatchesFiniteDifferencesAcrossShapes) {
  Rng rng(31);
  for (std::size_t d : {2u, 7u, 16u}) {
    for (std::size_t n : {3u, 5u, 9u}) {
      auto ys = random_vectors(rng, n, d);
      const auto pairs = all_pairs_with_random_targets(rng, n);
      const auto grads = gdt_loss_grad(ys, pairs);
      const auto objective = [&] { return gdt_loss(ys, pairs); };
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k)
          EXPECT_LT(relative_error(grads[i][k], central_difference(ys[i][k], objective)), 1e-6)
              << "d=" << d << " n=" << n << " i=" << i << " k=" << k;
    }
  }
}

TEST(GdtLossAndGrad, ValueMatchesLoss) {
  Rng rng(14);
  const auto ys = random_vectors(rng, 7, 3);
  const auto pairs = all_pairs_with_random_targets(rng, 7);
  EXPECT_EQ(gdt_loss_and_grad(ys, pairs).value, gdt_loss(ys, pairs));
}

TEST(DmlLoss, Examples) {
  EXPECT_EQ(dml_loss(1.0, PairLabel::Positive, DmlVariant::Hinge), 0.0);
  EXPECT_EQ(dml_loss(0.0, PairLabel::Negative, DmlVariant::Hinge), 1.0);
  EXPECT_DOUBLE_EQ(dml_loss(1.0, PairLabel::Positive, DmlVariant::Smoothed), 0.6931471805599453);
  EXPECT_EQ(dml_loss(0.2, PairLabel::Positive, DmlVariant::Hinge), 0.0);
  EXPECT_DOUBLE_EQ(dml_loss(3.0, PairLabel::Positive, DmlVariant::Hinge), 2.0);
}

TEST(DmlLoss, NegativeDistanceIsInvalid) {
  EXPECT_THROW(dml_loss(-0.1, PairLabel::Positive, DmlVariant::Hinge), InvalidInput);
  EXPECT_THROW(dml_loss_derivative(-0.1, PairLabel::Negative, DmlVariant::Smoothed), InvalidInput);
}

TEST(DmlLoss, SmoothedStaysFiniteForLargeMargins) {
  EXPECT_DOUBLE_EQ(dml_loss(1000.0, PairLabel::Positive, DmlVariant::Smoothed), 999.0);
  EXPECT_GE(dml_loss(1000.0, PairLabel::Negative, DmlVariant::Smoothed), 0.0);
}

TEST(DmlLoss, DerivativeMatchesFiniteDifferences) {
  for (PairLabel l : {PairLabel::Positive, PairLabel::Negative})
    for (DmlVariant v : {DmlVariant::Hinge, DmlVariant::Smoothed})
      for (double d : {0.1, 0.5, 0.9, 1.3, 2.5}) {
        double dd = d;
        const double numeric = central_difference(dd, [&] { return dml_loss(dd, l, v); }, 1e-6);
        EXPECT_NEAR(dml_loss_derivative(d, l, v), numeric, 1e-8);
      }
  EXPECT_EQ(dml_loss_derivative(1.0, PairLabel::Positive, DmlVariant::Hinge), 0.0);
}

TEST(DmlLossGrad, MatchesFiniteDifferences) {
  Rng rng(40);
  for (DmlVariant v : {DmlVariant::Hinge, DmlVariant::Smoothed}) {
    auto ys = random_vectors(rng, 6, 4);
    const auto pairs = all_pairs_with_random_targets(rng, 6);
    const LossAndGradient lg = dml_loss_and_grad(ys, pairs, v);
    const auto objective = [&] { return dml_loss_and_grad(ys, pairs, v).value; };
    for (std::size_t i = 0; i < ys.size(); ++i)
      for (std::size_t k = 0; k < 4; ++k)
        EXPECT_LT(relative_error(lg.grads[i][k], central_difference(ys[i][k], objective)), 1e-6);
  }
}

TEST(LossConfig, PedagogicModesPinLambda) {
  EXPECT_EQ((LossConfig{0.3, LossMode::MetricLearning}.effective_lambda()), 1.0);
  EXPECT_EQ((LossConfig{0.3, LossMode::Classification}.effective_lambda()), 0.0);
  EXPECT_EQ((LossConfig{0.3, LossMode::Gdt}.effective_lambda()), 0.3);
  EXPECT_EQ(parse_loss_mode("smoothed-dml"), LossMode::SmoothedDml);
  EXPECT_THROW(parse_loss_mode("softmax"), ConfigError);
}
