#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mlvat/error.hpp"
#include "mlvat/numkit.hpp"

using namespace mlvat;

namespace {

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no mlvat::Error thrown";
  return Errc::Io;
}

}  // namespace

TEST(L2Normalize, Examples) {
  const Vec64 a = l2_normalize(Vec64{3, 4});
  EXPECT_DOUBLE_EQ(a[0], 0.6);
  EXPECT_DOUBLE_EQ(a[1], 0.8);
  EXPECT_EQ(l2_normalize(Vec64{1, 0, 0}), (Vec64{1, 0, 0}));
  EXPECT_EQ(code_of([] { l2_normalize(Vec64{0, 0}); }), Errc::ZeroNorm);
  EXPECT_EQ(code_of([] { l2_normalize(Vec64{1e-13, 0}); }), Errc::ZeroNorm);
}

TEST(L2Normalize, UnitNormAndScaleInvariance) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    Vec64 v(1 + rng.below(40));
    for (double& x : v) x = rng.normal() * std::pow(10.0, rng.uniform(-5, 5));
    const Vec64 u = l2_normalize(v);
    EXPECT_NEAR(l2_norm(u), 1.0, 1e-12);
    const double c = rng.uniform(0.01, 100.0);
    Vec64 cv = v;
    for (double& x : cv) x *= c;
    const Vec64 w = l2_normalize(cv);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(u[i], w[i], 1e-12);
  }
}

TEST(L2Norm, NoOverflowOnLargeEntries) {
  EXPECT_DOUBLE_EQ(l2_norm(Vec64{3e200, 4e200}), 5e200);
  EXPECT_NEAR(l2_norm(Vec64{3e-200, 4e-200}) / 5e-200, 1.0, 1e-15);
}

TEST(SampleUnitVector, NormAndDeterminism) {
  Rng a(7), b(7);
  const Vec64 u = sample_unit_vector(a, 768);
  EXPECT_NEAR(l2_norm(u), 1.0, 1e-12);
  EXPECT_EQ(u, sample_unit_vector(b, 768));
  Rng c(7), d(8);
  EXPECT_NE(sample_unit_vector(c, 3), sample_unit_vector(d, 3));
  EXPECT_EQ(code_of([] {
              Rng r(1);
              sample_unit_vector(r, 0);
            }),
            Errc::InvalidSpec);
}

TEST(SampleUnitVector, RoughlyIsotropic) {
  // Mean of many unit vectors in 3-d should approach the origin.
  Rng rng(5);
  Vec64 mean(3, 0.0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Vec64 u = sample_unit_vector(rng, 3);
    for (int j = 0; j < 3; ++j) mean[j] += u[j] / n;
  }
  // Each component has variance 1/3 per draw.
  for (double m : mean) EXPECT_LT(std::abs(m), 4.0 * std::sqrt(1.0 / 3.0 / n));
}

TEST(StableSigmoid, Examples) {
  EXPECT_EQ(stable_sigmoid(Vec64{0})[0], 0.5);
  EXPECT_NEAR(stable_sigmoid(Vec64{1000})[0], 1.0, 1e-12);
  EXPECT_NEAR(stable_sigmoid(Vec64{-1000})[0], 0.0, 1e-12);
  for (double z : {1e6, -1e6}) EXPECT_TRUE(std::isfinite(stable_sigmoid(Vec64{z})[0]));
}

TEST(StableSigmoid, Symmetry) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double z = rng.uniform(-60, 60);
    EXPECT_NEAR(sigmoid(z) + sigmoid(-z), 1.0, 1e-12);
  }
}

TEST(LogSigmoid, MatchesDirectFormulaInRange) {
  for (double z = -20; z <= 20; z += 0.37) EXPECT_NEAR(log_sigmoid(z), std::log(1.0 / (1.0 + std::exp(-z))), 1e-12);
  EXPECT_NEAR(log_sigmoid(-1000), -1000, 1e-9);
}

TEST(Bce, Examples) {
  EXPECT_NEAR(bce_with_logits(Vec64{0}, Vec64{1}), 0.693147, 1e-6);
  EXPECT_NEAR(bce_with_logits(Vec64{0, 0}, Vec64{0, 1}), 0.693147, 1e-6);
  EXPECT_LT(bce_with_logits(Vec64{30}, Vec64{1}), 1e-12);
  EXPECT_EQ(code_of([] { bce_with_logits(Vec64{0, 1}, Vec64{1}); }), Errc::LengthMismatch);
}

TEST(Bce, MatchesDirectFormulaForModerateLogits) {
  Rng rng(9);
  for (int t = 0; t < 500; ++t) {
    Vec64 z(11), y(11);
    double direct = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = rng.uniform(-10, 10);
      y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
      const double s = 1.0 / (1.0 + std::exp(-z[i]));
      direct += -(y[i] * std::log(s) + (1 - y[i]) * std::log(1 - s));
    }
    direct /= static_cast<double>(z.size());
    const double got = bce_with_logits(z, y);
    EXPECT_NEAR(got, direct, 1e-9);
    EXPECT_GE(got, 0.0);
  }
}

TEST(Mse, ExamplesAndSymmetry) {
  EXPECT_EQ(mse(Vec64{0.3, 0.7}, Vec64{0.3, 0.7}), 0.0);
  EXPECT_DOUBLE_EQ(mse(Vec64{1, 0}, Vec64{0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(mse(Vec64{0.5}, Vec64{0.0}), 0.25);
  EXPECT_EQ(code_of([] { mse(Vec64{1}, Vec64{1, 2}); }), Errc::LengthMismatch);
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    Vec64 p(5), q(5);
    for (auto& v : p) v = rng.normal();
    for (auto& v : q) v = rng.normal();
    EXPECT_EQ(mse(p, q), mse(q, p));
    EXPECT_GE(mse(p, q), 0.0);
    EXPECT_EQ(mse(p, p), 0.0);
  }
}

TEST(Rng, SequenceIsReproducible) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  EXPECT_EQ(a, b);
}

TEST(Rng, KnownPrefix) {
  // Pinned values: any change to the generator breaks reproducibility of
  // every recorded result, so it must be deliberate.
  Rng a(0);
  EXPECT_EQ(a.next_u64(), 0xe5fcf23cc62b8be0ull);
  EXPECT_EQ(a.next_u64(), 0x4c7dadcd7e98235aull);
  EXPECT_EQ(a.next_u64(), 0x8c51d6d8d49b4228ull);
  Rng b(42, 7);
  EXPECT_EQ(b.next_u64(), 0xa4ddcee98c6ed862ull);
}

TEST(Rng, SplitIsIndependentAndNonAdvancing) {
  Rng root(5);
  const Rng child1 = root.split(1);
  EXPECT_EQ(root.counter(), 0u);
  Rng c1 = child1;
  Rng c2 = root.split(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += c1.next_u64() == c2.next_u64();
  EXPECT_EQ(equal, 0);
  Rng again = root.split(1);
  Rng c1b = child1;
  EXPECT_EQ(again.next_u64(), c1b.next_u64());
}

TEST(Rng, UniformAndBelowRanges) {
  Rng rng(8);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const auto k = rng.below(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  // Chi-square with 6 dof; 99.9th percentile is about 22.5.
  double chi = 0.0;
  for (int c : counts) chi += (c - 10000.0) * (c - 10000.0) / 10000.0;
  EXPECT_LT(chi, 22.5);
}

TEST(Rng, NormalMoments) {
  Rng rng(12);
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Shuffle, PermutesAndIsSeeded) {
  std::vector<int> a(50), b;
  for (int i = 0; i < 50; ++i) a[i] = i;
  b = a;
  Rng r1(3), r2(3);
  shuffle(a, r1);
  shuffle(b, r2);
  EXPECT_EQ(a, b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(AllFinite, DetectsNanAndInf) {
  EXPECT_TRUE(all_finite(Vec64{1, 2}));
  EXPECT_FALSE(all_finite(Vec64{1, std::numeric_limits<double>::quiet_NaN()}));
  EXPECT_FALSE(all_finite(Vec64{std::numeric_limits<double>::infinity()}));
}
