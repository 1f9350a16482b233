#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mlvat/error.hpp"
#include "mlvat/vat.hpp"
#include "oracles.hpp"

using namespace mlvat;

namespace {

constexpr Divergence kAll[] = {Divergence::MseSigmoid, Divergence::MseLogits, Divergence::KlPerLabel};

Mat64 row(std::initializer_list<double> v) {
  Mat64 m(1, v.size());
  std::copy(v.begin(), v.end(), m.values.begin());
  return m;
}

// Divergence of the head at x + r against the head at x.
double divergence_at(const MlpParams& p, const Mat64& x, std::span<const double> r, Divergence d) {
  Mat64 xr = x;
  for (std::size_t j = 0; j < r.size(); ++j) xr.values[j] += r[j];
  return divergence(d, predict_logits(p, x), predict_logits(p, xr));
}

}  // namespace

TEST(Divergence, ZeroAtReference) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const Mat64 a = oracle::random_mat(rng, 3, 11, 20.0);
    for (auto d : kAll) EXPECT_EQ(divergence(d, a, a), 0.0);
  }
}

TEST(Divergence, Examples) {
  EXPECT_NEAR(divergence(Divergence::MseSigmoid, row({0}), row({1000})), 0.25, 1e-12);
  EXPECT_EQ(divergence(Divergence::KlPerLabel, row({0}), row({0})), 0.0);
  // sigma(pert) = 0.75 at pert = ln 3.
  const double hand = 0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25);
  EXPECT_NEAR(hand, 0.143841, 1e-6);
  EXPECT_NEAR(divergence(Divergence::KlPerLabel, row({0}), row({std::log(3.0)})), hand, 1e-15);
  EXPECT_DOUBLE_EQ(divergence(Divergence::MseLogits, row({1, 2}), row({3, 2})), 2.0);
  EXPECT_THROW(divergence(Divergence::MseLogits, row({1}), row({1, 2})), Error);
}

TEST(Divergence, NonNegativeAndFiniteAtExtremes) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const Mat64 a = oracle::random_mat(rng, 2, 5, 50.0), b = oracle::random_mat(rng, 2, 5, 50.0);
    for (auto d : kAll) {
      const double v = divergence(d, a, b);
      EXPECT_GE(v, 0.0);
      EXPECT_TRUE(std::isfinite(v));
    }
  }
  EXPECT_TRUE(std::isfinite(divergence(Divergence::KlPerLabel, row({800}), row({-800}))));
}

TEST(Divergence, GradMatchesFiniteDifferences) {
  Rng rng(3);
  for (auto d : kAll) {
    const Mat64 a = oracle::random_mat(rng, 2, 4, 3.0), b = oracle::random_mat(rng, 2, 4, 3.0);
    const Mat64 g = divergence_grad(d, a, b);
    const auto fd = oracle::fd_input_grad([&](const Mat64& bb) { return divergence(d, a, bb); }, b);
    EXPECT_LT(oracle::max_rel_err(g.values, fd), 1e-6) << divergence_name(d);
  }
}

TEST(Divergence, ParseNames) {
  for (auto d : kAll) EXPECT_EQ(parse_divergence(divergence_name(d)), d);
  EXPECT_THROW(parse_divergence("kl"), Error);
}

TEST(VatConfig, Validation) {
  VatConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epsilon = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.alpha = -1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.power_iters = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(RVadv, NormIsEpsilon) {
  Rng meta(4);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d_in = 1 + meta.below(20);
    const MlpParams p = oracle::random_params(meta, d_in, 1 + meta.below(10), 1 + meta.below(6));
    Vec64 x(d_in);
    for (double& v : x) v = meta.normal();
    VatConfig cfg;
    cfg.epsilon = meta.uniform(0.01, 2.0);
    cfg.divergence = kAll[t % 3];
    cfg.power_iters = 1 + meta.below(3);
    Rng rng(meta.next_u64());
    EXPECT_NEAR(l2_norm(compute_r_vadv(p, x, cfg, rng)), cfg.epsilon, 1e-9);
  }
}

TEST(RVadv, FlatHeadRaisesZeroNorm) {
  const MlpParams p = MlpParams::zeros(3, 4, 2);
  Rng rng(1);
  try {
    compute_r_vadv(p, Vec64{1, 2, 3}, VatConfig{}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroNorm);
  }
}

TEST(RVadv, DeterministicPerSeed) {
  Rng meta(5);
  const MlpParams p = oracle::random_params(meta, 6, 5, 3);
  const Vec64 x{0.1, -0.2, 0.3, 0.4, -0.5, 0.6};
  Rng a(9), b(9), c(10);
  const Vec64 ra = compute_r_vadv(p, x, VatConfig{}, a);
  EXPECT_EQ(ra, compute_r_vadv(p, x, VatConfig{}, b));
  EXPECT_NE(ra, compute_r_vadv(p, x, VatConfig{}, c));
}

TEST(RVadv, ToyDirectionMatchesGridSearch) {
  // One hidden unit, input 2-d, reference point at the tanh origin: the
  // divergence on the eps-circle depends only on |w1 . r|, so the grid has
  // two antipodal maximisers and either one is correct.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    MlpParams p = MlpParams::zeros(2, 1, 3);
    p.w1(0, 0) = rng.uniform(-2, 2);
    p.w1(1, 0) = rng.uniform(-2, 2);
    for (std::size_t k = 0; k < 3; ++k) p.w2(0, k) = rng.uniform(-2, 2);
    Mat64 x(1, 2);  // w1 . x + b1 == 0
    const VatConfig cfg{0.1, 1.0, kAll[seed % 3], 1};

    double best = -1.0, best_theta = 0.0;
    for (int i = 0; i < 3600; ++i) {
      const double th = 2.0 * std::numbers::pi * i / 3600.0;
      const double r[2] = {cfg.epsilon * std::cos(th), cfg.epsilon * std::sin(th)};
      const double v = divergence_at(p, x, r, cfg.divergence);
      if (v > best) {
        best = v;
        best_theta = th;
      }
    }
    Rng vr(seed * 31);
    const Vec64 r = compute_r_vadv(p, x.values, cfg, vr);
    const double cosine = (r[0] * std::cos(best_theta) + r[1] * std::sin(best_theta)) / cfg.epsilon;
    EXPECT_GE(std::abs(cosine), 0.999) << "seed " << seed;
    EXPECT_GE(divergence_at(p, x, r, cfg.divergence), best * (1 - 1e-9));
  }
}

TEST(RVadv, PowerIterationsFindGridMaximumOnGenericToy) {
  // Two hidden units, small radius: the divergence is close to a quadratic
  // form on the circle and repeated gradient steps converge to its top axis.
  Rng rng(17);
  MlpParams p = oracle::random_params(rng, 2, 2, 2);
  Mat64 x(1, 2);
  x(0, 0) = 0.2;
  x(0, 1) = -0.1;
  const VatConfig cfg{1e-3, 1.0, Divergence::MseLogits, 30};
  double best = -1.0;
  for (int i = 0; i < 3600; ++i) {
    const double th = 2.0 * std::numbers::pi * i / 3600.0;
    const double r[2] = {cfg.epsilon * std::cos(th), cfg.epsilon * std::sin(th)};
    best = std::max(best, divergence_at(p, x, r, cfg.divergence));
  }
  Rng vr(3);
  const Vec64 r = compute_r_vadv(p, x.values, cfg, vr);
  EXPECT_GE(divergence_at(p, x, r, cfg.divergence), best * (1 - 1e-6));
}

TEST(VadvLoss, TinyEpsilonGivesTinyLoss) {
  Rng rng(6);
  const MlpParams p = oracle::random_params(rng, 5, 6, 4);
  const Mat64 x = oracle::random_mat(rng, 4, 5);
  VatConfig cfg;
  cfg.epsilon = 1e-8;
  for (auto d : kAll) {
    cfg.divergence = d;
    Rng r(1);
    const double loss = vadv_loss(p, x, cfg, r).loss;
    EXPECT_LT(loss, 1e-10);
    EXPECT_GE(loss, 0.0);
  }
}

TEST(VadvLoss, ParamGradsMatchFiniteDifferencesWithFrozenPerturbation) {
  for (auto d : kAll) {
    Rng rng(7);
    const MlpParams p = oracle::random_params(rng, 5, 6, 4);
    const Mat64 x = oracle::random_mat(rng, 3, 5);
    VatConfig cfg;
    cfg.divergence = d;
    Rng r(2);
    const Perturbations pert = compute_perturbations(p, x, cfg, r);
    const Mat64 ref = predict_logits(p, x);
    const LossAndGrads lg = vadv_loss_at(p, x, pert, ref, d);
    const auto fd = oracle::fd_param_grad(
        [&](const MlpParams& q) { return vadv_loss_at(q, x, pert, ref, d).loss; }, p);
    EXPECT_LT(oracle::max_rel_err(oracle::flatten(lg.grads), fd), 1e-6) << divergence_name(d);
  }
}

TEST(VadvLoss, ReferenceBranchCarriesNoGradient) {
  // Recomputing the reference from a different (but equal-valued) path must
  // not change the gradients.
  Rng rng(8);
  const MlpParams p = oracle::random_params(rng, 4, 5, 3);
  const Mat64 x = oracle::random_mat(rng, 5, 4);
  Rng r1(3), r2(3);
  const Perturbations pa = compute_perturbations(p, x, VatConfig{}, r1);
  const LossAndGrads cached = vadv_loss_at(p, x, pa, predict_logits(p, x), Divergence::MseSigmoid);
  Rng unused(0);
  const Mat64 recomputed = forward(p, x, Mode::Eval, 0.0, unused).logits;
  const LossAndGrads fresh = vadv_loss_at(p, x, pa, recomputed, Divergence::MseSigmoid);
  EXPECT_EQ(oracle::flatten(cached.grads), oracle::flatten(fresh.grads));
  const LossAndGrads full = vadv_loss(p, x, VatConfig{}, r2);
  EXPECT_EQ(oracle::flatten(cached.grads), oracle::flatten(full.grads));
  EXPECT_EQ(cached.loss, full.loss);
}

TEST(VadvLoss, ZeroNormRowsContributeZero) {
  const MlpParams p = MlpParams::zeros(3, 2, 2);
  Rng rng(1);
  const Mat64 x(4, 3, 0.5);
  const LossAndGrads lg = vadv_loss(p, x, VatConfig{}, rng);
  EXPECT_EQ(lg.loss, 0.0);
  for (double v : oracle::flatten(lg.grads)) EXPECT_EQ(v, 0.0);
}

TEST(VadvLoss, EmptyBatchThrows) {
  const MlpParams p = MlpParams::zeros(3, 2, 2);
  Rng rng(1);
  EXPECT_THROW(vadv_loss(p, Mat64(0, 3), VatConfig{}, rng), Error);
}

TEST(VadvLoss, NondecreasingInEpsilonOnAverage) {
  Rng rng(9);
  const MlpParams p = oracle::random_params(rng, 6, 8, 4);
  const Mat64 x = oracle::random_mat(rng, 6, 6);
  double previous = 0.0;
  for (double eps : {0.1, 0.25, 0.5, 0.75, 1.0}) {
    double mean = 0.0;
    for (std::uint64_t s = 1; s <= 50; ++s) {
      Rng r(s);
      VatConfig cfg;
      cfg.epsilon = eps;
      mean += vadv_loss(p, x, cfg, r).loss / 50.0;
    }
    EXPECT_GE(mean, previous) << "eps " << eps;
    previous = mean;
  }
}

TEST(MlvatLoss, AlphaZeroEqualsSupervised) {
  Rng rng(10);
  const MlpParams p = oracle::random_params(rng, 5, 6, 3);
  const Mat64 x = oracle::random_mat(rng, 4, 5);
  Mat64 y(4, 3);
  for (double& v : y.values) v = rng.uniform() < 0.5 ? 0 : 1;
  const Mat64 u = oracle::random_mat(rng, 7, 5);
  VatConfig cfg;
  cfg.alpha = 0.0;
  Rng r1(4), r2(4);
  const MlvatLoss m = mlvat_loss(p, x, y, u, cfg, 0.1, r1);
  const LossAndGrads s = supervised_loss(p, x, y, 0.1, r2);
  EXPECT_EQ(m.total, s.loss);
  EXPECT_EQ(oracle::flatten(m.grads), oracle::flatten(s.grads));
  EXPECT_EQ(r1, r2);

  Rng r3(5);
  const MlvatLoss no_drop = mlvat_loss(p, x, y, Mat64(0, 5), cfg, 0.0, r3);
  Rng unused(0);
  EXPECT_EQ(no_drop.total, bce_with_logits(predict_logits(p, x).values, y.values));
}

TEST(MlvatLoss, LabelledEmptyIsAlphaTimesVadv) {
  Rng rng(11);
  const MlpParams p = oracle::random_params(rng, 5, 6, 3);
  const Mat64 u = oracle::random_mat(rng, 7, 5);
  VatConfig cfg;
  cfg.alpha = 2.5;
  Rng r1(6), r2(6);
  const MlvatLoss m = mlvat_loss(p, Mat64(0, 5), Mat64(0, 3), u, cfg, 0.1, r1);
  const LossAndGrads v = vadv_loss(p, u, cfg, r2);
  EXPECT_EQ(m.bce, 0.0);
  EXPECT_DOUBLE_EQ(m.total, 2.5 * v.loss);
}

TEST(MlvatLoss, BothEmptyThrows) {
  const MlpParams p = MlpParams::zeros(3, 2, 2);
  Rng rng(1);
  try {
    mlvat_loss(p, Mat64(0, 3), Mat64(0, 2), Mat64(0, 3), VatConfig{}, 0.1, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyBatch);
  }
}

TEST(MlvatLoss, GradsMatchFiniteDifferencesWithoutDropout) {
  Rng rng(12);
  const MlpParams p = oracle::random_params(rng, 4, 5, 3);
  const Mat64 x = oracle::random_mat(rng, 3, 4);
  Mat64 y(3, 3);
  for (double& v : y.values) v = rng.uniform() < 0.5 ? 0 : 1;
  const Mat64 u = oracle::random_mat(rng, 4, 4);
  const VatConfig cfg;
  // Freeze the perturbation found at p, then differentiate the total loss.
  const Mat64 pool = concat_rows(x, u);
  Rng r0(8);
  const Perturbations pert = compute_perturbations(p, pool, cfg, r0);
  const Mat64 ref = predict_logits(p, pool);
  auto total = [&](const MlpParams& q) {
    return bce_with_logits(predict_logits(q, x).values, y.values) +
           cfg.alpha * vadv_loss_at(q, pool, pert, ref, cfg.divergence).loss;
  };
  Rng r1(8);
  const MlvatLoss m = mlvat_loss(p, x, y, u, cfg, 0.0, r1);
  EXPECT_NEAR(m.total, total(p), 1e-14);
  EXPECT_LT(oracle::max_rel_err(oracle::flatten(m.grads), oracle::fd_param_grad(total, p)), 1e-6);
}
