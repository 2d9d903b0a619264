#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "semfuse/observation.hpp"

namespace semfuse {
namespace {

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t k) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> raw(k);
  for (double& v : raw) v = e(rng);
  const auto p = normalize(raw);
  return {p.begin(), p.end()};
}

McSampleSet random_samples(std::mt19937_64& rng, std::size_t m, std::size_t k) {
  McSampleSet s(k);
  for (std::size_t i = 0; i < m; ++i) s.add(random_simplex(rng, k));
  return s;
}

TEST(PredictiveMean, Examples) {
  McSampleSet same(2);
  for (int i = 0; i < 8; ++i) same.add(std::vector<double>{0.9, 0.1});
  const auto m = predictive_mean(same);
  EXPECT_NEAR(m[0], 0.9, 1e-15);
  EXPECT_NEAR(m[1], 0.1, 1e-15);

  const auto half = predictive_mean(McSampleSet(2, {{1.0, 0.0}, {0.0, 1.0}}));
  EXPECT_DOUBLE_EQ(half[0], 0.5);
  EXPECT_DOUBLE_EQ(half[1], 0.5);
}

TEST(PredictiveMean, MatchesExtendedPrecisionSum) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + trial % 9;
    const McSampleSet s = random_samples(rng, 32, k);
    const auto mean = predictive_mean(s);
    for (std::size_t i = 0; i < k; ++i) {
      long double acc = 0.0L;
      for (std::size_t j = 0; j < s.size(); ++j) acc += s.sample(j)[i];
      EXPECT_NEAR(mean[i], static_cast<double>(acc / 32.0L), 1e-12);
    }
    double total = 0.0;
    for (double v : mean) total += v;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(EpistemicVariance, Examples) {
  const FusionConfig cfg;
  McSampleSet same(3);
  for (int i = 0; i < 5; ++i) same.add(std::vector<double>{0.2, 0.3, 0.5});
  for (double v : epistemic_variance(same, cfg).values) EXPECT_DOUBLE_EQ(v, cfg.eps_var);

  const auto quarter = epistemic_variance(McSampleSet(2, {{1.0, 0.0}, {0.0, 1.0}}), cfg);
  EXPECT_DOUBLE_EQ(quarter.values[0], 0.25);
  EXPECT_DOUBLE_EQ(quarter.values[1], 0.25);
}

TEST(EpistemicVariance, MatchesTwoPassOracleBeforeClamping) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + trial % 5;
    const McSampleSet s = random_samples(rng, 8, k);
    const auto var = raw_epistemic_variance(s);
    for (std::size_t i = 0; i < k; ++i) {
      long double mean = 0.0L;
      for (std::size_t j = 0; j < 8; ++j) mean += s.sample(j)[i];
      mean /= 8.0L;
      long double ss = 0.0L;
      for (std::size_t j = 0; j < 8; ++j) ss += (s.sample(j)[i] - mean) * (s.sample(j)[i] - mean);
      EXPECT_NEAR(var[i], static_cast<double>(ss / 8.0L), 1e-12);
    }
  }
}

TEST(AleatoricEntropy, Examples) {
  EXPECT_DOUBLE_EQ(aleatoric_entropy(ClassProbabilityVector({1.0, 0.0})), 0.0);
  EXPECT_NEAR(aleatoric_entropy(ClassProbabilityVector::uniform(4)), std::log(4.0), 1e-12);
  EXPECT_NEAR(aleatoric_entropy(ClassProbabilityVector({0.7, 0.3})), 0.6109, 1e-4);
}

TEST(Regularize, Examples) {
  const ClassProbabilityVector p({0.01, 0.99});
  EXPECT_EQ(regularize(p, 0.0), p);
  const auto full = regularize(p, 1.0);
  EXPECT_DOUBLE_EQ(full[0], 0.5);
  EXPECT_DOUBLE_EQ(full[1], 0.5);
  const auto r = regularize(p, 0.3);
  EXPECT_NEAR(r[0], 0.157, 1e-12);
  EXPECT_NEAR(r[1], 0.843, 1e-12);
  EXPECT_THROW(regularize(p, 1.5), Error);
}

TEST(Regularize, BoundsAndArgmaxPreservation) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ub(0.0, 0.999);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + trial % 11;
    const ClassProbabilityVector p(random_simplex(rng, k));
    const double beta = ub(rng);
    const auto r = regularize(p, beta);
    for (double v : r) EXPECT_GE(v, beta / static_cast<double>(k) - 1e-15);
    EXPECT_EQ(argmax_class(r), argmax_class(p));
  }
}

TEST(Concentration, Examples) {
  const auto a = concentration({{0.25, std::exp(-2.0), 1e-6}});
  EXPECT_NEAR(a[0], std::log(4.0), 1e-12);
  EXPECT_NEAR(a[1], 2.0, 1e-12);
  EXPECT_NEAR(a[2], 13.8155, 1e-4);
}

TEST(Concentration, StrictlyDecreasing) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> lv(std::log(1e-6), std::log(0.25));
  for (int trial = 0; trial < 10000; ++trial) {
    double va = std::exp(lv(rng));
    double vb = std::exp(lv(rng));
    if (va == vb) continue;
    if (va > vb) std::swap(va, vb);
    const auto a = concentration({{va, vb}});
    EXPECT_GT(a[0], a[1]);
  }
}

TEST(BuildObservation, Examples) {
  FusionConfig cfg;
  cfg.beta = 0.3;
  McSampleSet same(2);
  for (int i = 0; i < 4; ++i) same.add(std::vector<double>{1.0, 0.0});
  const auto o = build_observation(same, cfg);
  EXPECT_NEAR(o.p_tilde[0], 0.85, 1e-12);
  EXPECT_NEAR(o.p_tilde[1], 0.15, 1e-12);
  EXPECT_NEAR(o.alpha[0], 13.8155, 1e-4);
  EXPECT_NEAR(o.alpha[1], 13.8155, 1e-4);

  cfg.beta = 0.0;
  const auto half = build_observation(McSampleSet(2, {{1.0, 0.0}, {0.0, 1.0}}), cfg);
  EXPECT_DOUBLE_EQ(half.p_tilde[0], 0.5);
  EXPECT_NEAR(half.alpha[0], std::log(4.0), 1e-12);
  EXPECT_NEAR(half.alpha[1], std::log(4.0), 1e-12);
}

TEST(BuildObservation, EqualsManualPipelineAndMomentPath) {
  std::mt19937_64 rng(17);
  FusionConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + trial % 7;
    const McSampleSet s = random_samples(rng, 1 + trial % 40, k);
    const auto o = build_observation(s, cfg);
    const auto p = regularize(predictive_mean(s), cfg.beta);
    const auto a = concentration(epistemic_variance(s, cfg));
    EXPECT_EQ(o.p_tilde, p);
    EXPECT_EQ(o.alpha, a);
    const auto from_moments = build_observation(predictive_mean(s), raw_epistemic_variance(s), cfg);
    EXPECT_EQ(from_moments.p_tilde, o.p_tilde);
    EXPECT_EQ(from_moments.alpha, o.alpha);
  }
}

TEST(BuildObservation, LogSafeBounds) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> ub(0.01, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    FusionConfig cfg;
    cfg.beta = ub(rng);
    const std::size_t k = 2 + trial % 10;
    const auto o = build_observation(random_samples(rng, 1 + trial % 16, k), cfg);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_GE(o.p_tilde[i], cfg.beta / static_cast<double>(k) - 1e-15);
      EXPECT_TRUE(std::isfinite(o.alpha[i]));
      EXPECT_GE(o.alpha[i], FusionConfig::alpha_min());
      EXPECT_LE(o.alpha[i], cfg.alpha_max());
    }
  }
}

TEST(FusionConfig, Validation) {
  FusionConfig cfg;
  EXPECT_NO_THROW(cfg.validate(5));
  cfg.beta = -0.1;
  EXPECT_THROW(cfg.validate(5), Error);
  cfg = {};
  cfg.eps_var = 0.3;
  EXPECT_THROW(cfg.validate(5), Error);
  cfg = {};
  cfg.p_min = 0.25;
  EXPECT_THROW(cfg.validate(5), Error);
}

TEST(McSampleSet, RejectsInvalidSamples) {
  McSampleSet s(2);
  EXPECT_THROW(s.add(std::vector<double>{0.5, 0.6}), Error);
  EXPECT_THROW(s.add(std::vector<double>{1.0, 0.0, 0.0}), Error);
  EXPECT_THROW(predictive_mean(s), Error);
}

}  // namespace
}  // namespace semfuse
