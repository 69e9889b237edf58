#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "test_support.hpp"

using namespace dsvdae;
using namespace dsvdae::testing;

namespace {

Hypersphere unit_sphere(Eigen::Index d, double r) {
  Hypersphere s;
  s.center = RowVector::Zero(d);
  s.radius = r;
  s.mu = 0.5;
  return s;
}

ScoringConfig scoring(double beta, Weighting w = Weighting::PaperLiteral) {
  ScoringConfig c;
  c.beta = beta;
  c.weighting = w;
  return c;
}

}  // namespace

TEST(AnomalyScore, NodeAtBothCenters) {
  const Tensor2 z = Tensor2::Zero(1, 2);
  for (double beta : {0.0, 0.3, 1.0}) {
    const auto s = anomaly_score(&z, &z, unit_sphere(2, 1.0), unit_sphere(2, 1.0), scoring(beta));
    EXPECT_EQ(s[0], -1.0);
  }
}

TEST(AnomalyScore, WorkedExample) {
  Tensor2 za(1, 1), zs(1, 1);
  za << std::sqrt(5.0);
  zs << std::sqrt(2.0);
  const auto s = anomaly_score(&zs, &za, unit_sphere(1, 1.0), unit_sphere(1, 1.0), scoring(0.5));
  EXPECT_NEAR(s[0], 2.5, 1e-14);
}

TEST(AnomalyScore, BetaOnePaperLiteralIsAttributeOnly) {
  std::mt19937_64 rng(1);
  const Tensor2 zs = random_matrix(5, 3, rng);
  const Tensor2 za = random_matrix(5, 3, rng);
  const Hypersphere ss = unit_sphere(3, 0.2), sa = unit_sphere(3, 0.4);
  const auto both = anomaly_score(&zs, &za, ss, sa, scoring(1.0));
  const auto attr = anomaly_score(nullptr, &za, ss, sa, scoring(1.0));
  EXPECT_EQ(both, attr);
  const auto lc = anomaly_score(&zs, &za, ss, sa, scoring(1.0, Weighting::LossConsistent));
  EXPECT_EQ(lc, anomaly_score(&zs, nullptr, ss, sa, scoring(0.3)));
}

TEST(AnomalyScore, WeightSwapDuality) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const Tensor2 zs = random_matrix(6, 3, rng);
    const Tensor2 za = random_matrix(6, 3, rng);
    const Hypersphere ss = unit_sphere(3, u(rng)), sa = unit_sphere(3, u(rng));
    const double beta = u(rng);
    const auto a = anomaly_score(&zs, &za, ss, sa, scoring(beta));
    const auto b = anomaly_score(&zs, &za, ss, sa, scoring(1.0 - beta, Weighting::LossConsistent));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
  }
}

TEST(AnomalyScore, MissingBranchGetsFullWeight) {
  Tensor2 za(1, 1);
  za << 2.0;
  const auto s = anomaly_score(nullptr, &za, unit_sphere(1, 0.0), unit_sphere(1, 1.0), scoring(0.2));
  EXPECT_EQ(s[0], 3.0);
  EXPECT_THROW(anomaly_score(nullptr, nullptr, unit_sphere(1, 0), unit_sphere(1, 0), scoring(0.2)), InvalidArgument);
  EXPECT_THROW(anomaly_score(nullptr, &za, unit_sphere(1, 0), unit_sphere(1, 0), scoring(1.2)), InvalidArgument);
}

TEST(Classify, InclusiveThreshold) {
  EXPECT_EQ(classify({-1.0, 0.0, 3.0}, 0.0), (std::vector<int>{0, 1, 1}));
  EXPECT_EQ(classify({-1.0, 0.0, 3.0}, 3.5), (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(classify({-1.0, 0.0, 3.0}, -1.0), (std::vector<int>{1, 1, 1}));
}

TEST(Classify, RaisingThresholdFlipsOnlyTheBand) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s(30);
    for (double& x : s) x = u(rng);
    const double lambda = u(rng);
    const double eps = 0.3 * std::abs(u(rng));
    const auto a = classify(s, lambda);
    const auto b = classify(s, lambda + eps);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool in_band = s[i] >= lambda && s[i] < lambda + eps;
      EXPECT_EQ(a[i] != b[i], in_band);
    }
  }
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}), 1.0);
  EXPECT_EQ(auc({0.1, 0.2, 0.9, 0.8}, {1, 1, 0, 0}), 0.0);
  EXPECT_EQ(auc({0.8, 0.6, 0.6, 0.2}, {1, 0, 1, 0}), 0.875);
  EXPECT_THROW(auc({0.1, 0.2}, {1, 1}), InvalidArgument);
  EXPECT_THROW(auc({0.1, 0.2}, {1}), InvalidArgument);
  EXPECT_THROW(auc({0.1, 0.2}, {1, 2}), InvalidArgument);
}

TEST(AveragePrecision, Examples) {
  EXPECT_EQ(average_precision({0.9, 0.8, 0.1}, {1, 1, 0}), 1.0);
  EXPECT_NEAR(average_precision({0.9, 0.8, 0.1}, {1, 0, 1}), 0.5 * (1.0 + 2.0 / 3.0), 1e-15);
  EXPECT_NEAR(average_precision({0.9, 0.8, 0.1}, {1, 0, 1}), 0.8333, 1e-4);
  EXPECT_EQ(average_precision({0.5, 0.4, 0.3, 0.2, 0.1}, {0, 0, 0, 0, 1}), 0.2);
  EXPECT_THROW(average_precision({0.1, 0.2}, {0, 0}), InvalidArgument);
}

TEST(AveragePrecision, TiesKeepInputOrder) {
  // tied scores: the earlier index is ranked first
  EXPECT_EQ(average_precision({0.5, 0.5}, {1, 0}), 1.0);
  EXPECT_EQ(average_precision({0.5, 0.5}, {0, 1}), 0.5);
}

TEST(Metrics, MatchOraclesExactly) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> s;
    std::vector<int> y;
    random_metric_instance(rng, s, y);
    EXPECT_EQ(auc(s, y), auc_oracle(s, y)) << "instance " << t;
    EXPECT_EQ(average_precision(s, y), ap_oracle(s, y)) << "instance " << t;
  }
}

TEST(Metrics, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s;
    std::vector<int> y;
    random_metric_instance(rng, s, y);
    std::vector<double> e(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) e[i] = std::exp(3.0 * s[i]) + 7.0;
    EXPECT_EQ(auc(s, y), auc(e, y));
    EXPECT_EQ(average_precision(s, y), average_precision(e, y));
  }
}

TEST(Metrics, AucComplementWithoutTies) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s;
    std::vector<int> y;
    random_metric_instance(rng, s, y);
    for (double& x : s) x = u(rng);  // distinct with probability one
    std::vector<double> neg(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) neg[i] = -s[i];
    EXPECT_NEAR(auc(s, y) + auc(neg, y), 1.0, 1e-15);
  }
}

TEST(EvaluateScores, BundlesResults) {
  const EvalResult r = evaluate_scores({0.8, 0.6, 0.6, 0.2}, {1, 0, 1, 0}, 0.5);
  EXPECT_EQ(r.auc, 0.875);
  EXPECT_EQ(r.scores.size(), 4u);
  EXPECT_EQ(r.predicted, (std::vector<int>{1, 1, 1, 0}));
}

TEST(Weighting, NamesRoundTrip) {
  for (Weighting w : {Weighting::PaperLiteral, Weighting::LossConsistent}) EXPECT_EQ(parse_weighting(to_string(w)), w);
  EXPECT_THROW(parse_weighting("other"), InvalidArgument);
}
