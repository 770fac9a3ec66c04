#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "psyfit/experiments.hpp"
#include "psyfit/synth.hpp"

using namespace psyfit;

namespace {

Eigen::MatrixXd randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  return Eigen::MatrixXd::NullaryExpr(r, c, [&] { return n01(rng); });
}

std::vector<Eigen::Index> iota(Eigen::Index from, Eigen::Index to) {
  std::vector<Eigen::Index> v(static_cast<std::size_t>(to - from));
  std::iota(v.begin(), v.end(), from);
  return v;
}

Dataset synth_dataset(const synth::SynthCorpus& c, PartitionMode mode, std::uint64_t seed) {
  Dataset ds;
  ds.id = "synth";
  ds.kind = CorpusKind::Generic;
  ds.parts.push_back({"main", c.table, partition(c.table, mode, seed), {}});
  return ds;
}

} // namespace

TEST(ScalingLine, TwoPoints) {
  const std::vector<ScalingPoint> pts{{8, 0.1}, {10, 0.3}};
  const auto l = fit_scaling_line(pts);
  EXPECT_NEAR(l.slope, 0.1, 1e-12);
  EXPECT_NEAR(l.intercept, -0.7, 1e-12);
}

TEST(ScalingLine, ConstantScoresGiveZeroSlope) {
  const std::vector<ScalingPoint> pts{{7, 0.2}, {8, 0.2}, {9.5, 0.2}};
  EXPECT_NEAR(fit_scaling_line(pts).slope, 0.0, 1e-14);
}

TEST(ScalingLine, MatchesClosedFormOracle) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<ScalingPoint> pts;
    for (int i = 0; i < 12; ++i) pts.push_back({7 + 4 * std::abs(n01(rng)), n01(rng)});
    const double n = static_cast<double>(pts.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : pts) {
      sx += p.log10_params;
      sy += p.r;
      sxx += p.log10_params * p.log10_params;
      sxy += p.log10_params * p.r;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const auto l = fit_scaling_line(pts);
    EXPECT_NEAR(l.slope, slope, 1e-12);
    EXPECT_NEAR(l.intercept, (sy - slope * sx) / n, 1e-12);
  }
}

TEST(ScalingLine, Errors) {
  const std::vector<ScalingPoint> one{{1, 1}};
  const std::vector<ScalingPoint> same_x{{1, 1}, {1, 2}};
  EXPECT_THROW(fit_scaling_line(one), NumericalError);
  EXPECT_THROW(fit_scaling_line(same_x), NumericalError);
}

TEST(Permutation, StrictlyIncreasingGivesMinimumP) {
  std::vector<ScalingPoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({7.0 + 0.5 * i, 0.1 + 0.05 * i});
  const auto p = permutation_test_slope(pts, 1000, 123);
  EXPECT_DOUBLE_EQ(p.p_positive, 1.0 / 1001.0);
  EXPECT_DOUBLE_EQ(p.p_negative, 1.0);
}

TEST(Permutation, ConstantScoresTieEverywhere) {
  const std::vector<ScalingPoint> pts{{7, 0.3}, {8, 0.3}, {9, 0.3}, {10, 0.3}};
  const auto p = permutation_test_slope(pts, 500, 5);
  EXPECT_EQ(p.p_positive, 1.0);
  EXPECT_EQ(p.p_negative, 1.0);
}

TEST(Permutation, AgreesWithExhaustiveEnumeration) {
  const std::vector<ScalingPoint> pts{{7.1, 0.12}, {7.9, 0.31}, {8.4, 0.18}, {9.0, 0.40}, {9.6, 0.35}};
  std::vector<double> r;
  for (const auto& p : pts) r.push_back(p.r);
  const double mx = (7.1 + 7.9 + 8.4 + 9.0 + 9.6) / 5;
  const auto num = [&](const std::vector<double>& v) {
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) s += (pts[i].log10_params - mx) * v[i];
    return s;
  };
  const double obs = num(r);
  std::vector<double> perm = r;
  std::sort(perm.begin(), perm.end());
  int ge = 0, total = 0;
  do {
    ++total;
    if (num(perm) >= obs - 1e-12) ++ge;
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double exact = static_cast<double>(ge) / total;
  const auto p = permutation_test_slope(pts, 100000, 77, 2);
  EXPECT_NEAR(p.p_positive, exact, 4 * std::sqrt(exact * (1 - exact) / 100000) + 1e-5);
}

TEST(Permutation, IndependentOfWorkerCount) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  std::vector<ScalingPoint> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({7 + i * 0.1, n01(rng)});
  const auto a = permutation_test_slope(pts, 3000, 9, 1);
  const auto b = permutation_test_slope(pts, 3000, 9, 4);
  EXPECT_EQ(a.p_positive, b.p_positive);
  EXPECT_EQ(a.p_negative, b.p_negative);
}

TEST(Permutation, Errors) {
  const std::vector<ScalingPoint> two{{1, 1}, {2, 2}};
  EXPECT_THROW(permutation_test_slope(two, 10, 1), NumericalError);
  const std::vector<ScalingPoint> three{{1, 1}, {2, 2}, {3, 1}};
  EXPECT_THROW(permutation_test_slope(three, 0, 1), NumericalError);
}

TEST(Residualization, IdenticalDesignsAreUndefined) {
  std::mt19937_64 rng(3);
  const auto x = randn(400, 12, rng);
  const Eigen::VectorXd y = (x.col(0) + randn(400, 1, rng).col(0)).eval();
  const auto s = residual_contribution(x, x, y, iota(0, 200), iota(200, 400));
  EXPECT_FALSE(s.defined());
  EXPECT_EQ(s.n, 200u);
}

TEST(Residualization, ExtraSignalColumnIsDetected) {
  std::mt19937_64 rng(4);
  const auto u = randn(2000, 8, rng);
  const Eigen::VectorXd signal = randn(2000, 1, rng).col(0);
  const Eigen::VectorXd y = signal + randn(2000, 1, rng).col(0);
  Eigen::MatrixXd t(2000, 9);
  t << u, signal;
  const auto s = residual_contribution(u, t, y, iota(0, 1000), iota(1000, 2000));
  ASSERT_TRUE(s.r);
  EXPECT_GT(*s.r, 3.0 / std::sqrt(1000.0));
}

TEST(Residualization, MisalignedDesignsRejected) {
  EXPECT_THROW(residual_contribution(Eigen::MatrixXd::Ones(5, 1), Eigen::MatrixXd::Ones(4, 1),
                                     Eigen::VectorXd::Ones(5), iota(0, 2), iota(2, 5)),
               DataError);
}

TEST(Experiments, UntrainedEqualsTrainedGivesIdenticalScores) {
  synth::SynthSpec spec;
  spec.seed = 5;
  const auto corpus = synth::gen_latent_regression(spec);
  const auto ds = synth_dataset(corpus, PartitionMode::ThreeWay, 1);
  const auto b = synth::gen_random_feature_bundle(corpus, 16, 5, 0.5);
  const auto r2 = run_experiment2({{b, b}}, ds);
  EXPECT_EQ(r2.untrained.at(0).pearson_r, r2.trained.at(0).pearson_r);
  const auto r3 = run_experiment3({{b, b}}, ds);
  EXPECT_FALSE(r3.at(0).pearson_r.has_value());
}

TEST(Experiments, PairArchitectureMismatchRejected) {
  synth::SynthSpec spec;
  spec.seed = 6;
  const auto corpus = synth::gen_latent_regression(spec);
  const auto ds = synth_dataset(corpus, PartitionMode::ThreeWay, 1);
  const auto a = synth::gen_random_feature_bundle(corpus, 8, 1, 0.5);
  const auto b = synth::gen_random_feature_bundle(corpus, 16, 1, 0.5);
  EXPECT_THROW(run_experiment2({{a, b}}, ds), DataError);
  EXPECT_THROW(run_experiment3({{a, b}}, ds), DataError);
}

TEST(Experiments, ScoresAreWorkerCountInvariant) {
  synth::SynthSpec spec;
  spec.seed = 7;
  const auto corpus = synth::gen_latent_regression(spec);
  const auto ds = synth_dataset(corpus, PartitionMode::ThreeWay, 2);
  std::vector<VectorBundle> bundles;
  for (int w : {4, 8, 16, 32}) bundles.push_back(synth::gen_random_feature_bundle(corpus, w, 3, 0.4));
  ScoringOptions one, four;
  four.workers = 4;
  const auto a = run_experiment1(bundles, ds, one);
  const auto b = run_experiment1(bundles, ds, four);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].pearson_r, b[i].pearson_r);
    EXPECT_EQ(a[i].model_name, bundles[i].meta.model_name);
  }
}

TEST(Experiments, CeilingNormalizesRawScores) {
  synth::SynthSpec spec;
  spec.seed = 8;
  const auto corpus = synth::gen_latent_regression(spec);
  auto ds = synth_dataset(corpus, PartitionMode::Cv5BySubject, 3);
  ds.ceiling = 0.32;
  const auto s = score_bundle(synth::gen_random_feature_bundle(corpus, 8, 2, 0.8), ds);
  ASSERT_TRUE(s.pearson_r && s.normalized_r);
  EXPECT_EQ(*s.normalized_r, *s.pearson_r / 0.32);
  EXPECT_EQ(s.reported(), s.normalized_r);
  const auto r3 = run_experiment3({{synth::gen_random_feature_bundle(corpus, 8, 2, 0.2),
                                    synth::gen_random_feature_bundle(corpus, 8, 2, 0.8)}},
                                  ds);
  EXPECT_FALSE(r3.at(0).normalized_r.has_value());
}

TEST(Experiments, CombinePartsAveragesDefinedScores) {
  ScoreResult a, b, c;
  a.r = 0.2;
  a.n = 10;
  b.r = 0.4;
  b.n = 20;
  c.n = 5;
  const auto s = combine_parts({a, b, c});
  EXPECT_NEAR(*s.r, 0.3, 1e-15);
  EXPECT_EQ(s.n, 35u);
  EXPECT_FALSE(combine_parts({c}).r.has_value());
}

TEST(ScalingReport, SkipsUndefinedAndGroupsByFamily) {
  std::vector<VariantScore> scores;
  for (int i = 0; i < 4; ++i) {
    VariantScore v;
    v.model_name = "a" + std::to_string(i);
    v.family = "A";
    v.parameter_count = 1000ULL << (2 * i);
    v.pearson_r = 0.1 * i;
    scores.push_back(v);
  }
  auto undefined = scores[0];
  undefined.model_name = "a-undef";
  undefined.pearson_r.reset();
  scores.push_back(undefined);
  auto b = scores[1];
  b.family = "B";
  scores.push_back(b);

  const auto pooled = scaling_reports("trained", scores, false, 200, 1);
  ASSERT_EQ(pooled.size(), 1u);
  EXPECT_EQ(pooled[0].n_undefined, 1u);
  EXPECT_TRUE(pooled[0].permutation.has_value());
  const auto fam = scaling_reports("trained", scores, true, 200, 1);
  ASSERT_EQ(fam.size(), 2u);
  EXPECT_EQ(fam[0].group, "A");
  EXPECT_NEAR(fam[0].line->slope, 0.1 / std::log10(4.0), 1e-12);
  EXPECT_FALSE(fam[1].line.has_value());  // a single point
}
