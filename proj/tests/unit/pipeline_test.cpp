#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "robopt/pipeline.hpp"

using namespace robopt;

namespace {

// The model itself, with zero predictive variance.
struct ExactSurrogate {
  ObjectiveFn f;
  std::size_t n = 2;

  std::size_t dim() const { return n; }
  void robust_batch(const Matrix& pts, VarianceSpace, Vector& median, Vector& variance) const {
    median.resize(pts.rows());
    variance = Vector::Zero(pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) median[i] = f(pts.row(i).transpose());
  }
};

BoxDomain box(double lo, double hi, int n) { return BoxDomain(Vector::Constant(n, lo), Vector::Constant(n, hi)); }

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector v4(double a, double b, double c, double d) {
  Vector v(4);
  v << a, b, c, d;
  return v;
}

// Plateau at the origin; ridge at (3, 0), narrow along the first axis.
RidgePlateauSpec ridge_spec() {
  RidgePlateauSpec s;
  s.plateau_center = Vector::Zero(2);
  s.plateau_width = 1.0;
  s.plateau_height = 1.0;
  s.ridge_center = v2(3.0, 0.0);
  s.ridge_widths = v2(0.05, 1.0);
  s.ridge_height = 2.0;
  return s;
}

BoxDomain ridge_domain() { return BoxDomain(v2(-2.0, -2.0), v2(4.0, 2.0)); }

ObjectiveModel ridge_model() { return make_ridge_plateau(ridge_spec(), ridge_domain()); }

Alg1Config small_alg1() {
  Alg1Config c;
  c.batch = 1000;
  c.n_cap = 2000;
  return c;
}

MapEntry entry(std::size_t i, const Vector& p, double median) {
  MapEntry e;
  e.index = i;
  e.point = p;
  e.estimate.median = median;
  return e;
}

TrainingSet training(const Vector& values) {
  TrainingSet t;
  t.points = Matrix::Zero(values.size(), 1);
  for (Eigen::Index i = 0; i < values.size(); ++i) t.points(i, 0) = static_cast<double>(i);
  t.values = values;
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------------------

TEST(ShrinkEvalDomain, WideFixtureDomain) {
  const BoxDomain d = shrink_eval_domain(box(56.0, 616.0, 4), Vector::Constant(4, 16.8));
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(d.lower()[i], 106.4, 1e-12);
    EXPECT_NEAR(d.upper()[i], 565.6, 1e-12);
  }
}

TEST(ShrinkEvalDomain, ZeroSigmaUnchanged) {
  const BoxDomain t = box(-1.0, 2.0, 3);
  EXPECT_EQ(shrink_eval_domain(t, Vector::Zero(3)), t);
}

TEST(ShrinkEvalDomain, SixSigmaSpanIsAnErrorNamingTheAxis) {
  const BoxDomain t(v2(0.0, 0.0), v2(10.0, 6.0), {"width", "gap"});
  try {
    shrink_eval_domain(t, Vector::Ones(2));
    FAIL() << "expected DomainTooSmallError";
  } catch (const DomainTooSmallError& e) {
    EXPECT_EQ(e.axis, 1u);
    EXPECT_NE(std::string(e.what()).find("gap"), std::string::npos);
  }
}

TEST(NarrowDomain, PrintedTenSigmaHypercube) {
  const BoxDomain d = narrow_domain(v4(428.6, 282.5, 369.5, 253.0), Vector::Constant(4, 16.8), 5.0);
  const Vector lo = v4(344.6, 198.5, 285.5, 169.0), hi = v4(512.6, 366.5, 453.5, 337.0);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(d.lower()[i], lo[i], 1e-9);
    EXPECT_NEAR(d.upper()[i], hi[i], 1e-9);
  }
}

TEST(NarrowDomain, ZeroSigmaIsDegenerate) {
  const BoxDomain d = narrow_domain(v2(1.0, 2.0), Vector::Zero(2));
  EXPECT_TRUE(d.is_degenerate());
  EXPECT_EQ(d.lower(), v2(1.0, 2.0));
  EXPECT_TRUE(narrow_domain_clipped(v2(1.0, 2.0), Vector::Zero(2), box(0, 5, 2)).degenerate);
}

TEST(NarrowDomain, OriginUnitSigma) {
  EXPECT_EQ(narrow_domain(Vector::Zero(3), Vector::Ones(3)), box(-5.0, 5.0, 3));
}

TEST(NarrowDomain, ClippedAtWideDomainEdge) {
  const auto c = narrow_domain_clipped(v2(1.0, 5.0), Vector::Ones(2), box(0.0, 10.0, 2));
  EXPECT_EQ(c.clipped_axes, std::vector<std::size_t>{0});
  EXPECT_FALSE(c.degenerate);
  EXPECT_EQ(c.domain.lower(), v2(0.0, 0.0));
  EXPECT_EQ(c.domain.upper(), v2(6.0, 10.0));
  EXPECT_TRUE(box(0.0, 10.0, 2).contains(c.domain));
}

TEST(PassConfig, ValidateRejectsSmallSpan) {
  PassConfig p;
  p.train_domain = box(0.0, 5.0, 2);
  p.sigma_manuf = Vector::Ones(2);
  EXPECT_THROW(p.validate(), DomainTooSmallError);
  p.train_domain = box(0.0, 7.0, 2);
  EXPECT_NO_THROW(p.validate());
  EXPECT_TRUE(is_power_of_two(4096));
  EXPECT_FALSE(is_power_of_two(1000));
}

// ---------------------------------------------------------------------------------------

TEST(GenerateTrainingData, RidgePlateauValuesFiniteNonNegative) {
  const ObjectiveModel m = make_ridge_plateau(ridge_spec(), ridge_domain());
  const TrainingSet t = generate_training_data(m, ridge_domain(), 4096, 0, 2);
  ASSERT_EQ(t.size(), 4096u);
  EXPECT_TRUE(t.values.allFinite());
  EXPECT_GE(t.values.minCoeff(), 0.0);
  EXPECT_TRUE(t.failed_indices.empty());
}

TEST(GenerateTrainingData, ConstantModelTwoPoints) {
  const TrainingSet t = generate_training_data(make_constant(1.5, box(0, 1, 3)), box(0, 1, 3), 2, 0, 1);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.values[0], 1.5);
  EXPECT_EQ(t.values[1], 1.5);
}

TEST(GenerateTrainingData, Deterministic) {
  const ObjectiveModel m = ridge_model();
  const TrainingSet a = generate_training_data(m, ridge_domain(), 256, 7, 1);
  const TrainingSet b = generate_training_data(m, ridge_domain(), 256, 7, 3);
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.values, b.values);
}

TEST(GenerateTrainingData, FailuresExcludedAndLogged) {
  ObjectiveModel m = make_constant(1.0, box(0, 1, 2));
  m.eval = [](const Vector& p) {
    if (p[0] < 0.05) throw std::runtime_error("solver diverged");
    return 1.0;
  };
  std::vector<EvaluationRecord> log;
  const TrainingSet t = generate_training_data(m, box(0, 1, 2), 64, 0, 1,
                                               [&](const EvaluationRecord& r) { log.push_back(r); });
  ASSERT_EQ(log.size(), 64u);
  EXPECT_FALSE(t.failed_indices.empty());
  EXPECT_EQ(t.size() + t.failed_indices.size(), 64u);
  for (auto i : t.failed_indices) {
    EXPECT_TRUE(log[i].failed);
    EXPECT_EQ(log[i].error, "solver diverged");
  }
}

TEST(GenerateTrainingData, TooManyFailuresAbort) {
  ObjectiveModel m = make_constant(1.0, box(0, 1, 2));
  m.eval = [](const Vector& p) { return p[0] < 0.2 ? std::nan("") : 1.0; };
  EXPECT_THROW(generate_training_data(m, box(0, 1, 2), 64, 0, 1), EvaluationError);
}

// ---------------------------------------------------------------------------------------

TEST(FilterOutliers, ExplicitThresholdRemovesStrictlyAbove) {
  Vector v = Vector::LinSpaced(20, 1.0, 40.0);
  v[3] = 49.9;
  v[7] = 51.0;
  v[9] = 50.0;
  const FilterResult r = filter_outliers(training(v), 50.0);
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].index, 7u);
  EXPECT_EQ(r.removed[0].value, 51.0);
  EXPECT_EQ(r.removed[0].reason, "above_threshold");
  EXPECT_EQ(r.kept.size(), 19u);
  EXPECT_FALSE(r.default_rule);
}

TEST(FilterOutliers, ThresholdAboveMaximumKeepsAll) {
  const Vector v = Vector::LinSpaced(30, 0.5, 3.0);
  const FilterResult r = filter_outliers(training(v), 3.5);
  EXPECT_TRUE(r.removed.empty());
  EXPECT_EQ(r.kept.values, v);
}

TEST(FilterOutliers, DefaultRuleOnLogNormalRemovesUnderOnePercent) {
  std::mt19937_64 rng(11);
  std::lognormal_distribution<double> ln(0.0, 1.0);
  Vector v(20000);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = ln(rng);
  const FilterResult r = filter_outliers(training(v), std::nullopt);
  EXPECT_TRUE(r.default_rule);
  EXPECT_LT(static_cast<double>(r.removed.size()) / 20000.0, 0.01);
  EXPECT_NEAR(r.threshold, default_outlier_threshold(v), 0.0);
}

TEST(FilterOutliers, RefusesToRemoveMoreThanTenPercent) {
  const Vector v = Vector::LinSpaced(100, 1.0, 100.0);
  try {
    filter_outliers(training(v), 85.0);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("85"), std::string::npos);
  }
  EXPECT_EQ(filter_outliers(training(v), 90.0).removed.size(), 10u);
}

TEST(FilterOutliers, ValuesAtTheBoundAreReported) {
  Vector v = Vector::LinSpaced(20, 1.0, 2.0);
  v[4] = 0.0;
  const FilterResult r = filter_outliers(training(v), 10.0, 0.0);
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].reason, "at_or_below_bound");
  EXPECT_GT(r.kept.values.minCoeff(), 0.0);
}

// ---------------------------------------------------------------------------------------

TEST(BatchRobustMap, ConstantSurrogateKeepsSobolOrder) {
  const ExactSurrogate s{[](const Vector&) { return 3.0; }, 2};
  const auto map = batch_robust_map(s, box(0, 1, 2), 16, Vector::Constant(2, 0.01), small_alg1(), 5, 1);
  ASSERT_EQ(map.size(), 16u);
  for (std::size_t i = 0; i < map.size(); ++i) {
    EXPECT_EQ(map[i].index, i);
    EXPECT_EQ(map[i].estimate.median, 3.0);
  }
}

TEST(BatchRobustMap, SingleEntry) {
  const ExactSurrogate s{[](const Vector& p) { return p.sum(); }, 2};
  const auto map = batch_robust_map(s, box(0, 1, 2), 1, Vector::Constant(2, 0.01), small_alg1(), 5, 1);
  ASSERT_EQ(map.size(), 1u);
  EXPECT_EQ(map[0].point, v2(0.0, 0.0));
}

TEST(BatchRobustMap, RidgePlateauTopEntryNearPlateau) {
  const ObjectiveModel m = ridge_model();
  const ExactSurrogate s{m.eval, 2};
  const Vector sigma = Vector::Constant(2, 0.1);
  const BoxDomain eval = shrink_eval_domain(ridge_domain(), sigma);
  const auto map = batch_robust_map(s, eval, 1024, sigma, small_alg1(), 17, 2);
  const Vector top = map.front().point;
  EXPECT_LT((top - ridge_spec().plateau_center).norm(), 3.0 * 0.1);

  Rng rng(3);
  const double at_top = brute_force_robust_median(m, scatter_at(top, sigma), 100000, rng);
  const double at_ridge = brute_force_robust_median(m, scatter_at(ridge_spec().ridge_center, sigma), 100000, rng);
  EXPECT_GT(at_top, at_ridge);
  EXPECT_NEAR(map.front().estimate.median, at_top, 0.01);
}

TEST(BatchRobustMap, IndependentOfParallelism) {
  const ExactSurrogate s{ridge_model().eval, 2};
  const Vector sigma = Vector::Constant(2, 0.1);
  const BoxDomain eval = shrink_eval_domain(ridge_domain(), sigma);
  const auto a = batch_robust_map(s, eval, 64, sigma, small_alg1(), 9, 1);
  const auto b = batch_robust_map(s, eval, 64, sigma, small_alg1(), 9, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].index, b[i].index);
    EXPECT_EQ(a[i].estimate.median, b[i].estimate.median);
    EXPECT_EQ(a[i].estimate.sigma_mc, b[i].estimate.sigma_mc);
  }
}

// ---------------------------------------------------------------------------------------

TEST(ClusterFilter, IdenticalPointsCollapse) {
  const std::vector<MapEntry> s{entry(0, v2(0.5, 0.5), 2.0), entry(1, v2(0.5, 0.5), 1.0)};
  const auto k = cluster_filter(s, box(0, 1, 2));
  ASSERT_EQ(k.size(), 1u);
  EXPECT_EQ(k[0].index, 0u);
}

TEST(ClusterFilter, SparseGridAllKept) {
  std::vector<MapEntry> s;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s.push_back(entry(s.size(), v2(0.3 * i, 0.3 * j), 100.0 - s.size()));
  EXPECT_EQ(cluster_filter(s, box(0, 1, 2), 0.25).size(), 16u);
}

TEST(ClusterFilter, TwoClustersKeepEachMaximum) {
  std::vector<MapEntry> s{entry(0, v2(0.20, 0.20), 5.0), entry(1, v2(0.80, 0.80), 4.5),
                          entry(2, v2(0.25, 0.18), 4.0), entry(3, v2(0.78, 0.85), 3.5),
                          entry(4, v2(0.15, 0.22), 3.0)};
  const auto k = cluster_filter(s, box(0, 1, 2), 0.25);
  ASSERT_EQ(k.size(), 2u);
  EXPECT_EQ(k[0].index, 0u);
  EXPECT_EQ(k[1].index, 1u);
}

TEST(ClusterFilter, RadiusIsInUnitCubeCoordinates) {
  const std::vector<MapEntry> s{entry(0, v2(100.0, 0.0), 2.0), entry(1, v2(300.0, 0.0), 1.0)};
  EXPECT_EQ(cluster_filter(s, BoxDomain(v2(0.0, 0.0), v2(1000.0, 1.0)), 0.25).size(), 1u);
  EXPECT_EQ(cluster_filter(s, BoxDomain(v2(0.0, 0.0), v2(400.0, 1.0)), 0.25).size(), 2u);
}

// ---------------------------------------------------------------------------------------

namespace {

ObjectiveModel bump_model() { return make_gaussian_bump(v2(0.5, 0.5), 0.15, 1.0, 0.0, box(0, 1, 2)); }

ConvergeOptions converge_opts(std::size_t budget) {
  ConvergeOptions o;
  o.alg1 = small_alg1();
  o.bo_budget = budget;
  return o;
}

}  // namespace

TEST(ConvergeCandidates, ZeroBudgetReturnsCandidates) {
  const ExactSurrogate s{bump_model().eval, 2};
  const Vector sigma = Vector::Constant(2, 0.02);
  const BoxDomain eval = shrink_eval_domain(box(0, 1, 2), sigma);
  const std::vector<MapEntry> c{entry(0, v2(0.3, 0.3), 0.5), entry(1, v2(0.8, 0.8), 0.4)};
  const auto out = converge_candidates(s, c, c, eval, sigma, converge_opts(0), 1);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].point, c[0].point);
  EXPECT_EQ(out[1].point, c[1].point);
  EXPECT_EQ(out[0].estimate.median, 0.5);
}

TEST(ConvergeCandidates, StartAtOptimumMovesLessThanOneSigma) {
  const ObjectiveModel m = ridge_model();
  const ExactSurrogate s{m.eval, 2};
  const Vector sigma = Vector::Constant(2, 0.1);
  const BoxDomain eval = shrink_eval_domain(ridge_domain(), sigma);
  Rng rng(1);
  const Vector start = Vector::Zero(2);
  const auto est = robust_estimate_surrogate(s, scatter_at(start, sigma), small_alg1(), rng);
  const std::vector<MapEntry> c{entry(0, start, est.median)};
  const auto out = converge_candidates(s, c, c, eval, sigma, converge_opts(16), 77);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_LT((out[0].point - start).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_GE(out[0].estimate.median, est.median);
  EXPECT_TRUE(eval.contains(out[0].point));
}

TEST(ConvergeCandidates, SymmetricBasinMergesToOne) {
  const ExactSurrogate s{bump_model().eval, 2};
  const Vector sigma = Vector::Constant(2, 0.02);
  const BoxDomain eval = shrink_eval_domain(box(0, 1, 2), sigma);
  Rng rng(2);
  std::vector<MapEntry> c;
  for (const Vector& p : {v2(0.35, 0.5), v2(0.65, 0.5)})
    c.push_back(entry(c.size(), p, robust_estimate_surrogate(s, scatter_at(p, sigma), small_alg1(), rng).median));
  ASSERT_GE(unit_distance(eval, c[0].point, c[1].point), 0.25);
  const auto out = converge_candidates(s, c, c, eval, sigma, converge_opts(16), 5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_LT((out[0].point - v2(0.5, 0.5)).norm(), 0.05);
}

TEST(ConvergeCandidates, RejectsCandidateOutsideDomain) {
  const ExactSurrogate s{bump_model().eval, 2};
  const std::vector<MapEntry> c{entry(0, v2(2.0, 0.5), 0.0)};
  EXPECT_THROW(converge_candidates(s, c, c, box(0, 1, 2), Vector::Constant(2, 0.01), converge_opts(4), 1),
               OutOfDomainError);
}

// ---------------------------------------------------------------------------------------

TEST(VerifyCandidates, ConstantModelEqualMedians) {
  const ObjectiveModel m = make_constant(4.0, box(0, 1, 2));
  const auto v = verify_candidates(m, {v2(0.2, 0.2), v2(0.7, 0.1), v2(0.5, 0.9)}, Vector::Constant(2, 0.05), 64, 1, 3);
  ASSERT_EQ(v.size(), 3u);
  for (const auto& c : v) EXPECT_EQ(c.estimate.median, 4.0);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(v[k].origin, k);
}

TEST(VerifyCandidates, PlateauRanksAboveRidge) {
  const ObjectiveModel m = ridge_model();
  std::vector<EvaluationRecord> log;
  const auto v = verify_candidates(m, {ridge_spec().ridge_center, ridge_spec().plateau_center},
                                   Vector::Constant(2, 0.1), 64, 1, 9,
                                   [&](const EvaluationRecord& r) { log.push_back(r); });
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].origin, 1u);
  EXPECT_GT(v[0].estimate.median, v[1].estimate.median);
  EXPECT_EQ(log.size(), 128u);
  EXPECT_EQ(log.front().stage, "verify/0");
}

TEST(VerifyCandidates, FinalSampleSizeRelativeErrorBelowFivePercent) {
  const auto v = verify_candidates(ridge_model(), {ridge_spec().plateau_center}, Vector::Constant(2, 0.1), 512, 1, 4);
  EXPECT_LT(v[0].estimate.sigma_mc / v[0].estimate.median, 0.05);
  EXPECT_EQ(v[0].estimate.n_total, 512u);
}

TEST(VerifyCandidates, NeedsTwoSamples) {
  EXPECT_THROW(verify_candidates(ridge_model(), {v2(0, 0)}, Vector::Constant(2, 0.1), 1, 1, 1), ShapeError);
}

// ---------------------------------------------------------------------------------------

TEST(NaiveOptimize, ZeroBudgetReturnsBestTrainingPoint) {
  const ObjectiveModel m = ridge_model();
  const TrainingSet t = generate_training_data(m, ridge_domain(), 128, 0, 1);
  const NaiveResult r = naive_optimize(m, ridge_domain(), t, 0, Vector::Constant(2, 0.1), 64, 1, 3);
  Eigen::Index best = 0;
  t.values.maxCoeff(&best);
  EXPECT_EQ(r.point, t.points.row(best).transpose());
  EXPECT_EQ(r.value, t.values[best]);
  EXPECT_TRUE(r.history.empty());
}

TEST(NaiveOptimize, LandsOnRidgeAndLosesUnderScatter) {
  const ObjectiveModel m = ridge_model();
  const Vector sigma = Vector::Constant(2, 0.1);
  const TrainingSet t = generate_training_data(m, ridge_domain(), 256, 0, 1);
  const NaiveResult r = naive_optimize(m, ridge_domain(), t, 16, sigma, 512, 1, 21);
  EXPECT_LT(std::abs(r.point[0] - 3.0), 0.1);
  EXPECT_GT(r.value, 1.0);
  const auto robust = verify_candidates(m, {ridge_spec().plateau_center}, sigma, 512, 1, 22);
  EXPECT_LT(r.estimate.median, robust[0].estimate.median);
  EXPECT_EQ(r.history.size(), t.size() + 16);
}

TEST(NaiveOptimize, BroadOptimumCoincidesWithRobustSelection) {
  const ObjectiveModel m = bump_model();
  const Vector sigma = Vector::Constant(2, 0.02);
  const TrainingSet t = generate_training_data(m, box(0, 1, 2), 64, 0, 1);
  const NaiveResult naive = naive_optimize(m, box(0, 1, 2), t, 24, sigma, 64, 1, 8);

  const ExactSurrogate s{m.eval, 2};
  const BoxDomain eval = shrink_eval_domain(box(0, 1, 2), sigma);
  const auto map = batch_robust_map(s, eval, 64, sigma, small_alg1(), 12, 1);
  auto cands = cluster_filter(map, eval);
  cands.resize(1);
  const auto conv = converge_candidates(s, cands, map, eval, sigma, converge_opts(24), 13);
  EXPECT_LT((naive.point - conv.front().point).cwiseAbs().maxCoeff(), 0.02);
}

// ---------------------------------------------------------------------------------------

TEST(ReevaluateUncertainty, SameSigmaReproducesSelection) {
  const ExactSurrogate s{ridge_model().eval, 2};
  const Vector sigma = Vector::Constant(2, 0.1);
  ReevaluateOptions o;
  o.n_eval = 512;
  o.converge = converge_opts(12);
  o.seed = 1;
  const auto a = reevaluate_uncertainty(s, ridge_domain(), sigma, o);
  o.seed = 2;
  const auto b = reevaluate_uncertainty(s, ridge_domain(), sigma, o);
  EXPECT_LT(unit_distance(a.eval_domain, a.point, b.point), o.converge.cluster_radius);
  EXPECT_LT(a.point.norm(), 0.3);
}

TEST(ReevaluateUncertainty, VanishingSigmaFindsPointwiseArgmax) {
  const ExactSurrogate s{ridge_model().eval, 2};
  ReevaluateOptions o;
  o.n_eval = 1024;
  o.converge = converge_opts(16);
  o.seed = 3;
  const auto r = reevaluate_uncertainty(s, ridge_domain(), Vector::Constant(2, 1e-6), o);
  EXPECT_LT(std::abs(r.point[0] - 3.0), 0.02);
  EXPECT_GT(r.estimate.median, 1.5);
}

TEST(ReevaluateUncertainty, HalvedSigmaRaisesMedian) {
  const ExactSurrogate s{ridge_model().eval, 2};
  ReevaluateOptions o;
  o.n_eval = 512;
  o.converge = converge_opts(12);
  o.seed = 4;
  const auto full = reevaluate_uncertainty(s, ridge_domain(), Vector::Constant(2, 0.2), o);
  const auto half = reevaluate_uncertainty(s, ridge_domain(), Vector::Constant(2, 0.1), o);
  EXPECT_GT(half.estimate.median, full.estimate.median);
}

TEST(ReevaluateUncertainty, EmptyShrunkDomainIsAnError) {
  const ExactSurrogate s{ridge_model().eval, 2};
  EXPECT_THROW(reevaluate_uncertainty(s, ridge_domain(), Vector::Constant(2, 1.0), {}), DomainTooSmallError);
}

// ---------------------------------------------------------------------------------------

TEST(LandscapeSlice, GridTwoGivesCorners) {
  const auto s = landscape_slice([](const Vector& p) { return 10.0 * p[0] + p[2]; }, Vector::Zero(3),
                                 Vector::Ones(3), 0, 2, 2, 1.0);
  ASSERT_EQ(s.values.size(), 4);
  EXPECT_EQ(s.values(0, 0), -11.0);
  EXPECT_EQ(s.values(1, 0), 9.0);
  EXPECT_EQ(s.values(0, 1), -9.0);
  EXPECT_EQ(s.values(1, 1), 11.0);
  ASSERT_EQ(s.ellipses.size(), 3u);
  EXPECT_EQ(s.ellipses[2], std::make_pair(3.0, 3.0));
}

TEST(LandscapeSlice, ConstantModel) {
  const auto s = landscape_slice(make_constant(2.0, box(0, 1, 2)).eval, v2(0.5, 0.5), Vector::Constant(2, 0.1), 0,
                                 1, 7);
  EXPECT_TRUE((s.values.array() == 2.0).all());
}

TEST(LandscapeSlice, MaximumInsideThreeSigmaEllipseAtRobustPoint) {
  const Vector sigma = Vector::Constant(2, 0.1);
  const auto s = landscape_slice(ridge_model().eval, Vector::Zero(2), sigma, 0, 1, 41);
  Eigen::Index a = 0, b = 0;
  s.values.maxCoeff(&a, &b);
  const double dx = s.xs[a] / (3.0 * sigma[0]), dy = s.ys[b] / (3.0 * sigma[1]);
  EXPECT_LE(dx * dx + dy * dy, 1.0);
}

TEST(LandscapeSlice, BadArguments) {
  const auto f = [](const Vector&) { return 0.0; };
  EXPECT_THROW(landscape_slice(f, Vector::Zero(2), Vector::Ones(2), 0, 0, 3), ShapeError);
  EXPECT_THROW(landscape_slice(f, Vector::Zero(2), Vector::Ones(2), 0, 2, 3), ShapeError);
  EXPECT_THROW(landscape_slice(f, Vector::Zero(2), Vector::Ones(2), 0, 1, 1), ShapeError);
}
