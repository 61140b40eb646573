#include <agmlab/problems.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace agmlab;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Objective sym_logsumexp() {
  Mat A(2, 1);
  A << 1.0, -1.0;
  return make_logsumexp(A, Vec::Zero(2), 1.0);
}

}  // namespace

TEST(Quadratic, ValueGradientAndMetadata) {
  const Objective q = make_quadratic({1.0, 4.0}, Vec::Zero(2), 0.5);
  Vec x(2);
  x << 1.0, 1.0;
  EXPECT_DOUBLE_EQ(q.value(x), 0.5 * (1.0 + 4.0) + 0.5);
  EXPECT_DOUBLE_EQ(q.gradient(x)(0), 1.0);
  EXPECT_DOUBLE_EQ(q.gradient(x)(1), 4.0);
  EXPECT_DOUBLE_EQ(q.L(), 4.0);
  EXPECT_DOUBLE_EQ(q.mu(), 1.0);
  ASSERT_TRUE(q.f_star());
  EXPECT_DOUBLE_EQ(*q.f_star(), 0.5);
  EXPECT_DOUBLE_EQ(*q.h1_gamma(), 2.0);
}

TEST(Quadratic, ShiftedCenterAndOffset) {
  const Objective q = make_quadratic({2.0}, v1(3.0), 5.0);
  EXPECT_DOUBLE_EQ((*q.minimizer())(0), 3.0);
  EXPECT_DOUBLE_EQ(*q.f_star(), 5.0);
  EXPECT_DOUBLE_EQ(q.value(v1(4.0)), 6.0);
  const Objective u = make_quadratic({1.0});
  EXPECT_DOUBLE_EQ(u.value(v1(2.0)), 2.0);
  EXPECT_DOUBLE_EQ(u.gradient(v1(2.0))(0), 2.0);
}

TEST(Quadratic, RejectsBadInput) {
  EXPECT_THROW(make_quadratic({}), InvalidParameter);
  EXPECT_THROW(make_quadratic({-1.0}), InvalidParameter);
  EXPECT_THROW(make_quadratic({1.0, 2.0}, Vec::Zero(3), 0.0), InvalidParameter);
}

TEST(LogSumExp, SymmetricPairHasMinimizerAtZero) {
  const Objective f = sym_logsumexp();
  EXPECT_NEAR(f.value(v1(0.0)), std::log(2.0), 1e-15);
  EXPECT_NEAR(f.gradient(v1(0.0))(0), 0.0, 1e-15);
  EXPECT_FALSE(f.minimizer());
  const Objective g = f.with_minimizer(v1(0.0));
  EXPECT_NEAR(g.require_f_star(), std::log(2.0), 1e-15);
  EXPECT_TRUE(check_metadata(g).pass);
}

TEST(LogSumExp, SingleRowIsAffine) {
  Mat A(1, 1);
  A << 1.0;
  const Objective f = make_logsumexp(A, Vec::Zero(1), 1.0);
  EXPECT_NEAR(f.value(v1(3.0)), 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(f.L(), 1.0);
  EXPECT_DOUBLE_EQ(f.mu(), 0.0);
  EXPECT_THROW(make_logsumexp(A, Vec::Zero(1), 0.0), InvalidParameter);
}

TEST(LogSumExp, GradientIsTanhInOneDimension) {
  const Objective f = sym_logsumexp();
  // closed form (e^x − e^−x)/(e^x + e^−x)
  const double oracle = (std::exp(1.0) - std::exp(-1.0)) / (std::exp(1.0) + std::exp(-1.0));
  EXPECT_NEAR(f.gradient(v1(1.0))(0), oracle, 1e-15);
  EXPECT_NEAR(f.gradient(v1(1.0))(0), 0.76159, 1e-5);
}

TEST(LogSumExp, StableForLargeArguments) {
  const Objective f = sym_logsumexp();
  const double big = 800.0;
  EXPECT_TRUE(std::isfinite(f.value(v1(big))));
  EXPECT_NEAR(f.value(v1(big)), big, 1e-9);
  EXPECT_NEAR(f.gradient(v1(big))(0), 1.0, 1e-15);
}

TEST(Power, ValueGradientAndH1Identity) {
  const Objective f = make_power(4.0, 1);
  EXPECT_DOUBLE_EQ(f.value(v1(1.0)), 1.0);
  EXPECT_DOUBLE_EQ(f.gradient(v1(1.0))(0), 4.0);
  const double resid = f.value(v1(1.0)) - *f.f_star() - 0.25 * f.gradient(v1(1.0)).dot(v1(1.0));
  EXPECT_DOUBLE_EQ(resid, 0.0);
  EXPECT_DOUBLE_EQ(*f.h1_gamma(), 4.0);
  EXPECT_DOUBLE_EQ(f.L(), 4.0 * 3.0 * 100.0);
  EXPECT_THROW(make_power(1.5, 1), InvalidParameter);
}

TEST(Power, QuadraticCaseAndMinimizer) {
  const Objective f = make_power(2.0, 2);
  Vec x(2);
  x << 3.0, 4.0;
  EXPECT_NEAR(f.value(x), 25.0, 1e-12);
  EXPECT_NEAR(f.gradient(x)(0), 6.0, 1e-12);
  EXPECT_NEAR(f.gradient(x)(1), 8.0, 1e-12);
  EXPECT_NEAR(f.gradient(x).dot(x), 2.0 * f.value(x), 1e-12);
  const Objective c = make_power(3.0, 1);
  EXPECT_DOUBLE_EQ(c.value(v1(0.0)), 0.0);
  EXPECT_DOUBLE_EQ(c.gradient(v1(0.0))(0), 0.0);
}

TEST(ConvexityGap, HandValues) {
  const Objective q = make_quadratic({1.0});
  EXPECT_DOUBLE_EQ(convexity_gap(q, v1(2.0), v1(0.0)), 2.0);
  EXPECT_DOUBLE_EQ(convexity_gap(q, v1(0.0), v1(1.0)), 0.5);
  EXPECT_THROW(convexity_gap(q, Vec::Zero(2), v1(0.0)), InvalidParameter);
}

TEST(GradientCheck, FiniteDifferenceErrors) {
  EXPECT_LE(check_gradient(make_quadratic({1.0}), v1(1.0), 1e-4), 1e-9);
  EXPECT_LE(check_gradient(sym_logsumexp(), v1(0.0), 1e-4), 1e-7);
  EXPECT_LE(check_gradient(make_power(4.0, 1), v1(1.0), 1e-5), 1e-8);
}

TEST(GradientCheck, DetectsWrongGradient) {
  Objective::Metadata m;
  m.family = "broken";
  m.L = 1.0;
  const Objective bad = Objective::from_functions(
      1, [](const Vec& x) { return 0.5 * x.squaredNorm(); }, [](const Vec& x) -> Vec { return 1.1 * x; }, m);
  EXPECT_GT(check_gradient(bad, v1(1.0), 1e-4), 1e-2);
  const GradientOrderReport r = gradient_order(bad, v1(1.0));
  EXPECT_FALSE(r.exact);
  EXPECT_LT(r.observed_order, 0.5);
}

TEST(GradientCheck, ObservedOrderForSmoothObjectives) {
  const GradientOrderReport lse = gradient_order(make_objective("logsumexp:8x4"), Vec::Constant(4, 0.3));
  EXPECT_TRUE(lse.exact || lse.observed_order >= 1.9);
  const GradientOrderReport pw = gradient_order(make_power(4.0, 2), Vec::Constant(2, 0.7));
  EXPECT_TRUE(pw.exact || pw.observed_order >= 1.9);
}

TEST(Sampling, InvariantsHoldOnCatalog) {
  for (const char* key : {"quadratic:1,4", "quadratic:n=10,min=1,max=4", "logsumexp:8x4", "power:p=4,n=2"}) {
    const Objective f = make_objective(key);
    EXPECT_TRUE(sample_convexity(f, 1000, 3).pass) << key;
    EXPECT_TRUE(sample_smoothness(f, 1000, 4).pass) << key;
    EXPECT_TRUE(check_metadata(f).pass) << key;
  }
  EXPECT_TRUE(sample_h1_equality(make_objective("quadratic:1,4")).pass);
  EXPECT_TRUE(sample_h1_equality(make_objective("power:p=4,n=2")).pass);
  EXPECT_THROW(sample_h1_equality(make_objective("logsumexp:8x4")), MetadataError);
}

TEST(Sampling, DetectsUnderstatedL) {
  Objective::Metadata m;
  m.family = "understated";
  m.L = 1.0;
  const Objective f = Objective::from_functions(
      1, [](const Vec& x) { return x.squaredNorm(); }, [](const Vec& x) -> Vec { return 2.0 * x; }, m);
  EXPECT_FALSE(sample_smoothness(f).pass);
}

TEST(Sampling, DetectsNonconvexity) {
  Objective::Metadata m;
  m.family = "concave";
  m.L = 1.0;
  const Objective f = Objective::from_functions(
      1, [](const Vec& x) { return -0.5 * x.squaredNorm(); }, [](const Vec& x) -> Vec { return -x; }, m);
  EXPECT_FALSE(sample_convexity(f).pass);
}

TEST(Metadata, MinimizerRequirements) {
  const Objective q = make_quadratic({1.0});
  const Objective bare = q.without_minimizer();
  EXPECT_FALSE(bare.minimizer());
  EXPECT_THROW(bare.require_minimizer(), MetadataError);
  const Objective back = bare.with_minimizer(v1(0.0));
  EXPECT_DOUBLE_EQ(back.require_f_star(), 0.0);
}

TEST(Metadata, WrongMinimizerIsFlagged) {
  const Objective q = make_quadratic({1.0}).with_minimizer(v1(1.0), 0.0);
  EXPECT_FALSE(check_metadata(q).pass);
}

TEST(Catalog, KeysParse) {
  EXPECT_EQ(make_objective("quadratic:1").dim(), 1);
  EXPECT_EQ(make_objective("quadratic:1,4").dim(), 2);
  EXPECT_EQ(make_objective("quadratic:n=10,min=1,max=4").dim(), 10);
  EXPECT_DOUBLE_EQ(make_objective("quadratic:n=10,min=1,max=4").L(), 4.0);
  EXPECT_EQ(make_objective("logsumexp:8x4").dim(), 4);
  EXPECT_EQ(make_objective("power:p=4,n=3").dim(), 3);
  EXPECT_THROW(make_objective("cubic:1"), InvalidParameter);
  EXPECT_THROW(make_objective("quadratic:"), InvalidParameter);
  EXPECT_FALSE(problem_catalog().empty());
}

TEST(Catalog, DefaultStartIsUnitDisplacement) {
  for (const char* key : {"quadratic:1,4", "logsumexp:8x4", "power:p=4,n=2"}) {
    const ProblemInstance p = make_problem(key);
    EXPECT_NEAR((p.x0 - p.objective.require_minimizer()).norm(), 1.0, 1e-14) << key;
  }
}

TEST(Catalog, StartOutsideValidityRadiusRejected) {
  EXPECT_THROW(make_problem("power:p=4,n=1,R=2", v1(5.0)), InvalidParameter);
  EXPECT_THROW(make_problem("quadratic:1,4", Vec::Zero(3)), InvalidParameter);
}

TEST(Objective, IsImmutableValueType) {
  const Objective q = make_quadratic({1.0});
  const Objective copy = q;
  const Objective moved = q.without_minimizer();
  EXPECT_TRUE(copy.minimizer());
  EXPECT_TRUE(q.minimizer());
  EXPECT_FALSE(moved.minimizer());
}
