#include <agmlab/discrete.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace agmlab;

namespace {

ProblemInstance unit_quadratic() { return make_problem("quadratic:1", Vec::Ones(1)); }

IntegratorConfig tight() {
  IntegratorConfig c;
  c.rel_tol = 1e-12;
  c.abs_tol = 1e-14;
  return c;
}

}  // namespace

TEST(Theta, SsseIsHalfK) {
  const ThetaSchedule th = make_ssse_theta(4);
  ASSERT_EQ(th.K(), 4);
  for (int k = 0; k <= 4; ++k) EXPECT_DOUBLE_EQ(th[k], 0.5 * k);
}

TEST(Theta, OgmgBackwardRecursion) {
  const ThetaSchedule k1 = make_ogmg_theta(1);
  EXPECT_DOUBLE_EQ(k1[1], 1.0);
  EXPECT_DOUBLE_EQ(k1[0], 2.0);
  const ThetaSchedule k2 = make_ogmg_theta(2);
  EXPECT_DOUBLE_EQ(k2[2], 1.0);
  EXPECT_NEAR(k2[1], (1.0 + std::sqrt(5.0)) / 2.0, 1e-15);
  EXPECT_NEAR(k2[0], (1.0 + std::sqrt(1.0 + 8.0 * k2[1] * k2[1])) / 2.0, 1e-15);
  EXPECT_NEAR(k2[0], 2.8422356793243053, 1e-14);
  EXPECT_THROW(make_ogmg_theta(0), InvalidParameter);
}

TEST(Theta, OgmgAsymptoticallyHalfIndex) {
  // values[j] stands for θ_{K−j}; compare against (K−j)/2 away from the modified first entry.
  const int K = 200;
  const ThetaSchedule th = make_ogmg_theta(K);
  for (int j = 1; j <= K / 2; ++j) EXPECT_LE(std::abs(th[j] / (0.5 * (K - j)) - 1.0), 0.05) << j;
}

TEST(Ssse, HandRunConvergesInTwoSteps) {
  const RunRecord rec = run_ssse(unit_quadratic(), 2.0, 2);
  ASSERT_EQ(rec.iterates.size(), 3u);
  EXPECT_DOUBLE_EQ(rec.iterates[0].x_plus(0), 0.0);
  EXPECT_DOUBLE_EQ(rec.iterates[1].z(0), 1.0);
  EXPECT_DOUBLE_EQ(rec.iterates[1].x(0), 1.0);
  EXPECT_DOUBLE_EQ(rec.iterates[1].x_plus(0), 0.0);
  EXPECT_DOUBLE_EQ(rec.iterates[2].z(0), 0.0);
  EXPECT_DOUBLE_EQ(rec.iterates[2].x(0), 0.0);
  EXPECT_FALSE(rec.warning);
}

TEST(Ssse, HandRunLyapunovAndMargins) {
  const RunRecord rec = run_ssse(unit_quadratic(), 2.0, 2);
  EXPECT_DOUBLE_EQ(ssse_lyapunov(rec, 0), 0.5);
  EXPECT_DOUBLE_EQ(ssse_lyapunov(rec, 1), 0.0);
  const RateMargin m = ssse_rate_margin(rec, 1);
  EXPECT_DOUBLE_EQ(m.plain_bound, 1.0);
  EXPECT_DOUBLE_EQ(m.plain_margin, 1.0);
  EXPECT_DOUBLE_EQ(m.sharp_bound, 0.75);
  EXPECT_THROW(ssse_lyapunov(rec, 2), IndexError);
  EXPECT_THROW(ssse_rate_margin(rec, 0), IndexError);
}

TEST(Ssse, PhiZeroIsScaledInitialDistance) {
  const ProblemInstance p = make_problem("quadratic:n=10,min=1,max=4");
  for (double s : {0.1, 0.25, 0.5}) {
    const RunRecord rec = run_ssse(p, s, 5);
    EXPECT_NEAR(ssse_lyapunov(rec, 0), 1.0 / s, 1e-14) << s;
  }
}

TEST(Ssse, WarningAndDegenerateInputs) {
  const ProblemInstance p = make_problem("quadratic:1,4");
  const RunRecord wide = run_ssse(p, 4.0 / 4.0 * 1.5, 3);
  EXPECT_TRUE(wide.warning);
  EXPECT_THROW(run_ssse(p, 0.1, 0), DegenerateRun);
  EXPECT_THROW(run_ssse(p, -0.1, 3), InvalidParameter);
}

TEST(Ssse, RateWithTwoOverL) {
  for (const char* key : {"quadratic:1,4", "quadratic:n=10,min=0.01,max=1", "logsumexp:8x4"}) {
    const ProblemInstance p = make_problem(key);
    const double L = p.objective.L();
    const RunRecord rec = run_ssse(p, 2.0 / L, 300);
    const double d0 = (p.x0 - p.objective.require_minimizer()).squaredNorm();
    for (int k = 1; k <= 300; ++k)
      EXPECT_LE(p.objective.value(rec.iterates[k].x_plus) - p.objective.require_f_star(), L * d0 / (k * k) * (1 + 1e-12))
          << key << " k=" << k;
  }
}

TEST(Ssse, MomentumIdentity) {
  const RunRecord rec = run_ssse(make_problem("logsumexp:8x4"), 1.0, 2000);
  const MomentumIdentity mi = ssse_momentum_identity(rec);
  EXPECT_LE(mi.worst_step_ulps, 1.0);
  EXPECT_LE(mi.accumulated_drift, 1e-10);
}

TEST(Ssse, NoMinimizerSkipsCertificates) {
  const ProblemInstance p(make_quadratic({1.0}).without_minimizer(), Vec::Ones(1), "bare");
  const RunRecord rec = run_ssse(p, 1.0, 3);
  EXPECT_FALSE(rec.has_series("phi"));
  EXPECT_THROW(ssse_lyapunov(rec, 0), MetadataError);
}

TEST(Nesterov, ClassicalEnvelopeAndHalfBound) {
  const ProblemInstance p = make_problem("quadratic:1,4");
  const RunRecord rec = run_nesterov_agm(p, 10);
  const double L = p.objective.L();
  EXPECT_LE(p.objective.value(rec.x_final()), 2.0 * L * 1.0 / (11.0 * 11.0));
  // the SSSE bound L‖X₀−X★‖²/k² is half the classical envelope 2L‖X₀−X★‖²/k²
  for (int k = 1; k <= 10; ++k) {
    const double ssse = run_ssse(p, 2.0 / L, k).s;
    EXPECT_DOUBLE_EQ(2.0 * 1.0 / (ssse * k * k) * 2.0, 2.0 * L / (k * k));
  }
}

TEST(Ogmg, RegressionK2) {
  const RunRecord rec = run_ogmg(unit_quadratic(), 2);
  EXPECT_DOUBLE_EQ(rec.iterates[0].x(0), 1.0);
  EXPECT_NEAR(rec.iterates[1].x(0), -1.5734571160062125, 1e-14);
  EXPECT_NEAR(rec.iterates[2].x(0), 0.7036714142141327, 1e-14);
  EXPECT_TRUE(rec.final_step_clamped);
  EXPECT_THROW(run_ogmg(unit_quadratic(), 1), DegenerateRun);
}

TEST(Ogmg, RegressionK4Lyapunov) {
  const RunRecord rec = run_ogmg(unit_quadratic(), 4);
  const double xs[] = {1.0, -2.035639930451194, 1.5323249301937292, -1.0116114283643127, 0.45240638412765266};
  for (int k = 0; k <= 4; ++k) EXPECT_NEAR(rec.iterates[k].x(0), xs[k], 1e-13) << k;
  for (int k = 1; k <= 4; ++k) EXPECT_NEAR(ogmg_lyapunov(rec, k), 0.2046715363994576, 1e-14) << k;
  EXPECT_THROW(ogmg_lyapunov(rec, 0), IndexError);
}

TEST(Ogmg, GradientDecreasesOnQuadraticSuite) {
  for (const char* key : {"quadratic:1,4", "quadratic:n=10,min=0.01,max=1", "quadratic:n=10,min=1,max=4"}) {
    const ProblemInstance p = make_problem(key);
    for (int K : {4, 8, 16, 32}) {
      const RunRecord rec = run_ogmg(p, K);
      EXPECT_LE(p.objective.gradient(rec.x_final()).norm(), p.objective.gradient(p.x0).norm()) << key << " K=" << K;
    }
  }
}

TEST(Ogmg, ThetaOverrideMustMatchK) {
  OgmgOptions o;
  o.theta = make_ogmg_theta(3);
  EXPECT_THROW(run_ogmg(unit_quadratic(), 4, o), InvalidParameter);
}

TEST(Oblg, RegressionK4) {
  const RunRecord rec = run_oblg(unit_quadratic(), 4);
  const double xs[] = {1.0, -1.0, 0.4, -0.1, 0.0};
  for (int k = 0; k <= 4; ++k) EXPECT_NEAR(rec.iterates[k].x(0), xs[k], 1e-14) << k;
  EXPECT_THROW(run_oblg(unit_quadratic(), 2), DegenerateRun);
}

TEST(Oblg, TracksTerminalFlow) {
  const ProblemInstance p = make_problem("quadratic:1,4");
  const TerminalReport ode = terminal_analysis(OdeFamily::terminal(-3, 5), p, tight(), {});
  const RefinementStudy st = oblg_coincidence(p, ode, {64, 128, 256});
  ASSERT_EQ(st.errors.size(), 3u);
  EXPECT_LT(st.errors[2], st.errors[0]);
  EXPECT_GE(st.min_order, 0.9);
}

TEST(Concat, HandoffAndSlope) {
  const ProblemInstance p = make_problem("quadratic:n=10,min=0.01,max=1");
  const auto [a, b] = run_concat(p, 8);
  EXPECT_EQ(a.K, 4);
  EXPECT_EQ(b.K, 4);
  EXPECT_EQ((b.x0 - a.iterates.back().x_plus).norm(), 0.0);
  EXPECT_THROW(run_concat(p, 7), InvalidParameter);
  EXPECT_THROW(run_concat(p, 2), DegenerateRun);
  const ConcatSlope sl = concat_slope(p, {8, 16, 32, 64});
  EXPECT_LE(sl.slope, -3.5);
  ConcatOptions nest;
  nest.nesterov_first = true;
  EXPECT_EQ(run_concat(p, 8, nest).first.method_id, "nesterov_agm");
}

TEST(Concat, ContinuousBound) {
  const ConcatContinuous cc = concat_continuous(make_problem("quadratic:n=10,min=0.01,max=1"), 10.0, tight());
  EXPECT_LE(cc.grad_sq, cc.bound * (1 + 1e-6));
  EXPECT_DOUBLE_EQ(cc.bound, 8.0 / 1e4);
}

TEST(Output, RunRecordCsv) {
  const RunRecord rec = run_ssse(make_problem("quadratic:1,4"), 0.25, 3);
  std::ostringstream os;
  write_csv(os, rec);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,f_gap,grad_norm_sq,phi_or_u,bound,margin,x_0,x_1,z_0,z_1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}
