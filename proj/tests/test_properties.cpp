// Randomized invariants. Every generator is seeded so failures reproduce.
#include <agmlab/lab.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace agmlab;

namespace {

const char* const kProblems[] = {"quadratic:1,4", "quadratic:n=10,min=0.01,max=1", "logsumexp:8x4", "power:p=4,n=2"};

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

double uniform(std::mt19937_64& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

// A random start at distance `radius` from the minimizer.
ProblemInstance random_start(const std::string& key, std::mt19937_64& rng, double radius) {
  const Objective f = make_objective(key);
  const Vec d = random_vec(rng, f.dim());
  return make_problem(key, Vec(f.require_minimizer() + radius * d / d.norm()));
}

IntegratorConfig tight() {
  IntegratorConfig c;
  c.rel_tol = 1e-12;
  c.abs_tol = 1e-14;
  return c;
}

}  // namespace

TEST(FrameProperty, RoundTripIsIdentity) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec c = random_vec(rng, 3);
    const double t = uniform(rng, 0.1, 4.0);
    const DilatedFrame frames[] = {DilatedFrame::power(uniform(rng, -2.0, 3.0), c),
                                   DilatedFrame::power_terminal(uniform(rng, -2.0, 3.0), 5.0, c),
                                   DilatedFrame::exponential(uniform(rng, -1.0, 1.0), c)};
    const Vec X = random_vec(rng, 3), V = random_vec(rng, 3);
    for (const auto& fr : frames) {
      const auto [W, Wd] = to_dilated(fr, t, X, V);
      const auto [X2, V2] = from_dilated(fr, t, W, Wd);
      EXPECT_LE((X2 - X).norm(), 1e-12 * (1.0 + X.norm()));
      EXPECT_LE((V2 - V).norm(), 1e-11 * (1.0 + V.norm()));
    }
  }
}

TEST(ObjectiveProperty, ConvexityGapIsNonnegativeAndCocoercive) {
  std::mt19937_64 rng(202);
  for (const char* key : kProblems) {
    const Objective f = make_objective(key);
    const Vec xs = f.require_minimizer();
    for (int trial = 0; trial < 300; ++trial) {
      const Vec x = xs + random_vec(rng, f.dim(), 0.3), y = xs + random_vec(rng, f.dim(), 0.3);
      const double gap = convexity_gap(f, x, y);
      EXPECT_GE(gap, -1e-12 * (1.0 + std::abs(f.value(x)))) << key;
      // L-smooth convex: gap ≥ ‖∇f(x) − ∇f(y)‖²/(2L)
      const double lower = (f.gradient(x) - f.gradient(y)).squaredNorm() / (2.0 * f.L());
      EXPECT_GE(gap, lower - 1e-10 * (1.0 + std::abs(f.value(x)))) << key;
    }
  }
}

TEST(ObjectiveProperty, MinimizerIsBelowRandomPoints) {
  std::mt19937_64 rng(203);
  for (const char* key : kProblems) {
    const Objective f = make_objective(key);
    for (int trial = 0; trial < 200; ++trial)
      EXPECT_GE(f.value(f.require_minimizer() + random_vec(rng, f.dim(), 0.5)), f.require_f_star() - 1e-13) << key;
  }
}

TEST(ConservationProperty, AgmR3AcrossRandomStarts) {
  std::mt19937_64 rng(303);
  for (const char* key : kProblems) {
    for (int trial = 0; trial < 3; ++trial) {
      const ProblemInstance p = random_start(key, rng, uniform(rng, 0.2, 1.0));
      const std::vector<double> ts = {0.5, 2.0, 8.0, 20.0};
      const Trajectory tr = integrate(OdeFamily::vanishing(3), p, 0.0, 20.0, tight(), agm_channels(p.objective, 3, 2), ts);
      for (double t : ts) {
        const EnergyBreakdown e = energy_agm_r3(tr, t);
        EXPECT_NEAR(e.total, *e.constant, 1e-7 * std::max(1.0, *e.constant)) << key << " t=" << t;
      }
    }
  }
}

TEST(ConservationProperty, GradientFlowAcrossRandomStarts) {
  std::mt19937_64 rng(304);
  for (const char* key : kProblems) {
    for (int trial = 0; trial < 3; ++trial) {
      const ProblemInstance p = random_start(key, rng, uniform(rng, 0.2, 1.0));
      const Trajectory tr =
          integrate(OdeFamily::gradient_flow(), p, 0.0, 10.0, tight(), gradient_flow_channels(p.objective), {1.0, 10.0});
      for (double t : {1.0, 10.0}) {
        const EnergyBreakdown e = energy_gradient_flow(tr, t);
        EXPECT_NEAR(e.total, *e.constant, 1e-8) << key << " t=" << t;
      }
    }
  }
}

TEST(ConservationProperty, GapChannelsNeverNegative) {
  std::mt19937_64 rng(305);
  for (const char* key : kProblems) {
    const ProblemInstance p = random_start(key, rng, 0.8);
    const Trajectory tr = integrate(OdeFamily::vanishing(3), p, 0.0, 15.0, {}, agm_channels(p.objective, 3, 2));
    EXPECT_TRUE(sign_certificate("gap", tr, agm_gap_channel(2.0)).pass) << key;
  }
}

TEST(CertificateProperty, MonotoneSeriesPassesAndBumpIsMeasured) {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<double, double>> s;
    double v = uniform(rng, 0.0, 10.0);
    for (int i = 0; i < 20; ++i) {
      s.emplace_back(i, v);
      v -= uniform(rng, 0.0, 1.0);
    }
    EXPECT_TRUE(monotone_certificate("m", s, 0.0).pass);
    const double bump = uniform(rng, 1e-3, 1.0);
    auto bumped = s;
    const std::size_t at = 1 + static_cast<std::size_t>(uniform(rng, 0.0, 18.0));
    bumped[at].second = bumped[at - 1].second + bump;
    const Certificate c = monotone_certificate("m", bumped, 0.0);
    EXPECT_FALSE(c.pass);
    EXPECT_NEAR(c.worst_violation, bump, 1e-12);
    EXPECT_TRUE(monotone_certificate("m", bumped, bump + 1e-12).pass);
  }
}

TEST(CertificateProperty, ConservationViolationIsRelativeDeviation) {
  std::mt19937_64 rng(405);
  for (int trial = 0; trial < 100; ++trial) {
    const double ref = uniform(rng, -50.0, 50.0), dev = uniform(rng, 0.0, 1e-3);
    const std::vector<std::pair<double, double>> s = {{0.0, ref}, {1.0, ref + dev}, {2.0, ref - 0.5 * dev}};
    EXPECT_NEAR(conservation_certificate("c", s, 1.0).worst_violation, dev / std::max(1.0, std::abs(ref)), 1e-15);
  }
}

TEST(DiscreteProperty, SsseLyapunovMonotoneForStepsUpToTwoOverL) {
  std::mt19937_64 rng(505);
  for (const char* key : kProblems) {
    const ProblemInstance p = random_start(key, rng, 1.0);
    const double L = p.objective.L();
    for (int trial = 0; trial < 4; ++trial) {
      const double s = uniform(rng, 0.05, 2.0) / L;
      const RunRecord rec = run_ssse(p, s, 300);
      const auto& floor = rec.series("phi_rounding");
      double prev = ssse_lyapunov(rec, 0);
      for (int k = 1; k < 300; ++k) {
        const double phi = ssse_lyapunov(rec, k);
        EXPECT_LE(phi, prev + floor[k] + floor[k - 1]) << key << " s·L=" << s * L << " k=" << k;
        prev = phi;
      }
      EXPECT_GE(ssse_rate_margin(rec, 299).plain_margin, 0.0) << key;
    }
  }
}

TEST(DiscreteProperty, OgmgGradientNeverGrowsOnRandomQuadratics) {
  std::mt19937_64 rng(506);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> eig(5);
    for (auto& e : eig) e = std::exp(uniform(rng, std::log(1e-3), 0.0));
    const Objective f = make_quadratic(eig);
    const ProblemInstance p(f, random_vec(rng, 5), "random_quadratic");
    const int K = 4 + static_cast<int>(uniform(rng, 0.0, 60.0));
    const RunRecord rec = run_ogmg(p, K);
    EXPECT_LE(f.gradient(rec.x_final()).norm(), f.gradient(p.x0).norm() * (1 + 1e-12)) << "K=" << K;
    for (int k = 2; k <= K; ++k) EXPECT_LE(ogmg_lyapunov(rec, k), ogmg_lyapunov(rec, k - 1) * (1 + 1e-10) + 1e-15);
  }
}

TEST(LabProperty, TolScaleOnlyTurnsFailuresIntoPasses) {
  const nlohmann::json j = {{"problem", "quadratic:n=10,min=0.01,max=1"}, {"mode", "discrete"}, {"method", "ssse"},
                            {"s", "4/L"}, {"K", 200}};
  const ExperimentConfig c = config_from_json(j);
  std::vector<bool> prev;
  for (double scale : {1e-3, 1.0, 1e3, 1e300}) {
    const Report r = run_experiment(c, {"", scale});
    std::vector<bool> now;
    for (const auto& cert : r.certificates) now.push_back(cert.pass);
    for (std::size_t i = 0; i < prev.size(); ++i)
      if (prev[i]) EXPECT_TRUE(now[i]) << r.certificates[i].id << " scale=" << scale;
    prev = now;
  }
}

TEST(LabProperty, SeedChangesOracleSamplesNotVerdict) {
  nlohmann::json j = {{"problem", "logsumexp:8x4"}, {"mode", "ode"}, {"law", "agm_r3"}, {"T", 10}, {"oracle_checks", true}};
  for (int seed : {1, 2, 3}) {
    j["seed"] = seed;
    EXPECT_EQ(run_experiment(config_from_json(j)).status, Report::Status::Pass) << seed;
  }
}
