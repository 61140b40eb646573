// One PASS/FAIL line per acceptance criterion. Most criteria read certificates from the
// acceptance suite; the rest recompute what a certificate alone does not pin down.
#include <agmlab/lab.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

using namespace agmlab;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    pass = false;
    detail += (detail.empty() ? "" : "; ") + why;
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

class Suite {
 public:
  explicit Suite(const std::string& manifest) {
    const int jobs = std::max(1u, std::thread::hardware_concurrency());
    for (auto& r : run_suite(manifest, {}, jobs).reports) reports_.emplace(r.id, std::move(r));
  }

  const Report* find(const std::string& id) const {
    const auto it = reports_.find(id);
    return it == reports_.end() ? nullptr : &it->second;
  }

  // Every listed certificate of `id` must exist and pass.
  void require(Verdict& v, const std::string& id, const std::vector<std::string>& certs) const {
    const Report* r = find(id);
    if (!r) return v.fail(id + " missing from suite");
    if (!r->error.empty()) return v.fail(r->error);
    for (const auto& name : certs) {
      const auto it = std::find_if(r->certificates.begin(), r->certificates.end(), [&](const auto& c) { return c.id == name; });
      if (it == r->certificates.end()) v.fail(id + "/" + name + " not produced");
      else if (!it->pass) v.fail(id + "/" + name + " worst " + num(it->worst_violation) + " > tol " + num(it->tolerance));
    }
  }

  void require_samples(Verdict& v, const std::string& id, int at_least) const {
    const Report* r = find(id);
    if (!r) return;
    const int n = r->config.value("samples", 200);
    if (n < at_least) v.fail(id + " uses " + std::to_string(n) + " samples, need " + std::to_string(at_least));
  }

 private:
  std::map<std::string, Report> reports_;
};

const char* kQuad = "quadratic:n=10,min=1,max=4";
const char* kLse = "logsumexp:8x4";

IntegratorConfig defaults() { return {}; }

Verdict c1(const Suite& s) {
  Verdict v;
  s.require(v, "agm_r3_quadratic", {"conservation", "closed_form_constant"});
  s.require(v, "agm_r3_logsumexp", {"conservation", "closed_form_constant"});
  // the measured energy near t = 0 against 2‖X₀−X★‖², computed here
  double worst = 0.0;
  for (const char* key : {kQuad, kLse}) {
    const ProblemInstance p = make_problem(key);
    const double want = 2.0 * (p.x0 - p.objective.require_minimizer()).squaredNorm();
    const Trajectory tr = integrate(OdeFamily::vanishing(3), p, 0.0, 50.0, defaults(), agm_channels(p.objective, 3, 2), {1e-4, 50.0});
    for (double t : {1e-4, 50.0}) {
      const EnergyBreakdown e = energy_agm_general(3, 2, tr, 0.0, t);
      worst = std::max(worst, std::abs(e.total - want) / want);
      if (std::abs(*e.constant - want) > 1e-8 * want) v.fail(std::string(key) + " closed-form constant " + num(*e.constant));
    }
  }
  if (worst > 1e-8) v.fail("E vs 2|X0-X*|^2 off by " + num(worst));
  v.note("max |E - 2|X0-X*|^2| / 2|X0-X*|^2 = " + num(worst));
  return v;
}

Verdict c2(const Suite& s) {
  Verdict v;
  for (const char* id : {"agm_r3_quadratic", "agm_r3_logsumexp", "agm_r5_logsumexp", "agm_r2_quadratic", "rescaled_h1_power",
                         "scagm_quadratic", "gradient_flow_logsumexp"}) {
    s.require(v, id, {"rate_bound"});
    s.require_samples(v, id, 200);
  }
  return v;
}

Verdict c3(const Suite& s) {
  Verdict v;
  s.require(v, "rescaled_sbc_r5", {"conservation", "closed_form_constant"});
  const ProblemInstance p = make_problem(kQuad);
  const RescaledParams sbc = RescaledParams::sbc(5);
  const Trajectory tr = integrate(OdeFamily::vanishing(5), p, 0.0, 50.0, defaults(), rescaled_channels(p.objective, 5, sbc.alpha, sbc.beta), {1.0, 50.0});
  for (double t : {1.0, 50.0}) {
    const double E = energy_rescaled(sbc, tr, 0.0, t).total;
    if (std::abs(E - 8.0) > 1e-6 * 8.0) v.fail("E(" + num(t) + ") = " + num(E) + ", expected 8");
  }
  return v;
}

Verdict c4(const Suite& s) {
  Verdict v;
  for (const char* id : {"ogmg_r3_quadratic", "ogmg_r3_logsumexp"})
    s.require(v, id, {"terminal_bound", "speed_bound", "terminal_limit_order"});
  return v;
}

Verdict c5(const Suite& s) {
  Verdict v;
  s.require(v, "ogmg_r5_quadratic", {"terminal_bound", "terminal_limit_coefficient"});
  return v;
}

Verdict c6(const Suite& s) {
  Verdict v;
  for (const char* id : {"ogmg_r3_quadratic", "ogmg_r3_logsumexp", "ogmg_r5_quadratic"})
    s.require(v, id, {"conservation", "quadrature_self_error"});
  return v;
}

Verdict c7(const Suite& s) {
  Verdict v;
  for (const char* id : {"agm_r3_quadratic", "agm_r3_logsumexp", "ogmg_r3_quadratic", "ogmg_r3_logsumexp", "ogmg_r5_quadratic"}) {
    s.require(v, id, {"lyapunov_monotone"});
    s.require_samples(v, id, 500);
  }
  return v;
}

Verdict c8(const Suite& s) {
  Verdict v;
  for (const char* id : {"ssse_half_L", "ssse_1_L", "ssse_2_L"}) s.require(v, id, {"phi_monotone", "rate_margin_sharp"});
  // recheck at the stated slack 1e-12(1+Φ₀), with no rounding allowance
  const ProblemInstance p = make_problem(kQuad);
  const double L = p.objective.L(), d0 = (p.x0 - p.objective.require_minimizer()).squaredNorm();
  const int K = 10000;
  for (double c : {0.5, 1.0, 2.0}) {
    const double step = c / L;
    const RunRecord rec = run_ssse(p, step, K);
    const double phi0 = ssse_lyapunov(rec, 0), slack = 1e-12 * (1.0 + std::abs(phi0));
    double worst_rise = 0.0, worst_excess = -INFINITY;
    for (int k = 1; k < K; ++k) worst_rise = std::max(worst_rise, ssse_lyapunov(rec, k) - ssse_lyapunov(rec, k - 1));
    for (int k = 1; k <= K; ++k) {
      const double gap = p.objective.value(rec.iterates[k].x_plus) - p.objective.require_f_star();
      worst_excess = std::max(worst_excess, gap - (k + 0.5) / (k + 1.0) * 2.0 * d0 / (step * k * k));
    }
    if (worst_rise > slack) v.fail("s=" + num(c) + "/L phi rises by " + num(worst_rise));
    if (worst_excess > 0.0) v.fail("s=" + num(c) + "/L bound exceeded by " + num(worst_excess));
  }
  nlohmann::json wide = {{"id", "ssse_4_L"}, {"problem", "quadratic:n=10,min=0.01,max=1"}, {"mode", "discrete"},
                         {"method", "ssse"}, {"s", "4/L"}, {"K", 200}};
  const Report w = run_experiment(config_from_json(wide));
  const auto it = std::find_if(w.certificates.begin(), w.certificates.end(), [](const auto& c) { return c.id == "phi_monotone"; });
  if (it == w.certificates.end() || it->pass) v.fail("s=4/L witness did not fail phi_monotone");
  else v.note("s=4/L phi rise " + num(it->worst_violation));
  if (w.exit_code() == 0) v.fail("s=4/L witness exited 0");
  return v;
}

Verdict c9(const Suite& s) {
  Verdict v;
  for (const char* id : {"ssse_half_L", "ssse_1_L", "ssse_2_L"}) s.require(v, id, {"momentum_identity"});
  return v;
}

Verdict c10(const Suite& s) {
  Verdict v;
  Verdict mono;
  for (const char* id : {"ogmg_K8", "ogmg_K32", "ogmg_K128"}) s.require(mono, id, {"U_monotone"});
  s.require(mono, "ogmg_correspondence", {"U_monotone_K32", "U_monotone_K64", "U_monotone_K128"});
  v.note(std::string("U monotone ") + (mono.pass ? "ok" : "FAILED: " + mono.detail));
  if (!mono.pass) v.pass = false;
  Verdict order;
  s.require(order, "ogmg_correspondence", {"correspondence_order"});
  if (const Report* r = s.find("ogmg_correspondence"))
    for (const auto& c : r->certificates)
      if (c.id == "correspondence_order") v.note("observed order " + num(1.0 - c.worst_violation) + " (need >= 1)");
  if (!order.pass) v.pass = false;
  return v;
}

Verdict c11(const Suite& s) {
  Verdict v;
  s.require(v, "oblg_coincidence", {"coincidence_order"});
  if (const Report* r = s.find("oblg_coincidence"))
    for (const auto& c : r->certificates)
      if (c.id == "coincidence_order") v.note("observed order " + num(0.9 - c.worst_violation));
  return v;
}

Verdict c12(const Suite& s) {
  Verdict v;
  s.require(v, "concat", {"discrete_slope", "continuous_bound"});
  return v;
}

Verdict c13(const Suite& s) {
  Verdict v;
  s.require(v, "agm_r3_quadratic", {"hamiltonian_identity"});
  const ProblemInstance p = make_problem(kQuad);
  IntegratorConfig ic;
  ic.rel_tol = 1e-12;
  ic.abs_tol = 1e-14;
  const Trajectory tr = integrate(OdeFamily::vanishing(3), p, 0.0, 50.0, ic);
  double biggest = 0.0, worst = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double t = 50.0 * i / 101.0;
    const HamiltonianSample h = hamiltonian_check(tr, p.objective.require_minimizer(), t);
    biggest = std::max(biggest, std::abs(h.dH_dt));
    worst = std::max(worst, std::abs(h.dH_dt - h.partial_t_H) / (1.0 + std::abs(h.dH_dt)));
  }
  if (worst > 1e-6) v.fail("identity residual " + num(worst));
  if (!(biggest > 1e-3)) v.fail("max |dH/dt| = " + num(biggest) + " does not witness non-conservation");
  v.note("residual " + num(worst) + ", max |dH/dt| " + num(biggest));
  return v;
}

Verdict c14(const Suite& s) {
  Verdict v;
  for (const char* id : {"agm_r3_quadratic", "agm_r3_logsumexp", "rescaled_h1_power"})
    s.require(v, id, {"oracle_convexity", "oracle_smoothness", "oracle_gradient_order"});
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g(0.0, 0.5);
  for (const char* key : {"quadratic:1,4", kQuad, kLse, "power:p=4,n=2"}) {
    const Objective f = make_objective(key);
    if (!sample_convexity(f, 1000, 14).pass) v.fail(std::string(key) + " convexity sampling");
    if (!sample_smoothness(f, 1000, 15).pass) v.fail(std::string(key) + " smoothness sampling");
    Vec x = f.require_minimizer();
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += g(rng);
    const GradientOrderReport r = gradient_order(f, x);
    if (!r.exact && r.observed_order < 1.9) v.fail(std::string(key) + " gradient order " + num(r.observed_order));
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string manifest = argc > 1 ? argv[1] : std::string(AGMLAB_SOURCE_DIR) + "/configs/acceptance/manifest.json";
  const Suite suite(manifest);
  const std::vector<std::pair<std::string, std::function<Verdict(const Suite&)>>> criteria = {
      {"AGM r=3 conservation and closed-form limit", c1},
      {"rate bounds along trajectories", c2},
      {"rescaled law r=5 constant equals 8", c3},
      {"OGM-G r=-3 terminal bound and limits", c4},
      {"OGM-G r=-5 terminal bound and limit coefficient", c5},
      {"OGM-G energy conservation", c6},
      {"Lyapunov monotonicity", c7},
      {"SSSE Lyapunov and rate margin, s=4/L witness", c8},
      {"conjugate-momentum identity", c9},
      {"discrete OGM-G monotonicity and correspondence order", c10},
      {"OBL-G / OGM-G ODE coincidence", c11},
      {"concatenation bound and slope", c12},
      {"Hamiltonian identity", c13},
      {"oracle hygiene", c14},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second(suite);
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    failed += !v.pass;
    std::printf("%s %2zu  %s", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str());
    if (!v.detail.empty()) std::printf("  [%s]", v.detail.c_str());
    std::printf("\n");
  }
  std::printf("%zu/%zu criteria pass\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
