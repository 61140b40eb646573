#pragma once

// Config-driven experiment runner: strict JSON configs, certificates, CSV and
// JSON reports, and a parallel suite driver.

#include <agmlab/conservation.hpp>
#include <agmlab/discrete.hpp>
#include <agmlab/dynamics.hpp>
#include <agmlab/errors.hpp>
#include <agmlab/problems.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace agmlab {

inline constexpr const char* kArtifactVersion = "0.1.0";

enum class Mode { Ode, Discrete, Concat, Correspondence };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Ode: return "ode";
    case Mode::Discrete: return "discrete";
    case Mode::Concat: return "concat";
    case Mode::Correspondence: return "correspondence";
  }
  return "?";
}

/// Step size given either absolutely or as a multiple of 1/L ("2/L").
struct StepSpec {
  double value = 0.0;
  bool per_L = false;
  double resolve(double L) const { return per_L ? value / L : value; }
};

struct ExperimentConfig {
  std::string id;
  std::string problem;
  std::optional<std::vector<double>> x0;
  Mode mode = Mode::Ode;
  std::string law;     // ode mode
  std::string method;  // discrete / correspondence mode
  std::optional<double> r, alpha, gamma, mu, T, t0, t_min;
  std::optional<StepSpec> s;
  std::vector<int> K;
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  int samples = 200;
  std::uint64_t seed = 7;
  bool oracle_checks = false;
  std::string out_dir;
  std::vector<std::string> warnings;
  nlohmann::json raw;
};

struct LawInfo {
  std::string id;
  Mode mode;
  std::vector<std::string> required;
  std::vector<std::string> optional;
  std::string summary;
};

inline const std::vector<LawInfo>& law_catalog() {
  static const std::vector<LawInfo> laws = {
      {"agm_r3", Mode::Ode, {"T"}, {"t_min"}, "r=3 flow: E = 2|X0-X*|^2, Lyapunov, 2|X0-X*|^2/t^2 bound, Hamiltonian identity"},
      {"agm_general", Mode::Ode, {"r", "alpha", "T"}, {"t0", "t_min"}, "general (r, alpha) law; t0 omitted selects the t0->0 limit"},
      {"agm_r_gt3", Mode::Ode, {"r", "T"}, {"t_min"}, "r>3 law, E = (5-r)|X0-X*|^2, (r-1)|X0-X*|^2/t^2 bound"},
      {"agm_r_lt3", Mode::Ode, {"r", "t0", "T"}, {}, "0<=r<3 law with alpha=2r/3 from t0, E/t^(2r/3) bound"},
      {"rescaled_h1", Mode::Ode, {"r", "gamma", "t0", "T"}, {}, "rescaled law, H1(gamma) preset, E/t^(2 gamma r/(gamma+2)) bound"},
      {"rescaled_sbc", Mode::Ode, {"r", "T"}, {"t_min"}, "rescaled law with (alpha, beta) = (r-1, 3-r), E = (r-1)^2/2 |X0-X*|^2"},
      {"scagm", Mode::Ode, {"mu", "T"}, {}, "constant damping 2 sqrt(mu): E = f(X0)-f*, exponential bound"},
      {"gradient_flow", Mode::Ode, {"T"}, {}, "gradient flow: E = -|X0-X*|^2/2, |X0-X*|^2/(2t) bound"},
      {"ogmg", Mode::Ode, {"r", "T"}, {"alpha"}, "OGM-G flow: terminal analysis, energy about X(T), Lyapunov, terminal bounds"},
      {"ssse", Mode::Discrete, {"s", "K"}, {}, "semi-second-order symplectic Euler: Phi_k, rate margins, momentum identity"},
      {"ogmg", Mode::Discrete, {"K"}, {}, "OGM-G (z-form): U_k monotonicity, gradient decrease"},
      {"oblg", Mode::Discrete, {"K"}, {}, "OBL-G flat: gradient decrease"},
      {"nesterov_agm", Mode::Discrete, {"K"}, {}, "Nesterov AGM baseline: classical 2L|X0-X*|^2/(K+1)^2 envelope"},
      {"concat", Mode::Concat, {"K", "T"}, {"s"}, "SSSE + OGM-G slope over K list; AGM flow + OGM-G flow 8|X0-X*|^2/T^4 bound"},
      {"ogmg", Mode::Correspondence, {"K", "T"}, {}, "U_k/(2h^2) vs continuous Lyapunov, refinement order >= 1"},
      {"oblg", Mode::Correspondence, {"K", "T"}, {}, "OBL-G flat iterates vs r=-3 OGM-G flow, refinement order >= 0.9"},
  };
  return laws;
}

// ---------------------------------------------------------------------------
// Config loading

namespace detail {

inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline std::optional<StepSpec> parse_step(const nlohmann::json& v, std::vector<std::string>& errors) {
  if (v.is_number()) return StepSpec{v.get<double>(), false};
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto slash = s.find("/L");
    if (slash != std::string::npos && slash + 2 == s.size()) {
      try {
        std::size_t used = 0;
        const double num = std::stod(s.substr(0, slash), &used);
        if (used == slash) return StepSpec{num, true};
      } catch (const std::exception&) {
      }
    }
  }
  errors.push_back("s: expected a number or a string of the form \"<c>/L\"");
  return std::nullopt;
}

}  // namespace detail

/// Validates a parsed JSON object into a config. Every problem is collected before throwing.
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::string& fallback_id = "experiment") {
  if (!j.is_object()) throw ConfigurationError("config must be a JSON object");
  static const std::set<std::string> known = {"id",      "problem", "x0",      "mode",    "law",     "method",
                                              "r",       "alpha",   "gamma",   "mu",      "s",       "K",
                                              "T",       "t0",      "t_min",   "rel_tol", "abs_tol", "samples",
                                              "seed",    "oracle_checks", "out"};
  std::vector<std::string> errors;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) errors.push_back("unknown key '" + it.key() + "'");

  ExperimentConfig c;
  c.raw = j;
  c.id = fallback_id;
  auto num = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_number()) {
      errors.push_back(std::string(key) + ": expected a number");
      return std::nullopt;
    }
    return j[key].get<double>();
  };
  auto str = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_string()) {
      errors.push_back(std::string(key) + ": expected a string");
      return std::nullopt;
    }
    return j[key].get<std::string>();
  };

  if (auto v = str("id")) c.id = *v;
  if (auto v = str("problem")) c.problem = *v;
  else if (!j.contains("problem")) errors.push_back("problem: required");
  if (j.contains("x0")) {
    if (!j["x0"].is_array() || !std::all_of(j["x0"].begin(), j["x0"].end(), [](const auto& e) { return e.is_number(); }))
      errors.push_back("x0: expected an array of numbers");
    else
      c.x0 = j["x0"].get<std::vector<double>>();
  }
  const auto mode = str("mode");
  if (!mode && !j.contains("mode")) errors.push_back("mode: required (ode, discrete, concat, correspondence)");
  if (mode) {
    if (*mode == "ode") c.mode = Mode::Ode;
    else if (*mode == "discrete") c.mode = Mode::Discrete;
    else if (*mode == "concat") c.mode = Mode::Concat;
    else if (*mode == "correspondence") c.mode = Mode::Correspondence;
    else errors.push_back("mode: unknown value '" + *mode + "'");
  }
  if (auto v = str("law")) c.law = *v;
  if (auto v = str("method")) c.method = *v;
  c.r = num("r");
  c.alpha = num("alpha");
  c.gamma = num("gamma");
  c.mu = num("mu");
  c.T = num("T");
  c.t0 = num("t0");
  c.t_min = num("t_min");
  if (j.contains("s")) c.s = detail::parse_step(j["s"], errors);
  if (j.contains("K")) {
    const auto& k = j["K"];
    if (k.is_number_integer()) c.K = {k.get<int>()};
    else if (k.is_array() && std::all_of(k.begin(), k.end(), [](const auto& e) { return e.is_number_integer(); }))
      c.K = k.get<std::vector<int>>();
    else errors.push_back("K: expected an integer or an array of integers");
  }
  if (auto v = num("rel_tol")) c.rel_tol = *v;
  if (auto v = num("abs_tol")) c.abs_tol = *v;
  if (auto v = num("samples")) c.samples = static_cast<int>(*v);
  if (auto v = num("seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (j.contains("oracle_checks")) {
    if (!j["oracle_checks"].is_boolean()) errors.push_back("oracle_checks: expected a boolean");
    else c.oracle_checks = j["oracle_checks"].get<bool>();
  }
  if (auto v = str("out")) c.out_dir = *v;

  // Which law / method, and its required parameters.
  const std::string& key = c.mode == Mode::Ode ? c.law : c.mode == Mode::Concat ? std::string("concat") : c.method;
  if (c.mode == Mode::Ode && c.law.empty()) errors.push_back("law: required in ode mode");
  if ((c.mode == Mode::Discrete || c.mode == Mode::Correspondence) && c.method.empty())
    errors.push_back("method: required in " + std::string(mode_name(c.mode)) + " mode");
  if (c.mode == Mode::Ode && !c.method.empty()) errors.push_back("method: not used in ode mode (use law)");
  if (c.mode != Mode::Ode && !c.law.empty()) errors.push_back("law: only used in ode mode");
  const LawInfo* info = nullptr;
  for (const auto& l : law_catalog())
    if (l.id == key && l.mode == c.mode) info = &l;
  if (!key.empty() && !info) errors.push_back("unknown " + std::string(c.mode == Mode::Ode ? "law" : "method") + " '" + key + "' for mode " + mode_name(c.mode));
  if (info) {
    for (const auto& p : info->required)
      if (!j.contains(p)) errors.push_back(p + ": required by " + key);
    static const std::vector<std::string> params = {"r", "alpha", "gamma", "mu", "s", "K", "T", "t0", "t_min"};
    for (const auto& p : params) {
      if (!j.contains(p)) continue;
      const bool allowed = std::count(info->required.begin(), info->required.end(), p) ||
                           std::count(info->optional.begin(), info->optional.end(), p);
      if (!allowed) errors.push_back(p + ": not a parameter of " + key);
    }
  }

  // Regime rules.
  if (c.mode == Mode::Ode && c.r) {
    const double r = *c.r;
    if (c.law == "agm_r_gt3" && !(r > 3.0)) errors.push_back("r must exceed 3");
    if (c.law == "agm_r_lt3" && !(r >= 0.0 && r < 3.0)) errors.push_back("r must lie in [0, 3)");
    if (c.law == "ogmg" && !(r < 0.0)) errors.push_back("r must be negative for ogmg");
    if (c.law == "ogmg" && r == -1.0) errors.push_back("r = -1 is excluded for ogmg");
    if ((c.law == "agm_general" || c.law == "rescaled_h1" || c.law == "rescaled_sbc") && !(r > -1.0))
      errors.push_back("r must exceed -1");
  }
  if (c.gamma && *c.gamma < 1.0) errors.push_back("gamma must be >= 1");
  if (c.mu && !(*c.mu > 0.0)) errors.push_back("mu must be positive");
  if (c.T && !(*c.T > 0.0)) errors.push_back("T must be positive");
  if (c.t0 && !(*c.t0 > 0.0)) errors.push_back("t0 must be positive");
  if (c.T && c.t0 && *c.t0 >= *c.T) errors.push_back("t0 must be below T");
  if (c.s && !(c.s->value > 0.0)) errors.push_back("s must be positive");
  for (int k : c.K)
    if (k <= 0) errors.push_back("K entries must be positive");
  if (c.mode == Mode::Discrete && c.K.size() > 1) errors.push_back("K: discrete mode takes a single integer");
  if (c.mode == Mode::Concat)
    for (int k : c.K)
      if (k < 4 || k % 2) errors.push_back("K: concat totals must be even and >= 4");
  if ((c.mode == Mode::Concat || c.mode == Mode::Correspondence) && !c.K.empty() && c.K.size() < 2)
    errors.push_back("K: " + std::string(mode_name(c.mode)) + " mode needs at least two values");
  if (c.samples < 2) errors.push_back("samples must be >= 2");
  if (!(c.rel_tol > 0.0) || !(c.abs_tol > 0.0)) errors.push_back("tolerances must be positive");

  if (!errors.empty()) {
    std::string msg = "invalid config '" + c.id + "':";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigurationError(msg);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigurationError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON parse error: " +
                             e.what());
  }
  return config_from_json(j, std::filesystem::path(path).stem().string());
}

// ---------------------------------------------------------------------------
// Reports

struct CertificateEntry {
  std::string id;
  bool pass = false;
  double worst_violation = 0.0;
  double tolerance = 0.0;
  double runtime_s = 0.0;
  std::string note;
};

struct Report {
  enum class Status { Pass, CertificateFailure, ConfigError, RuntimeError };
  std::string id;
  Status status = Status::Pass;
  std::vector<CertificateEntry> certificates;
  std::vector<std::string> warnings;
  std::string error;
  nlohmann::json config;
  double runtime_s = 0.0;

  bool all_pass() const {
    return std::all_of(certificates.begin(), certificates.end(), [](const auto& c) { return c.pass; });
  }
  void settle() {
    if (status == Status::Pass && !all_pass()) status = Status::CertificateFailure;
  }
  int exit_code() const { return static_cast<int>(status); }
};

inline const char* status_name(Report::Status s) {
  switch (s) {
    case Report::Status::Pass: return "pass";
    case Report::Status::CertificateFailure: return "certificate_failure";
    case Report::Status::ConfigError: return "config_error";
    case Report::Status::RuntimeError: return "runtime_error";
  }
  return "?";
}

inline nlohmann::json to_json(const Report& r) {
  nlohmann::json certs = nlohmann::json::array();
  for (const auto& c : r.certificates) {
    nlohmann::json e{{"id", c.id}, {"pass", c.pass}, {"tolerance", c.tolerance}, {"runtime_s", c.runtime_s}};
    if (std::isfinite(c.worst_violation)) e["worst_violation"] = c.worst_violation;
    else e["worst_violation"] = "inf";
    if (!c.note.empty()) e["note"] = c.note;
    certs.push_back(std::move(e));
  }
  nlohmann::json j{{"artifact_version", kArtifactVersion},
                   {"id", r.id},
                   {"status", status_name(r.status)},
                   {"pass", r.status == Report::Status::Pass},
                   {"certificates", certs},
                   {"warnings", r.warnings},
                   {"config", r.config},
                   {"runtime_s", r.runtime_s}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

struct RunOptions {
  std::string out_dir;     // overrides the config's "out"; empty with no config value disables files
  double tol_scale = 1.0;  // multiplies every certificate tolerance
};

// ---------------------------------------------------------------------------
// Experiment execution

namespace detail {

class Recorder {
 public:
  Recorder(Report& rep, double scale) : rep_(rep), scale_(scale) {}

  // Runs `fn` (which returns a Certificate with its nominal tolerance) and records it.
  void add(const std::function<Certificate()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Certificate c = fn();
    const double rt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.tolerance *= scale_;
    c.pass = c.worst_violation <= c.tolerance;
    rep_.certificates.push_back({c.id, c.pass, c.worst_violation, c.tolerance, rt, c.note});
  }

  // Threshold certificates: value must be ≤ limit (e.g. slopes, negated orders).
  void add_threshold(const std::string& id, double value, double limit, const std::string& note = {}) {
    Certificate c{id, Certificate::Kind::BoundHolds, {}, value, limit, value <= limit, note};
    add([c] { return c; });
  }

 private:
  Report& rep_;
  double scale_;
};

inline std::vector<double> grid(double a, double b, int n) { return uniform_grid(a, b, n); }

inline std::filesystem::path experiment_dir(const ExperimentConfig& c, const RunOptions& o) {
  const std::string base = !o.out_dir.empty() ? o.out_dir : c.out_dir;
  if (base.empty()) return {};
  std::filesystem::path p = std::filesystem::path(base) / c.id;
  std::filesystem::create_directories(p);
  return p;
}

template <class Writer>
inline void write_file(const std::filesystem::path& dir, const std::string& name, Writer w) {
  if (dir.empty()) return;
  std::ofstream os(dir / name);
  if (!os) throw Error("cannot write " + (dir / name).string());
  w(os);
}

inline double dist0_sq(const ProblemInstance& p) { return (p.x0 - p.objective.require_minimizer()).squaredNorm(); }

inline void add_oracle_checks(Recorder& rec, const ProblemInstance& p, std::uint64_t seed) {
  const Objective& obj = p.objective;
  rec.add([&] {
    const SampleCheck s = sample_convexity(obj, 1000, seed);
    return Certificate{"oracle_convexity", Certificate::Kind::BoundHolds, {}, -s.worst, 1e-12, s.pass, "min slack, sign flipped"};
  });
  rec.add([&] {
    const SampleCheck s = sample_smoothness(obj, 1000, seed + 1);
    return Certificate{"oracle_smoothness", Certificate::Kind::BoundHolds, {}, s.worst, 1e-10, s.pass, "max ratio excess"};
  });
  rec.add([&] {
    const GradientOrderReport g = gradient_order(obj, p.x0);
    const double v = g.exact ? 0.0 : 1.9 - g.observed_order;
    return Certificate{"oracle_gradient_order", Certificate::Kind::BoundHolds, {}, v, 0.0, v <= 0.0,
                       g.exact ? "finite differences exact to rounding" : "1.9 minus observed order"};
  });
  if (obj.minimizer()) {
    rec.add([&] {
      const SampleCheck s = check_metadata(obj);
      return Certificate{"oracle_metadata", Certificate::Kind::BoundHolds, {}, s.worst, 1.0, s.pass,
                         "worst of gradient/f_star residual over its tolerance"};
    });
  }
}

// Bound checks f(X(t)) − f★ ≤ bound(t) along the sample grid.
inline Certificate bound_along(const std::string& id, const Trajectory& tr, const std::vector<double>& ts,
                               const std::function<double(double)>& bound) {
  const Objective& obj = tr.objective();
  const double fs = obj.require_f_star();
  std::vector<std::tuple<double, double, double>> pts;
  for (double t : ts) {
    if (!(t > 0.0)) continue;
    pts.emplace_back(t, obj.value(dense_eval(tr, t).first) - fs, bound(t));
  }
  return bound_certificate(id, pts, 1e-9);
}

inline void run_ode(const ExperimentConfig& c, const ProblemInstance& p, Recorder& rec, Report& rep,
                    const std::filesystem::path& dir) {
  const Objective& obj = p.objective;
  IntegratorConfig ic;
  ic.rel_tol = c.rel_tol;
  ic.abs_tol = c.abs_tol;
  const double T = *c.T;
  const std::string& law = c.law;
  std::vector<EnergyBreakdown> ledger;
  auto ledger_for = [&](const std::vector<double>& ts, const std::function<EnergyBreakdown(double)>& f) {
    ledger.clear();
    for (double t : ts) ledger.push_back(f(t));
  };
  auto emit = [&](const Trajectory& tr) {
    write_file(dir, "trajectory.csv", [&](std::ostream& os) { write_csv(os, tr, true); });
    write_file(dir, "energy.csv", [&](std::ostream& os) { write_energy_csv(os, ledger); });
  };
  const double d0 = dist0_sq(p);

  if (law == "agm_r3" || law == "agm_general" || law == "agm_r_gt3" || law == "rescaled_sbc") {
    const double r = law == "agm_r3" ? 3.0 : *c.r;
    const double alpha = law == "agm_general" ? *c.alpha : 2.0;
    const bool limit = !c.t0;
    const double tlo = c.t0 ? *c.t0 : c.t_min.value_or(1e-4 * std::min(1.0, T));
    std::vector<AccumulatorSpec> ch;
    RescaledParams sbc = RescaledParams::sbc(r);
    if (law == "rescaled_sbc") ch = rescaled_channels(obj, r, sbc.alpha, sbc.beta);
    else if (law == "agm_r_gt3") ch = merge_channels({r_gt3_channels(obj, r), agm_channels(obj, r, 2.0)});
    else ch = agm_channels(obj, r, alpha);
    const auto ts = grid(tlo, T, c.samples);
    const Trajectory tr = integrate(OdeFamily::vanishing(r), p, limit ? 0.0 : *c.t0, T, ic, ch, ts);
    if (law == "rescaled_sbc") ledger_for(ts, [&](double t) { return energy_rescaled(sbc, tr, 0.0, t); });
    else if (law == "agm_r_gt3") ledger_for(ts, [&](double t) { return energy_agm_r_gt3(r, tr, t); });
    else ledger_for(ts, [&](double t) { return energy_agm_general(r, alpha, tr, limit ? 0.0 : *c.t0, t); });
    rec.add([&] { return conservation_certificate("conservation", ledger, 1e-6); });
    if (ledger.front().constant) {
      const double E = *ledger.front().constant;
      rec.add([&] {
        Certificate cc = conservation_certificate("closed_form_constant", ledger, 1e-6, E);
        cc.note = "total against the closed-form constant";
        return cc;
      });
    }
    rec.add([&] {
      return sign_certificate("sign_convexity_integrand", tr,
                              law == "rescaled_sbc" ? rescaled_residual_channel(sbc.alpha, sbc.beta) : agm_gap_channel(alpha));
    });
    if (law == "agm_r_gt3") rec.add([&] { return sign_certificate("sign_dissipation_integrand", tr, r_gt3_dissipation_channel(r)); });
    if (law == "agm_r3" || (law == "agm_general" && r == 3.0 && alpha == 2.0 && limit)) {
      rec.add([&] {
        std::vector<std::pair<double, double>> s;
        const Vec& xs = obj.require_minimizer();
        for (double t : ts) {
          const auto [X, V] = dense_eval(tr, t);
          s.emplace_back(t, lyapunov_agm(t, X, V, xs, obj.value(X) - obj.require_f_star()));
        }
        const double tol = 1e-9 * std::max(std::abs(s.front().second), 1e-12);
        return monotone_certificate("lyapunov_monotone", std::move(s), tol);
      });
      rec.add([&] {
        return bound_along("rate_bound", tr, ts, [&](double t) { return rate_bound(BoundLaw::AgmR3, {}, t, {d0, {}}); });
      });
      rec.add([&] {
        const Vec& xs = obj.require_minimizer();
        // the difference quotient needs a tighter reference than the conservation checks
        IntegratorConfig hc = ic;
        hc.rel_tol = std::min(ic.rel_tol, 1e-12);
        hc.abs_tol = std::min(ic.abs_tol, 1e-14);
        const Trajectory ref = integrate(OdeFamily::vanishing(3.0), p, 0.0, T, hc);
        double worst = 0.0, biggest = 0.0;
        for (int i = 1; i <= 100; ++i) {
          const double t = tlo + (T - tlo) * (0.05 + 0.9 * i / 101.0);
          const HamiltonianSample h = hamiltonian_check(ref, xs, t);
          worst = std::max(worst, std::abs(h.dH_dt - h.partial_t_H) / (1.0 + std::abs(h.dH_dt)));
          biggest = std::max(biggest, std::abs(h.dH_dt));
        }
        Certificate cc{"hamiltonian_identity", Certificate::Kind::BoundHolds, {}, worst, 1e-6, false, {}};
        cc.note = "max |dH/dt| = " + fmt_param(biggest);
        return cc;
      });
    }
    if (law == "agm_r_gt3")
      rec.add([&] {
        return bound_along("rate_bound", tr, ts, [&](double t) { return rate_bound(BoundLaw::AgmRGt3, {r}, t, {d0, {}}); });
      });
    emit(tr);
    return;
  }

  if (law == "agm_r_lt3" || law == "rescaled_h1") {
    const double r = *c.r, t0 = *c.t0;
    const auto ts = grid(t0, T, c.samples);
    std::optional<RescaledParams> rp;
    std::vector<AccumulatorSpec> ch;
    if (law == "rescaled_h1") {
      rp = RescaledParams::h1(r, *c.gamma);
      if (rp->warning) rep.warnings.push_back("r exceeds 1 + 2/gamma: terms may be negative, no bound certificate");
      ch = rescaled_channels(obj, r, rp->alpha, rp->beta);
    } else {
      ch = r_lt3_channels(obj, r);
    }
    const Trajectory tr = integrate(OdeFamily::vanishing(r), p, t0, T, ic, ch, ts);
    if (rp) ledger_for(ts, [&](double t) { return energy_rescaled(*rp, tr, t0, t); });
    else ledger_for(ts, [&](double t) { return energy_agm_r_lt3(r, tr, t0, t); });
    rec.add([&] { return conservation_certificate("conservation", ledger, 1e-6); });
    const double E = *ledger.front().constant;
    if (!rp || !rp->warning) {
      rec.add([&] {
        return bound_along("rate_bound", tr, ts, [&](double t) {
          return rp ? rate_bound(BoundLaw::H1, {r, *c.gamma, {}, E}, t, {}) : rate_bound(BoundLaw::AgmRLt3, {r, {}, {}, E}, t, {});
        });
      });
    }
    if (!rp)
      rec.add([&] { return sign_certificate("sign_convexity_integrand", tr, agm_gap_channel(2.0 * r / 3.0)); });
    emit(tr);
    return;
  }

  if (law == "scagm") {
    const double mu = *c.mu;
    const auto ts = grid(0.0, T, c.samples);
    const Trajectory tr = integrate(OdeFamily::constant(mu), p, 0.0, T, ic, scagm_channels(obj, mu), ts);
    ledger_for(ts, [&](double t) { return energy_scagm(mu, tr, t); });
    rec.add([&] { return conservation_certificate("conservation", ledger, 1e-6, *ledger.front().constant); });
    const double f0 = obj.value(p.x0) - obj.require_f_star();
    rec.add([&] {
      return bound_along("rate_bound", tr, ts, [&](double t) { return rate_bound(BoundLaw::ScAgm, {{}, {}, mu, {}}, t, {d0, f0}); });
    });
    rec.add([&] { return sign_certificate("sign_strong_convexity_integrand", tr, scagm_gap_channel(mu)); });
    emit(tr);
    return;
  }

  if (law == "gradient_flow") {
    const auto ts = grid(0.0, T, c.samples);
    const Trajectory tr = integrate(OdeFamily::gradient_flow(), p, 0.0, T, ic, gradient_flow_channels(obj), ts);
    ledger_for(ts, [&](double t) { return energy_gradient_flow(tr, t); });
    rec.add([&] { return conservation_certificate("conservation", ledger, 1e-6, *ledger.front().constant); });
    rec.add([&] {
      return bound_along("rate_bound", tr, ts, [&](double t) { return rate_bound(BoundLaw::GradientFlow, {}, t, {d0, {}}); });
    });
    rec.add([&] { return sign_certificate("sign_convexity_integrand", tr, gf_gap_channel); });
    emit(tr);
    return;
  }

  if (law == "ogmg") {
    const double r = *c.r;
    const double alpha = c.alpha.value_or(-2.0);
    const std::vector<double> deltas = {1e-2 * T, 1e-3 * T, 1e-4 * T};
    const TerminalReport tr_rep = terminal_analysis(OdeFamily::terminal(r, T), p, ic, deltas, {}, c.samples);
    const Trajectory& tr = *tr_rep.trajectory;
    const double t_hi = T - 1e-3 * T;
    const auto ts = grid(0.0, t_hi, c.samples);
    ledger = energy_ogmg_series(r, alpha, tr_rep.X_T, tr, ts);
    rec.add([&] { return conservation_certificate("conservation", ledger, 1e-5); });
    rec.add([&] {
      Certificate q{"quadrature_self_error", Certificate::Kind::BoundHolds, {}, ledger.back().quadrature_error, 1e-7, false, {}};
      return q;
    });
    const double gsq = tr_rep.grad_at_XT.squaredNorm();
    const double f_drop = tr_rep.f_X0 - tr_rep.f_XT;
    if (r <= -3.0) {
      rec.add([&] {
        const double b = r == -3.0 ? rate_bound(BoundLaw::OgmgR3, {r}, T, {{}, f_drop})
                                   : rate_bound(BoundLaw::OgmgGeneral, {r}, T, {{}, f_drop});
        return bound_certificate("terminal_bound", {{T, gsq, b}}, 1e-6);
      });
      rec.add([&] {
        std::vector<std::pair<double, double>> s;
        for (double t : ts) {
          const auto [X, V] = dense_eval(tr, t);
          s.emplace_back(t, lyapunov_ogmg(t, X, V, tr_rep.X_T, obj.value(X) - tr_rep.f_XT, T, r));
        }
        const double tol = 1e-9 * std::max(std::abs(s.front().second), 1e-12);
        return monotone_certificate("lyapunov_monotone", std::move(s), tol);
      });
      if (obj.f_star()) {
        rec.add([&] {
          const double cap = 2.0 * std::sqrt(std::max(0.0, obj.value(p.x0) - *obj.f_star()));
          std::vector<std::tuple<double, double, double>> pts;
          for (auto [d, speed] : tr_rep.speed_decay) pts.emplace_back(T - d, speed, cap);
          for (double t : ts) pts.emplace_back(t, dense_eval(tr, t).second.norm(), cap);
          return bound_certificate("speed_bound", pts, 1e-9);
        });
      }
    }
    rec.add([&] {
      const double expected = -2.0 / (r + 1.0);
      const double v = gsq > 1e-24 ? std::abs(tr_rep.limit_coefficient - expected) / std::abs(expected) : 0.0;
      Certificate q{"terminal_limit_coefficient", Certificate::Kind::BoundHolds, {}, v, 1e-2, false, {}};
      q.note = "coefficient " + fmt_param(tr_rep.limit_coefficient) + " vs " + fmt_param(expected);
      return q;
    });
    rec.add([&] {
      const double v = std::isfinite(tr_rep.ratio_order) ? 1.0 - tr_rep.ratio_order : 0.0;
      Certificate q{"terminal_limit_order", Certificate::Kind::BoundHolds, {}, v, 0.0, false, {}};
      q.note = "1 minus observed order " + fmt_param(tr_rep.ratio_order);
      return q;
    });
    write_file(dir, "trajectory.csv", [&](std::ostream& os) { write_csv(os, tr, true); });
    write_file(dir, "energy.csv", [&](std::ostream& os) { write_energy_csv(os, ledger); });
    return;
  }
  throw ConfigurationError("unknown law '" + law + "'");
}

inline void run_discrete(const ExperimentConfig& c, const ProblemInstance& p, Recorder& rec, Report& rep,
                         const std::filesystem::path& dir) {
  const Objective& obj = p.objective;
  const int K = c.K.front();
  RunRecord run = [&] {
    if (c.method == "ssse") return run_ssse(p, c.s->resolve(obj.L()), K);
    if (c.method == "ogmg") return run_ogmg(p, K);
    if (c.method == "oblg") return run_oblg(p, K);
    return run_nesterov_agm(p, K);
  }();
  if (run.warning) rep.warnings.push_back(run.note);
  if (c.method == "ssse" && obj.minimizer() && obj.f_star()) {
    const auto& phi = run.series("phi");
    const auto& floor = run.series("phi_rounding");
    rec.add([&] {
      std::vector<std::pair<double, double>> s;
      double rounding = 0.0;
      for (int k = 0; k < K; ++k) {
        s.emplace_back(k, phi[k]);
        if (std::isfinite(floor[k])) rounding = std::max(rounding, floor[k]);
      }
      return monotone_certificate("phi_monotone", std::move(s), 1e-12 * (1.0 + std::abs(phi[0])) + rounding);
    });
    for (const char* name : {"margin_plain", "margin_sharp"}) {
      rec.add([&, name] {
        const auto& m = run.series(name);
        double worst = -std::numeric_limits<double>::infinity();
        for (int k = 1; k <= K; ++k) {
          const RateMargin rm = ssse_rate_margin(run, k);
          const double bound = std::string(name) == "margin_plain" ? rm.plain_bound : rm.sharp_bound;
          worst = std::max(worst, -m[k] / bound);
        }
        return Certificate{std::string("rate_") + name, Certificate::Kind::BoundHolds, {}, worst, 1e-12, false,
                           "largest (measured - bound)/bound"};
      });
    }
    rec.add([&] {
      const MomentumIdentity mi = ssse_momentum_identity(run);
      return Certificate{"momentum_identity", Certificate::Kind::Conservation, {}, mi.worst_step_ulps, 1.0, false,
                         "per-step residual in ulps"};
    });
  }
  if (c.method == "ogmg") {
    const auto& U = run.series("U");
    rec.add([&] {
      std::vector<std::pair<double, double>> s;
      for (int k = 1; k <= K; ++k) s.emplace_back(k, U[k]);
      return monotone_certificate("U_monotone", std::move(s), 1e-12 * (1.0 + std::abs(U[1])));
    });
  }
  if (c.method == "ogmg" || c.method == "oblg") {
    rec.add([&] {
      const double g0 = obj.gradient(p.x0).norm(), gK = obj.gradient(run.x_final()).norm();
      return Certificate{"grad_decrease", Certificate::Kind::BoundHolds, {}, (gK - g0) / std::max(g0, 1e-300), 1e-12,
                         false, "(|grad f(x_K)| - |grad f(x_0)|)/|grad f(x_0)|"};
    });
  }
  if (c.method == "nesterov_agm" && obj.minimizer() && obj.f_star()) {
    rec.add([&] {
      const double d0 = dist0_sq(p);
      std::vector<std::tuple<double, double, double>> pts;
      for (int k = 1; k <= K; ++k)
        pts.emplace_back(k, obj.value(run.iterates[k].x) - *obj.f_star(), 2.0 * obj.L() * d0 / sq(k + 1.0));
      return bound_certificate("classical_envelope", pts, 1e-9);
    });
  }
  write_file(dir, "run.csv", [&](std::ostream& os) { write_csv(os, run); });
}

inline void run_concat_mode(const ExperimentConfig& c, const ProblemInstance& p, Recorder& rec, const std::filesystem::path& dir) {
  ConcatOptions opt;
  if (c.s) opt.first_half_step = c.s->resolve(p.objective.L());
  const ConcatSlope sl = concat_slope(p, c.K, opt);
  rec.add_threshold("discrete_slope", sl.slope, -3.5, "log-log slope of |grad f(x_final)|^2 vs K_total");
  IntegratorConfig ic;
  ic.rel_tol = c.rel_tol;
  ic.abs_tol = c.abs_tol;
  const ConcatContinuous cc = concat_continuous(p, *c.T, ic);
  rec.add([&] { return bound_certificate("continuous_bound", {{*c.T, cc.grad_sq, cc.bound}}, 1e-6); });
  write_file(dir, "concat.csv", [&](std::ostream& os) {
    os << "K_total,terminal_grad_norm_sq\n" << std::setprecision(17);
    for (std::size_t i = 0; i < sl.K_totals.size(); ++i) os << sl.K_totals[i] << ',' << sl.terminal_grad_sq[i] << '\n';
  });
}

inline void run_correspondence(const ExperimentConfig& c, const ProblemInstance& p, Recorder& rec,
                               const std::filesystem::path& dir) {
  IntegratorConfig ic;
  ic.rel_tol = c.rel_tol;
  ic.abs_tol = c.abs_tol;
  const double T = *c.T;
  const TerminalReport ode = terminal_analysis(OdeFamily::terminal(-3.0, T), p, ic, {});
  RefinementStudy st;
  if (c.method == "ogmg") {
    for (int K : c.K) {
      const RunRecord run = run_ogmg(p, K, {K * K / (T * T), std::nullopt});
      const auto& U = run.series("U");
      rec.add([&] {
        std::vector<std::pair<double, double>> s;
        for (int k = 1; k <= K; ++k) s.emplace_back(k, U[k]);
        return monotone_certificate("U_monotone_K" + std::to_string(K), std::move(s), 1e-12 * (1.0 + std::abs(U[1])));
      });
    }
    st = ogmg_correspondence(p, ode, -3.0, c.K);
    rec.add_threshold("correspondence_order", 1.0 - st.min_order, 0.0, "1 minus the smallest observed order");
  } else {
    st = oblg_coincidence(p, ode, c.K);
    rec.add_threshold("coincidence_order", 0.9 - st.min_order, 0.0, "0.9 minus the smallest observed order");
  }
  write_file(dir, "refinement.csv", [&](std::ostream& os) {
    os << "K,error,order\n" << std::setprecision(17);
    for (std::size_t i = 0; i < st.Ks.size(); ++i) {
      os << st.Ks[i] << ',' << st.errors[i] << ',';
      if (i > 0) os << st.orders[i - 1];
      os << '\n';
    }
  });
}

}  // namespace detail

/// Runs one experiment. Module errors are captured in the report, annotated with the experiment id.
inline Report run_experiment(const ExperimentConfig& c, const RunOptions& opt = {}) {
  Report rep;
  rep.id = c.id;
  rep.config = c.raw;
  rep.warnings = c.warnings;
  const auto t0 = std::chrono::steady_clock::now();
  detail::Recorder rec(rep, opt.tol_scale);
  try {
    std::optional<Vec> x0;
    if (c.x0) x0 = Eigen::Map<const Vec>(c.x0->data(), static_cast<Eigen::Index>(c.x0->size()));
    const ProblemInstance p = make_problem(c.problem, x0);
    const auto dir = detail::experiment_dir(c, opt);
    if (c.oracle_checks) detail::add_oracle_checks(rec, p, c.seed);
    switch (c.mode) {
      case Mode::Ode: detail::run_ode(c, p, rec, rep, dir); break;
      case Mode::Discrete: detail::run_discrete(c, p, rec, rep, dir); break;
      case Mode::Concat: detail::run_concat_mode(c, p, rec, dir); break;
      case Mode::Correspondence: detail::run_correspondence(c, p, rec, dir); break;
    }
  } catch (const ConfigurationError& e) {
    rep.status = Report::Status::ConfigError;
    rep.error = c.id + ": " + e.what();
  } catch (const InvalidParameter& e) {
    rep.status = Report::Status::ConfigError;
    rep.error = c.id + ": " + e.what();
  } catch (const std::exception& e) {
    rep.status = Report::Status::RuntimeError;
    rep.error = c.id + ": " + e.what();
  }
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rep.settle();
  return rep;
}

// ---------------------------------------------------------------------------
// Suite

struct SuiteReport {
  std::vector<Report> reports;

  Report::Status status() const {
    Report::Status worst = Report::Status::Pass;
    for (const auto& r : reports) worst = std::max(worst, r.status);
    return worst;
  }
  int exit_code() const { return static_cast<int>(status()); }
};

inline nlohmann::json to_json(const SuiteReport& s) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : s.reports) list.push_back(to_json(r));
  return {{"artifact_version", kArtifactVersion},
          {"status", status_name(s.status())},
          {"pass", s.status() == Report::Status::Pass},
          {"experiments", list}};
}

/// Reads {"configs": [paths...]} (paths relative to the manifest) and runs them on `jobs` threads.
inline SuiteReport run_suite(const std::string& manifest_path, const RunOptions& opt = {}, int jobs = 1) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigurationError("cannot open manifest '" + manifest_path + "'");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigurationError(manifest_path + ": JSON parse error: " + e.what());
  }
  if (!m.is_object() || !m.contains("configs") || !m["configs"].is_array())
    throw ConfigurationError(manifest_path + ": expected an object with a \"configs\" array");
  for (auto it = m.begin(); it != m.end(); ++it)
    if (it.key() != "configs") throw ConfigurationError(manifest_path + ": unknown key '" + it.key() + "'");
  const auto base = std::filesystem::path(manifest_path).parent_path();
  std::vector<std::string> paths;
  for (const auto& e : m["configs"]) {
    if (!e.is_string()) throw ConfigurationError(manifest_path + ": config entries must be strings");
    paths.push_back((base / e.get<std::string>()).string());
  }

  SuiteReport out;
  out.reports.resize(paths.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < paths.size(); i = next++) {
      try {
        out.reports[i] = run_experiment(load_config(paths[i]), opt);
      } catch (const std::exception& e) {
        Report r;
        r.id = std::filesystem::path(paths[i]).stem().string();
        r.status = Report::Status::ConfigError;
        r.error = e.what();
        out.reports[i] = std::move(r);
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(paths.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace agmlab
