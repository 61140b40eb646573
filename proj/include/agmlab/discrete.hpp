#pragma once

// Discrete methods: semi-second-order symplectic Euler (SSSE), Nesterov AGM,
// OGM-G, OBL-G♭ and their concatenation, with Lyapunov certificates and the
// discrete-to-continuous correspondence checks.

#include <agmlab/conservation.hpp>
#include <agmlab/dynamics.hpp>
#include <agmlab/errors.hpp>
#include <agmlab/linalg.hpp>
#include <agmlab/problems.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace agmlab {

struct ThetaSchedule {
  enum class Source { SsseHalfK, OgmgBackward, Custom };
  std::vector<double> values;
  Source source = Source::Custom;

  int K() const { return static_cast<int>(values.size()) - 1; }
  double operator[](std::size_t i) const { return values.at(i); }
};

/// θ_k = k/2 for k = 0..K.
inline ThetaSchedule make_ssse_theta(int K) {
  if (K < 0) throw InvalidParameter("make_ssse_theta: K must be nonnegative");
  ThetaSchedule th{std::vector<double>(K + 1), ThetaSchedule::Source::SsseHalfK};
  for (int k = 0; k <= K; ++k) th.values[k] = 0.5 * k;
  return th;
}

/// Backward schedule: values[K] = 1, values[i] = (1+√(1+4v²ᵢ₊₁))/2, values[0] = (1+√(1+8v₁²))/2.
/// values[k] plays the role of θ_{K−k} in the z-form of OGM-G.
inline ThetaSchedule make_ogmg_theta(int K) {
  if (K < 1) throw InvalidParameter("make_ogmg_theta: K must be >= 1");
  ThetaSchedule th{std::vector<double>(K + 1), ThetaSchedule::Source::OgmgBackward};
  th.values[K] = 1.0;
  for (int i = K - 1; i >= 1; --i) th.values[i] = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * sq(th.values[i + 1])));
  th.values[0] = 0.5 * (1.0 + std::sqrt(1.0 + 8.0 * sq(th.values[1])));
  return th;
}

struct Iterate {
  int k = 0;
  Vec x;
  Vec x_plus;
  Vec z;
  double theta = 0.0;
};

struct RunRecord {
  std::string method_id;
  double s = 0.0;  // step size (1/L for the L-normalised methods)
  double L = 0.0;  // smoothness constant used by the method
  int K = 0;
  std::string label;
  std::vector<Iterate> iterates;  // k = 0..K
  ThetaSchedule theta;
  std::vector<std::pair<std::string, std::vector<double>>> certificates;  // aligned with k, NaN where undefined
  bool warning = false;
  bool final_step_clamped = false;
  std::string note;
  Objective objective;
  Vec x0;

  const std::vector<double>& series(const std::string& name) const {
    for (const auto& [k, v] : certificates)
      if (k == name) return v;
    throw InvalidParameter("run record has no certificate series '" + name + "'");
  }
  bool has_series(const std::string& name) const {
    return std::any_of(certificates.begin(), certificates.end(), [&](const auto& kv) { return kv.first == name; });
  }
  const Vec& x_final() const { return iterates.back().x; }
};

namespace detail {

inline Vec checked_grad(const Objective& obj, const Vec& x) {
  Vec g = obj.gradient(x);
  if (!all_finite(g)) throw OracleFailure("gradient oracle returned a non-finite value");
  return g;
}

inline RunRecord blank_record(std::string id, const ProblemInstance& p, double s, double L, int K) {
  RunRecord rec{std::move(id), s, L, K, p.label, {}, {}, {}, false, false, {}, p.objective, p.x0};
  rec.iterates.reserve(K + 1);
  return rec;
}

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

}  // namespace detail

// ---------------------------------------------------------------------------
// SSSE

/// x⁺ = x − (s/2)∇f(x); z ← z − sθ_k∇f(x); x ← (θ_k²/θ_{k+1}²)x⁺ + (1 − θ_k²/θ_{k+1}²)z.
inline RunRecord run_ssse(const ProblemInstance& problem, double s, int K) {
  if (K <= 0) throw DegenerateRun("run_ssse: K must be positive");
  if (!(s > 0.0)) throw InvalidParameter("run_ssse: step size must be positive");
  const Objective& obj = problem.objective;
  RunRecord rec = detail::blank_record("ssse", problem, s, obj.L(), K);
  rec.theta = make_ssse_theta(K + 1);
  if (s > 2.0 / obj.L() * (1.0 + 1e-12)) {
    rec.warning = true;
    rec.note = "s exceeds 2/L; Lyapunov certificate is not guaranteed";
  }
  Vec x = problem.x0, z = problem.x0;
  for (int k = 0; k <= K; ++k) {
    const Vec g = detail::checked_grad(obj, x);
    Vec xp = x - (0.5 * s) * g;
    rec.iterates.push_back({k, x, xp, z, rec.theta[k]});
    if (k == K) break;
    const double a = sq(rec.theta[k]) / sq(rec.theta[k + 1]);
    z = z - (s * rec.theta[k]) * g;
    x = a * xp + (1.0 - a) * z;
  }
  if (obj.minimizer() && obj.f_star()) {
    std::vector<double> phi(K + 1, detail::nan), phi_rounding(K + 1, detail::nan), plain(K + 1, detail::nan),
        sharp(K + 1, detail::nan);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const Vec& xs = *obj.minimizer();
    const double fs = *obj.f_star();
    const double d0 = (problem.x0 - xs).squaredNorm();
    for (int k = 0; k < K; ++k) {
      const Iterate& it = rec.iterates[k];
      const double tk = rec.theta[k], tk1 = rec.theta[k + 1];
      const double ck = tk1 / (sq(tk1) - sq(tk));
      const Vec g = obj.gradient(it.x);
      const double fx = obj.value(it.x), gg = 0.25 * s * g.squaredNorm(), zz = (rec.iterates[k + 1].z - xs).squaredNorm() / s;
      phi[k] = 2.0 * ck * sq(tk) * (fx - fs - gg) + zz;
      // f − f★ cancels; a few ulps of the operands, amplified by the θ² weight
      phi_rounding[k] = 8.0 * eps * (2.0 * ck * sq(tk) * (std::abs(fx) + std::abs(fs) + gg) + zz);
    }
    for (int k = 1; k <= K; ++k) {
      const double measured = obj.value(rec.iterates[k].x_plus) - fs;
      const double bound = 2.0 * d0 / (s * k * k);
      plain[k] = bound - measured;
      sharp[k] = (k + 0.5) / (k + 1.0) * bound - measured;
    }
    rec.certificates.push_back({"phi", std::move(phi)});
    rec.certificates.push_back({"phi_rounding", std::move(phi_rounding)});
    rec.certificates.push_back({"margin_plain", std::move(plain)});
    rec.certificates.push_back({"margin_sharp", std::move(sharp)});
  }
  return rec;
}

/// Φ_k = 2c_kθ_k²(f(x_k) − f★ − (s/4)‖∇f(x_k)‖²) + (1/s)‖z_{k+1} − X★‖², c_k = θ_{k+1}/(θ_{k+1}² − θ_k²).
inline double ssse_lyapunov(const RunRecord& rec, int k) {
  if (rec.method_id != "ssse") throw InvalidParameter("ssse_lyapunov: record is not an SSSE run");
  const Vec& xs = rec.objective.require_minimizer();
  const double fs = rec.objective.require_f_star();
  if (k < 0 || k > rec.K - 1) throw IndexError("ssse_lyapunov: k must lie in [0, K-1]");
  const Iterate& it = rec.iterates[k];
  const double tk = rec.theta[k], tk1 = rec.theta[k + 1];
  const double ck = tk1 / (sq(tk1) - sq(tk));
  const Vec g = rec.objective.gradient(it.x);
  return 2.0 * ck * sq(tk) * (rec.objective.value(it.x) - fs - 0.25 * rec.s * g.squaredNorm()) +
         (rec.iterates[k + 1].z - xs).squaredNorm() / rec.s;
}

struct RateMargin {
  double plain_bound, plain_margin;
  double sharp_bound, sharp_margin;
};

/// Margins of f(x_k⁺) − f★ against 2‖X₀−X★‖²/(sk²) and its ((k+½)/(k+1)) sharpening.
inline RateMargin ssse_rate_margin(const RunRecord& rec, int k) {
  if (k < 1 || k > rec.K) throw IndexError("ssse_rate_margin: k must lie in [1, K]");
  const Vec& xs = rec.objective.require_minimizer();
  const double fs = rec.objective.require_f_star();
  const double d0 = (rec.x0 - xs).squaredNorm();
  const double measured = rec.objective.value(rec.iterates[k].x_plus) - fs;
  const double plain = 2.0 * d0 / (rec.s * k * k);
  const double sharp = (k + 0.5) / (k + 1.0) * plain;
  return {plain, plain - measured, sharp, sharp - measured};
}

/// Per-step residual of z_{k+1} against the momentum form p_{k+1} = p_k − k·s·∇f(x_k),
/// z = p/2 + X★, in units of ulp-scale; and the drift of a fully independent p-recurrence.
struct MomentumIdentity {
  double worst_step_ulps = 0.0;
  double accumulated_drift = 0.0;
};

inline MomentumIdentity ssse_momentum_identity(const RunRecord& rec) {
  if (rec.method_id != "ssse") throw InvalidParameter("ssse_momentum_identity: record is not an SSSE run");
  const Vec& xs = rec.objective.require_minimizer();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  MomentumIdentity out;
  Vec p_run = 2.0 * (rec.x0 - xs);
  for (int k = 0; k < rec.K; ++k) {
    const Iterate& it = rec.iterates[k];
    const Vec g = rec.objective.gradient(it.x);
    const Vec step = (k * rec.s) * g;
    const Vec p_k = 2.0 * (it.z - xs);
    const Vec z_rec = 0.5 * (p_k - step) + xs;
    const Vec& z_dir = rec.iterates[k + 1].z;
    const double mag = (z_dir.cwiseAbs() + it.z.cwiseAbs() + 0.5 * step.cwiseAbs() + xs.cwiseAbs()).maxCoeff();
    // Below the normal range the spacing of doubles is fixed, not relative.
    const double scale = std::max(eps * mag, std::numeric_limits<double>::denorm_min());
    const double resid = (z_rec - z_dir).cwiseAbs().maxCoeff();
    out.worst_step_ulps = std::max(out.worst_step_ulps, resid / scale);
    p_run = p_run - step;
    out.accumulated_drift = std::max(out.accumulated_drift, (0.5 * p_run + xs - z_dir).cwiseAbs().maxCoeff());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nesterov AGM baseline

inline RunRecord run_nesterov_agm(const ProblemInstance& problem, int K) {
  if (K <= 0) throw DegenerateRun("run_nesterov_agm: K must be positive");
  const Objective& obj = problem.objective;
  const double L = obj.L();
  RunRecord rec = detail::blank_record("nesterov_agm", problem, 1.0 / L, L, K);
  rec.theta.source = ThetaSchedule::Source::Custom;
  Vec x = problem.x0, y = problem.x0;
  double t = 1.0;
  for (int k = 0; k <= K; ++k) {
    const Vec gy = detail::checked_grad(obj, y);
    const Vec xn = y - gy / L;
    rec.iterates.push_back({k, x, xn, y, t});
    rec.theta.values.push_back(t);
    if (k == K) break;
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = xn + ((t - 1.0) / tn) * (xn - x);
    x = xn;
    t = tn;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// OGM-G

struct OgmgOptions {
  std::optional<double> L;              // overrides the objective's L (matched-T studies)
  std::optional<ThetaSchedule> theta;   // replaces the backward schedule
};

/// z-form OGM-G: x⁺ = x − ∇f(x)/L; z ← z − (v_k/L)∇f(x); x ← a_k x⁺ + (1−a_k) z with
/// a_k = v_{k+2}⁴/v_{k+1}⁴, and the final step x_K = z_K.
inline RunRecord run_ogmg(const ProblemInstance& problem, int K, const OgmgOptions& opt = {}) {
  if (K < 2) throw DegenerateRun("run_ogmg: K must be >= 2");
  const Objective& obj = problem.objective;
  const double L = opt.L ? *opt.L : obj.L();
  if (!(L > 0.0)) throw InvalidParameter("run_ogmg: L must be positive");
  RunRecord rec = detail::blank_record("ogmg", problem, 1.0 / L, L, K);
  rec.theta = opt.theta ? *opt.theta : make_ogmg_theta(K);
  if (rec.theta.K() != K) throw InvalidParameter("run_ogmg: theta schedule length must be K+1");
  const auto& v = rec.theta.values;
  Vec x = problem.x0, z = problem.x0;
  for (int k = 0; k <= K; ++k) {
    const Vec g = detail::checked_grad(obj, x);
    Vec xp = x - g / L;
    rec.iterates.push_back({k, x, xp, z, v[k]});
    if (k == K) break;
    z = z - (v[k] / L) * g;
    if (k + 2 <= K) {
      const double a = std::pow(v[k + 2] / v[k + 1], 4);
      x = a * xp + (1.0 - a) * z;
    } else {
      x = z;
      rec.final_step_clamped = true;
    }
  }
  rec.note = "final step uses x_K = z_K";
  std::vector<double> U(K + 1, detail::nan);
  const Iterate& last = rec.iterates[K];
  const Vec gK = obj.gradient(last.x);
  for (int k = 1; k <= K; ++k) {
    const Iterate& it = rec.iterates[k];
    const Vec& xpm = rec.iterates[k - 1].x_plus;
    const Vec gk = obj.gradient(it.x);
    const double t2 = sq(v[k]);
    U[k] = (gK.squaredNorm() / (2.0 * L) + gk.squaredNorm() / (2.0 * L) + obj.value(it.x) - obj.value(last.x) -
            gk.dot(it.x - xpm)) / t2 +
           L / (t2 * t2) * (it.z - xpm).dot(it.z - last.x_plus);
  }
  rec.certificates.push_back({"U", std::move(U)});
  return rec;
}

/// U_k for 1 ≤ k ≤ K.
inline double ogmg_lyapunov(const RunRecord& rec, int k) {
  if (rec.method_id != "ogmg") throw InvalidParameter("ogmg_lyapunov: record is not an OGM-G run");
  if (k < 1 || k > rec.K) throw IndexError("ogmg_lyapunov: k must lie in [1, K] (x_{-1}^+ is undefined)");
  return rec.series("U")[k];
}

// ---------------------------------------------------------------------------
// OBL-G♭

inline RunRecord run_oblg(const ProblemInstance& problem, int K, std::optional<double> L_override = std::nullopt) {
  if (K < 3) throw DegenerateRun("run_oblg: K must be >= 3");
  const Objective& obj = problem.objective;
  const double L = L_override ? *L_override : obj.L();
  if (!(L > 0.0)) throw InvalidParameter("run_oblg: L must be positive");
  RunRecord rec = detail::blank_record("oblg", problem, 1.0 / L, L, K);
  Vec x = problem.x0, z = problem.x0;
  for (int k = 0; k <= K; ++k) {
    const Vec g = detail::checked_grad(obj, x);
    Vec xp = x - g / L;
    const double w = 0.5 * (K - k + 1);
    rec.iterates.push_back({k, x, xp, z, w});
    rec.theta.values.push_back(w);
    if (k == K) break;
    z = z - (w / L) * g;
    const double den = K - k + 2.0;
    x = ((K - k - 2.0) / den) * xp + (4.0 / den) * z;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Concatenation

struct ConcatOptions {
  std::optional<double> first_half_step;  // SSSE step, default 2/L
  bool nesterov_first = false;
};

/// First half SSSE (or Nesterov), second half OGM-G from the first half's x_K⁺ with fresh z.
inline std::pair<RunRecord, RunRecord> run_concat(const ProblemInstance& problem, int K_total,
                                                   const ConcatOptions& opt = {}) {
  if (K_total < 4) throw DegenerateRun("run_concat: K_total must be >= 4");
  if (K_total % 2 != 0) throw InvalidParameter("run_concat: K_total must be even");
  const int half = K_total / 2;
  RunRecord first = opt.nesterov_first ? run_nesterov_agm(problem, half)
                                       : run_ssse(problem, opt.first_half_step.value_or(2.0 / problem.objective.L()), half);
  const Vec handoff = first.iterates.back().x_plus;
  ProblemInstance second_start(problem.objective, handoff, problem.label + "/ogmg");
  RunRecord second = run_ogmg(second_start, half);
  return {std::move(first), std::move(second)};
}

// ---------------------------------------------------------------------------
// Discrete ↔ continuous studies

namespace detail {

inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = static_cast<int>(xs.size());
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

struct RefinementStudy {
  std::vector<int> Ks;
  std::vector<double> errors;
  std::vector<double> orders;  // successive log2 ratios (K doubling)
  double min_order = 0.0;
};

inline RefinementStudy finish_study(std::vector<int> Ks, std::vector<double> errors) {
  RefinementStudy s{std::move(Ks), std::move(errors), {}, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i + 1 < s.errors.size(); ++i) {
    const double o = std::log(s.errors[i] / s.errors[i + 1]) / std::log(static_cast<double>(s.Ks[i + 1]) / s.Ks[i]);
    s.orders.push_back(o);
    s.min_order = std::min(s.min_order, o);
  }
  return s;
}

/// max over k = fraction·K of |U_k/(2h²) − Φ(kh)| with h = T/K and L = 1/h².
inline RefinementStudy ogmg_correspondence(const ProblemInstance& problem, const TerminalReport& ode, double r,
                                           const std::vector<int>& Ks,
                                           const std::vector<double>& fractions = {0.25, 0.5, 0.75}) {
  const Trajectory& tr = *ode.trajectory;
  auto* m = std::get_if<TerminalDamping>(&tr.family.kind);
  if (!m) throw InvalidParameter("ogmg_correspondence: reference must be a terminal-damping run");
  const double T = m->T;
  const Objective& obj = problem.objective;
  const double fT = obj.value(ode.X_T);
  std::vector<double> errs;
  for (int K : Ks) {
    const double h = T / K;
    const RunRecord rec = run_ogmg(problem, K, {1.0 / (h * h), std::nullopt});
    double worst = 0.0;
    for (double fr : fractions) {
      const int k = std::max(1, static_cast<int>(fr * K));
      const double t = k * h;
      const auto [X, V] = dense_eval(tr, t);
      const double phi = lyapunov_ogmg(t, X, V, ode.X_T, obj.value(X) - fT, T, r);
      worst = std::max(worst, std::abs(ogmg_lyapunov(rec, k) / (2.0 * h * h) - phi));
    }
    errs.push_back(worst);
  }
  return finish_study(Ks, std::move(errs));
}

/// max_k ‖x_k − X(kh)‖ for run_oblg with h = T/K, L = 1/h²; X(T) taken from the extrapolated X_T.
inline RefinementStudy oblg_coincidence(const ProblemInstance& problem, const TerminalReport& ode,
                                        const std::vector<int>& Ks) {
  const Trajectory& tr = *ode.trajectory;
  auto* m = std::get_if<TerminalDamping>(&tr.family.kind);
  if (!m) throw InvalidParameter("oblg_coincidence: reference must be a terminal-damping run");
  const double T = m->T;
  std::vector<double> errs;
  for (int K : Ks) {
    const double h = T / K;
    const RunRecord rec = run_oblg(problem, K, 1.0 / (h * h));
    double worst = 0.0;
    for (int k = 0; k <= K; ++k) {
      const double t = k * h;
      const Vec X = k == K || t > tr.t_last() ? ode.X_T : dense_eval(tr, t).first;
      worst = std::max(worst, (rec.iterates[k].x - X).norm());
    }
    errs.push_back(worst);
  }
  return finish_study(Ks, std::move(errs));
}

struct ConcatSlope {
  std::vector<int> K_totals;
  std::vector<double> terminal_grad_sq;
  double slope = 0.0;
};

inline ConcatSlope concat_slope(const ProblemInstance& problem, const std::vector<int>& K_totals,
                                const ConcatOptions& opt = {}) {
  ConcatSlope out{K_totals, {}, 0.0};
  std::vector<double> xs;
  for (int K : K_totals) {
    const auto [a, b] = run_concat(problem, K, opt);
    out.terminal_grad_sq.push_back(problem.objective.gradient(b.x_final()).squaredNorm());
    xs.push_back(K);
  }
  out.slope = detail::loglog_slope(xs, out.terminal_grad_sq);
  return out;
}

struct ConcatContinuous {
  Vec X_F;      // AGM flow at T
  Vec X_G;      // OGM-G flow at T (extrapolated)
  double grad_sq = 0.0;
  double bound = 0.0;
  double agm_gap = 0.0;        // f(X_F) − f★
  double agm_bound = 0.0;      // 2‖X₀−X★‖²/T²
  double ogmg_bound = 0.0;     // 4(f(X_G(0)) − f★)/T²
};

/// AGM flow (r = 3) on [0, T], then the OGM-G flow (r = −3, horizon T) from X_F(T) at rest.
inline ConcatContinuous concat_continuous(const ProblemInstance& problem, double T, const IntegratorConfig& cfg = {}) {
  const Objective& obj = problem.objective;
  const Vec& xs = obj.require_minimizer();
  const double fs = obj.require_f_star();
  const Trajectory agm = integrate(OdeFamily::vanishing(3.0), problem, 0.0, T, cfg);
  ConcatContinuous out;
  out.X_F = agm.X.back();
  ProblemInstance second(obj, out.X_F, problem.label + "/ogmg-ode");
  const TerminalReport rep = terminal_analysis(OdeFamily::terminal(-3.0, T), second, cfg, {});
  out.X_G = rep.X_T;
  out.grad_sq = obj.gradient(rep.X_T).squaredNorm();
  const double d0 = (problem.x0 - xs).squaredNorm();
  out.bound = rate_bound(BoundLaw::Concat, {}, T, {d0, std::nullopt});
  out.agm_gap = obj.value(out.X_F) - fs;
  out.agm_bound = rate_bound(BoundLaw::AgmR3, {}, T, {d0, std::nullopt});
  out.ogmg_bound = rate_bound(BoundLaw::OgmgR3, {}, T, {std::nullopt, out.agm_gap});
  return out;
}

// ---------------------------------------------------------------------------
// Output

/// Columns: k, f_gap, grad_norm_sq, phi_or_u, bound, margin, x_*, z_*.
/// f_gap is the quantity the method's bound refers to (f(x_k⁺) − f★ for SSSE, f(x_k) − f★ otherwise).
inline void write_csv(std::ostream& os, const RunRecord& rec) {
  const int n = rec.objective.dim();
  os << "k,f_gap,grad_norm_sq,phi_or_u,bound,margin";
  for (int i = 0; i < n; ++i) os << ",x_" << i;
  for (int i = 0; i < n; ++i) os << ",z_" << i;
  os << '\n' << std::setprecision(17);
  const bool has_fs = rec.objective.f_star().has_value();
  const bool ssse = rec.method_id == "ssse";
  const std::vector<double>* cert = rec.has_series("phi") ? &rec.series("phi")
                                    : rec.has_series("U") ? &rec.series("U") : nullptr;
  const double d0 = rec.objective.minimizer() ? (rec.x0 - *rec.objective.minimizer()).squaredNorm() : detail::nan;
  auto put = [&](double v) {
    os << ',';
    if (std::isfinite(v)) os << v;
  };
  for (const Iterate& it : rec.iterates) {
    os << it.k;
    const Vec& probe = ssse ? it.x_plus : it.x;
    put(has_fs ? rec.objective.value(probe) - *rec.objective.f_star() : detail::nan);
    put(rec.objective.gradient(it.x).squaredNorm());
    put(cert && it.k < static_cast<int>(cert->size()) ? (*cert)[it.k] : detail::nan);
    double bound = detail::nan;
    if (ssse && it.k >= 1) bound = (it.k + 0.5) / (it.k + 1.0) * 2.0 * d0 / (rec.s * it.k * it.k);
    if (rec.method_id == "nesterov_agm") bound = 2.0 * rec.L * d0 / sq(it.k + 1.0);
    put(bound);
    put(has_fs && std::isfinite(bound) ? bound - (rec.objective.value(probe) - *rec.objective.f_star()) : detail::nan);
    for (int i = 0; i < n; ++i) os << ',' << it.x(i);
    for (int i = 0; i < n; ++i) os << ',' << it.z(i);
    os << '\n';
  }
}

}  // namespace agmlab
