#pragma once

// Dilated frames, conservation laws, Lyapunov functions, rate bounds and the
// time-dependent Hamiltonian identity, with numerical certificates.

#include <agmlab/dynamics.hpp>
#include <agmlab/errors.hpp>
#include <agmlab/linalg.hpp>
#include <agmlab/problems.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace agmlab {

// ---------------------------------------------------------------------------
// Dilated coordinates

struct DilatedFrame {
  enum class Scaling { Power, PowerTerminal, Exponential };
  Scaling scaling = Scaling::Power;
  double alpha = 0.0;
  double T = 0.0;
  double beta = 0.0;
  Vec center;

  static DilatedFrame power(double alpha, Vec center) { return {Scaling::Power, alpha, 0.0, 0.0, std::move(center)}; }
  static DilatedFrame power_terminal(double alpha, double T, Vec center) {
    if (!(T > 0.0)) throw InvalidParameter("terminal frame requires T > 0");
    return {Scaling::PowerTerminal, alpha, T, 0.0, std::move(center)};
  }
  static DilatedFrame exponential(double beta, Vec center) {
    return {Scaling::Exponential, 0.0, 0.0, beta, std::move(center)};
  }

  // Returns (scale a(t), derivative a'(t)) so that W = a(t)(X − X_c).
  std::pair<double, double> factor(double t) const {
    switch (scaling) {
      case Scaling::Power: {
        if (t < 0.0 || (t == 0.0 && alpha != 0.0 && alpha < 1.0)) throw RangeError("power frame is singular at t");
        if (alpha == 0.0) return {1.0, 0.0};
        return {std::pow(t, alpha), alpha * std::pow(t, alpha - 1.0)};
      }
      case Scaling::PowerTerminal: {
        const double tau = T - t;
        if (tau < 0.0 || (tau == 0.0 && alpha != 0.0 && alpha < 1.0))
          throw RangeError("terminal frame is singular at t");
        if (alpha == 0.0) return {1.0, 0.0};
        return {std::pow(tau, alpha), -alpha * std::pow(tau, alpha - 1.0)};
      }
      case Scaling::Exponential: {
        const double e = std::exp(beta * t);
        return {e, beta * e};
      }
    }
    return {1.0, 0.0};
  }
};

inline std::pair<Vec, Vec> to_dilated(const DilatedFrame& frame, double t, const Vec& X, const Vec& V) {
  if (X.size() != frame.center.size() || V.size() != X.size()) throw InvalidParameter("to_dilated: dimension mismatch");
  const auto [a, da] = frame.factor(t);
  const Vec d = X - frame.center;
  return {a * d, a * V + da * d};
}

inline std::pair<Vec, Vec> from_dilated(const DilatedFrame& frame, double t, const Vec& W, const Vec& Wdot) {
  if (W.size() != frame.center.size() || Wdot.size() != W.size())
    throw InvalidParameter("from_dilated: dimension mismatch");
  const auto [a, da] = frame.factor(t);
  if (a == 0.0) throw RangeError("from_dilated: frame scale vanishes at t");
  const Vec d = W / a;
  return {d + frame.center, (Wdot - da * d) / a};
}

/// P = tẊ + 2(X − X★).
inline Vec conjugate_momentum(double t, const Vec& X, const Vec& V, const Vec& x_star) {
  return t * V + 2.0 * (X - x_star);
}

// ---------------------------------------------------------------------------
// Breakdown and certificates

struct EnergyBreakdown {
  std::string law_id;
  double t = 0.0;
  std::vector<std::pair<std::string, double>> boundary_terms;
  double dissipation_integral = 0.0;
  double convexity_integral = 0.0;
  double total = 0.0;
  std::optional<double> constant;  // closed-form value of the conserved quantity, when known
  double quadrature_error = 0.0;   // post hoc laws only
  bool warning = false;
  std::string note;

  double term(const std::string& name) const {
    for (const auto& [k, v] : boundary_terms)
      if (k == name) return v;
    throw InvalidParameter("breakdown has no term '" + name + "'");
  }

  void finalize() {
    total = 0.0;
    for (const auto& kv : boundary_terms) total += kv.second;
    total += dissipation_integral;
    total += convexity_integral;
  }
};

struct Certificate {
  enum class Kind { Conservation, MonotoneNonincreasing, BoundHolds };
  std::string id;
  Kind kind = Kind::Conservation;
  std::vector<std::pair<double, double>> series;
  double worst_violation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

inline const char* kind_name(Certificate::Kind k) {
  switch (k) {
    case Certificate::Kind::Conservation: return "conservation";
    case Certificate::Kind::MonotoneNonincreasing: return "monotone_nonincreasing";
    case Certificate::Kind::BoundHolds: return "bound_holds";
  }
  return "?";
}

/// max |v − v_ref| / max(1, |v_ref|) ≤ rel_tol, with v_ref the first value.
inline Certificate conservation_certificate(std::string id, std::vector<std::pair<double, double>> series,
                                            double rel_tol, std::optional<double> reference = std::nullopt) {
  Certificate c{std::move(id), Certificate::Kind::Conservation, std::move(series), 0.0, rel_tol, false, {}};
  if (c.series.empty()) throw InvalidParameter("certificate series is empty");
  const double ref = reference ? *reference : c.series.front().second;
  const double scale = std::max(1.0, std::abs(ref));
  for (const auto& [t, v] : c.series) {
    const double dev = std::isfinite(v) ? std::abs(v - ref) / scale : std::numeric_limits<double>::infinity();
    c.worst_violation = std::max(c.worst_violation, dev);
  }
  c.pass = c.worst_violation <= c.tolerance;
  return c;
}

inline Certificate conservation_certificate(std::string id, const std::vector<EnergyBreakdown>& ledger, double rel_tol,
                                            std::optional<double> reference = std::nullopt) {
  std::vector<std::pair<double, double>> s;
  for (const auto& b : ledger) s.emplace_back(b.t, b.total);
  return conservation_certificate(std::move(id), std::move(s), rel_tol, reference);
}

/// v(t₂) ≤ v(t₁) + tolerance for all t₁ < t₂.
inline Certificate monotone_certificate(std::string id, std::vector<std::pair<double, double>> series,
                                        double tolerance) {
  Certificate c{std::move(id), Certificate::Kind::MonotoneNonincreasing, std::move(series), 0.0, tolerance, false, {}};
  double running_min = std::numeric_limits<double>::infinity();
  for (const auto& [t, v] : c.series) {
    if (!std::isfinite(v)) {
      c.worst_violation = std::numeric_limits<double>::infinity();
      break;
    }
    if (std::isfinite(running_min)) c.worst_violation = std::max(c.worst_violation, v - running_min);
    running_min = std::min(running_min, v);
  }
  c.pass = c.worst_violation <= c.tolerance;
  return c;
}

/// measured ≤ bound·(1 + rel_slack) at every point; violation is relative to max(bound, 1e-12).
inline Certificate bound_certificate(std::string id, const std::vector<std::tuple<double, double, double>>& points,
                                     double rel_slack) {
  Certificate c{std::move(id), Certificate::Kind::BoundHolds, {}, -std::numeric_limits<double>::infinity(), rel_slack,
                false, {}};
  for (const auto& [t, measured, bound] : points) {
    c.series.emplace_back(t, measured);
    const double v = std::isfinite(measured) ? (measured - bound) / std::max(bound, 1e-12)
                                             : std::numeric_limits<double>::infinity();
    c.worst_violation = std::max(c.worst_violation, v);
  }
  if (points.empty()) c.worst_violation = 0.0;
  c.pass = c.worst_violation <= c.tolerance;
  return c;
}

/// Every stored integrand value of a channel is ≥ −1e-12·scale.
inline Certificate sign_certificate(std::string id, const Trajectory& tr, const std::string& channel,
                                    double rel_tol = 1e-12) {
  const auto& rates = tr.channel_rates[tr.channel_index(channel)];
  double scale = 1.0;
  for (double q : rates) scale = std::max(scale, std::abs(q));
  std::vector<std::pair<double, double>> s;
  double worst = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    s.emplace_back(tr.times[i], rates[i]);
    worst = std::max(worst, -rates[i] / scale);
  }
  Certificate c{std::move(id), Certificate::Kind::BoundHolds, std::move(s), worst, rel_tol, worst <= rel_tol, {}};
  c.note = "integrand nonnegativity of " + channel;
  return c;
}

// ---------------------------------------------------------------------------
// Accumulator channels

namespace detail {

inline std::string fmt_param(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

struct Center {
  Vec x_star;
  double f_star;
};

inline Center center_of(const Objective& obj) { return {obj.require_minimizer(), obj.require_f_star()}; }

// f★ − f(X) − ⟨∇f(X), X★ − X⟩
inline double gap_to_star(const Objective& obj, const Center& c, const Vec& X) {
  return c.f_star - obj.value(X) - obj.gradient(X).dot(c.x_star - X);
}

inline double spow(double s, double e) { return e == 0.0 ? 1.0 : std::pow(s, e); }

}  // namespace detail

inline std::string agm_dissipation_channel(double r, double alpha) {
  return "agm_dissipation(r=" + detail::fmt_param(r) + ",alpha=" + detail::fmt_param(alpha) + ")";
}
inline std::string agm_gap_channel(double alpha) { return "agm_gap(alpha=" + detail::fmt_param(alpha) + ")"; }
inline std::string r_gt3_dissipation_channel(double r) { return "r_gt3_dissipation(r=" + detail::fmt_param(r) + ")"; }
inline std::string rescaled_dissipation_channel(double r, double alpha, double beta) {
  return "rescaled_dissipation(r=" + detail::fmt_param(r) + ",alpha=" + detail::fmt_param(alpha) +
         ",beta=" + detail::fmt_param(beta) + ")";
}
inline std::string rescaled_residual_channel(double alpha, double beta) {
  return "rescaled_residual(alpha=" + detail::fmt_param(alpha) + ",beta=" + detail::fmt_param(beta) + ")";
}
inline std::string scagm_dissipation_channel(double mu) { return "scagm_dissipation(mu=" + detail::fmt_param(mu) + ")"; }
inline std::string scagm_gap_channel(double mu) { return "scagm_gap(mu=" + detail::fmt_param(mu) + ")"; }
inline const std::string gf_dissipation_channel = "gf_dissipation";
inline const std::string gf_gap_channel = "gf_gap";

/// (2r−3α)/2·s^{α−3}‖sẊ+αd‖² + α(α+1−r)(α+2)/2·s^{α−3}‖d‖²  and  α s^{α−1}·gap.
inline std::vector<AccumulatorSpec> agm_channels(const Objective& obj, double r, double alpha) {
  const auto c = detail::center_of(obj);
  const double cm = (2.0 * r - 3.0 * alpha) / 2.0;
  const double cd = alpha * (alpha + 1.0 - r) * (alpha + 2.0) / 2.0;
  return {
      {agm_dissipation_channel(r, alpha),
       [c, cm, cd, alpha](double s, const Vec& X, const Vec& V) {
         const Vec d = X - c.x_star;
         return detail::spow(s, alpha - 3.0) * (cm * (s * V + alpha * d).squaredNorm() + cd * d.squaredNorm());
       }},
      {agm_gap_channel(alpha),
       [obj, c, alpha](double s, const Vec& X, const Vec&) {
         return alpha * detail::spow(s, alpha - 1.0) * detail::gap_to_star(obj, c, X);
       }},
  };
}

/// (r−3)s‖Ẋ‖²  and  2s·gap.
inline std::vector<AccumulatorSpec> r_gt3_channels(const Objective& obj, double r) {
  auto out = agm_channels(obj, r, 2.0);
  out[0] = {r_gt3_dissipation_channel(r), [r](double s, const Vec&, const Vec& V) { return (r - 3.0) * s * V.squaredNorm(); }};
  return out;
}

inline std::vector<AccumulatorSpec> r_lt3_channels(const Objective& obj, double r) {
  return agm_channels(obj, r, 2.0 * r / 3.0);
}

inline std::vector<AccumulatorSpec> rescaled_channels(const Objective& obj, double r, double alpha, double beta) {
  const auto c = detail::center_of(obj);
  const double e = alpha + beta;
  const double cm = (2.0 * r - 3.0 * alpha - beta) / 2.0;
  const double cd = alpha * (alpha + 1.0 - r) * (alpha - beta + 2.0) / 2.0;
  return {
      {rescaled_dissipation_channel(r, alpha, beta),
       [c, cm, cd, alpha, e](double s, const Vec& X, const Vec& V) {
         const Vec d = X - c.x_star;
         return detail::spow(s, e - 3.0) * (cm * (s * V + alpha * d).squaredNorm() + cd * d.squaredNorm());
       }},
      {rescaled_residual_channel(alpha, beta),
       [obj, c, alpha, e](double s, const Vec& X, const Vec&) {
         const double fx = obj.value(X);
         return detail::spow(s, e - 1.0) * (e * (c.f_star - fx) - alpha * obj.gradient(X).dot(c.x_star - X));
       }},
  };
}

inline std::vector<AccumulatorSpec> scagm_channels(const Objective& obj, double mu) {
  const auto c = detail::center_of(obj);
  const double sm = std::sqrt(mu);
  return {
      {scagm_dissipation_channel(mu),
       [sm](double s, const Vec&, const Vec& V) { return 0.5 * sm * std::exp(sm * s) * V.squaredNorm(); }},
      {scagm_gap_channel(mu),
       [obj, c, sm, mu](double s, const Vec& X, const Vec&) {
         return sm * std::exp(sm * s) * (detail::gap_to_star(obj, c, X) - 0.5 * mu * (X - c.x_star).squaredNorm());
       }},
  };
}

inline std::vector<AccumulatorSpec> gradient_flow_channels(const Objective& obj) {
  const auto c = detail::center_of(obj);
  return {
      {gf_dissipation_channel, [](double s, const Vec&, const Vec& V) { return s * V.squaredNorm(); }},
      {gf_gap_channel, [obj, c](double, const Vec& X, const Vec&) { return detail::gap_to_star(obj, c, X); }},
  };
}

/// Concatenates channel lists, dropping repeated names.
inline std::vector<AccumulatorSpec> merge_channels(std::initializer_list<std::vector<AccumulatorSpec>> lists) {
  std::vector<AccumulatorSpec> out;
  for (const auto& l : lists)
    for (const auto& s : l)
      if (std::none_of(out.begin(), out.end(), [&](const AccumulatorSpec& o) { return o.name == s.name; }))
        out.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// Conservation laws along vanishing / constant damping and gradient flow

namespace detail {

inline double integral_between(const Trajectory& tr, const std::string& channel, double t0, double t) {
  return dense_channel(tr, channel, t) - (t0 <= tr.t_first() ? 0.0 : dense_channel(tr, channel, t0));
}

inline void require_vanishing(const Trajectory& tr, double r, const char* who) {
  auto* v = std::get_if<VanishingDamping>(&tr.family.kind);
  if (!v) throw InvalidParameter(std::string(who) + ": trajectory is not from vanishing damping");
  if (std::abs(v->r - r) > 1e-12 * std::max(1.0, std::abs(r)))
    throw InvalidParameter(std::string(who) + ": trajectory damping r does not match");
}

inline double d0_sq(const Trajectory& tr) { return (tr.problem.x0 - tr.objective().require_minimizer()).squaredNorm(); }

struct AgmBoundary {
  double fterm, momentum, distance;
};

inline AgmBoundary agm_boundary(const Trajectory& tr, double r, double alpha, double beta, double t) {
  const Objective& obj = tr.objective();
  const Vec& xs = obj.require_minimizer();
  const double fs = obj.require_f_star();
  const auto [X, V] = dense_eval(tr, t);
  const Vec d = X - xs;
  const double e = alpha + beta;
  return {spow(t, e) * (obj.value(X) - fs), 0.5 * spow(t, e - 2.0) * (t * V + alpha * d).squaredNorm(),
          0.5 * alpha * (alpha + 1.0 - r) * spow(t, e - 2.0) * d.squaredNorm()};
}

}  // namespace detail

/// General (r, α) law. t0 = 0 selects the closed-form t0→0 limit (α ≥ 2 only).
inline EnergyBreakdown energy_agm_general(double r, double alpha, const Trajectory& tr, double t0, double t) {
  detail::require_vanishing(tr, r, "energy_agm_general");
  const std::string dis = agm_dissipation_channel(r, alpha), gap = agm_gap_channel(alpha);
  if (!tr.has_channel(dis) || !tr.has_channel(gap))
    throw ConfigurationError("energy_agm_general: channels " + dis + " and " + gap + " must be registered");
  if (t0 < 0.0 || (t0 > 0.0 && t0 < tr.t_first())) throw RangeError("energy_agm_general: t0 before trajectory start");
  if (t0 == 0.0 && alpha < 2.0) throw InvalidParameter("energy_agm_general: t0 -> 0 limit needs alpha >= 2");
  const auto b = detail::agm_boundary(tr, r, alpha, 0.0, t);
  EnergyBreakdown e;
  e.law_id = "agm_general";
  e.t = t;
  e.boundary_terms = {{"f_term", b.fterm}, {"momentum_term", b.momentum}, {"distance_term", b.distance}};
  e.dissipation_integral = detail::integral_between(tr, dis, t0, t);
  e.convexity_integral = detail::integral_between(tr, gap, t0, t);
  e.finalize();
  if (t0 == 0.0) {
    e.constant = alpha == 2.0 ? (5.0 - r) * detail::d0_sq(tr) : 0.0;
  } else {
    const auto b0 = detail::agm_boundary(tr, r, alpha, 0.0, t0);
    e.constant = b0.fterm + b0.momentum + b0.distance;
  }
  return e;
}

/// The r = 3 law t²(f−f★) + ½‖tẊ+2(X−X★)‖² + ∫2s·gap ≡ 2‖X₀−X★‖².
inline EnergyBreakdown energy_agm_r3(const Trajectory& tr, double t) {
  detail::require_vanishing(tr, 3.0, "energy_agm_r3");
  const std::string gap = agm_gap_channel(2.0);
  if (!tr.has_channel(gap)) throw ConfigurationError("energy_agm_r3: channel " + gap + " must be registered");
  const Objective& obj = tr.objective();
  const Vec& xs = obj.require_minimizer();
  const auto [X, V] = dense_eval(tr, t);
  EnergyBreakdown e;
  e.law_id = "agm_r3";
  e.t = t;
  e.boundary_terms = {{"f_term", t * t * (obj.value(X) - obj.require_f_star())},
                      {"momentum_term", 0.5 * conjugate_momentum(t, X, V, xs).squaredNorm()}};
  e.convexity_integral = dense_channel(tr, gap, t);
  e.finalize();
  e.constant = 2.0 * detail::d0_sq(tr);
  return e;
}

inline EnergyBreakdown energy_agm_r_gt3(double r, const Trajectory& tr, double t) {
  if (!(r > 3.0)) throw InvalidParameter("energy_agm_r_gt3: r must exceed 3");
  detail::require_vanishing(tr, r, "energy_agm_r_gt3");
  const std::string dis = r_gt3_dissipation_channel(r), gap = agm_gap_channel(2.0);
  if (!tr.has_channel(dis) || !tr.has_channel(gap))
    throw ConfigurationError("energy_agm_r_gt3: channels " + dis + " and " + gap + " must be registered");
  const Objective& obj = tr.objective();
  const Vec& xs = obj.require_minimizer();
  const auto [X, V] = dense_eval(tr, t);
  const Vec d = X - xs;
  const double d0 = detail::d0_sq(tr);
  EnergyBreakdown e;
  e.law_id = "agm_r_gt3";
  e.t = t;
  e.boundary_terms = {{"f_term", t * t * (obj.value(X) - obj.require_f_star())},
                      {"momentum_term", 0.5 * (t * V + 2.0 * d).squaredNorm()},
                      {"distance_term", (r - 3.0) * d.squaredNorm()},
                      {"initial_offset", -2.0 * (r - 3.0) * d0}};
  e.dissipation_integral = dense_channel(tr, dis, t);
  e.convexity_integral = dense_channel(tr, gap, t);
  e.finalize();
  e.constant = (5.0 - r) * d0;
  return e;
}

/// 0 ≤ r < 3 with α = 2r/3 from a positive starting time t0; E := total(t0).
inline EnergyBreakdown energy_agm_r_lt3(double r, const Trajectory& tr, double t0, double t) {
  if (!(r >= 0.0 && r < 3.0)) throw InvalidParameter("energy_agm_r_lt3: r must lie in [0, 3)");
  if (!(t0 > 0.0)) throw InvalidParameter("energy_agm_r_lt3: t0 must be positive");
  detail::require_vanishing(tr, r, "energy_agm_r_lt3");
  const double alpha = 2.0 * r / 3.0;
  const std::string dis = agm_dissipation_channel(r, alpha), gap = agm_gap_channel(alpha);
  if (!tr.has_channel(dis) || !tr.has_channel(gap))
    throw ConfigurationError("energy_agm_r_lt3: channels " + dis + " and " + gap + " must be registered");
  if (t0 < tr.t_first()) throw RangeError("energy_agm_r_lt3: t0 before trajectory start");
  const Objective& obj = tr.objective();
  const Vec& xs = obj.require_minimizer();
  const double fs = obj.require_f_star();
  auto boundary = [&](double s) {
    const auto [X, V] = dense_eval(tr, s);
    const Vec d = X - xs;
    const double w = detail::spow(s, alpha - 2.0);
    return std::array<double, 3>{detail::spow(s, alpha) * (obj.value(X) - fs), r * (3.0 - r) / 9.0 * w * d.squaredNorm(),
                                 0.5 * w * (s * V + alpha * d).squaredNorm()};
  };
  const auto b = boundary(t);
  EnergyBreakdown e;
  e.law_id = "agm_r_lt3";
  e.t = t;
  e.boundary_terms = {{"f_term", b[0]}, {"distance_term", b[1]}, {"momentum_term", b[2]}};
  e.dissipation_integral = detail::integral_between(tr, dis, t0, t);
  e.convexity_integral = detail::integral_between(tr, gap, t0, t);
  e.finalize();
  const auto b0 = boundary(t0);
  e.constant = b0[0] + b0[1] + b0[2];
  return e;
}

struct RescaledParams {
  double r = 0.0, alpha = 0.0, beta = 0.0;
  std::optional<double> gamma;  // set for the H₁(γ) preset
  bool warning = false;

  /// α = 2r/(γ+2), β = 2(γ−1)r/(γ+2).
  static RescaledParams h1(double r, double gamma) {
    if (!(gamma >= 1.0)) throw InvalidParameter("rescaled law: gamma must be >= 1");
    return {r, 2.0 * r / (gamma + 2.0), 2.0 * (gamma - 1.0) * r / (gamma + 2.0), gamma, r > 1.0 + 2.0 / gamma};
  }
  /// α = r−1, β = 3−r.
  static RescaledParams sbc(double r) { return {r, r - 1.0, 3.0 - r, std::nullopt, false}; }
};

/// Rescaled law t^β·(general law). t0 = 0 selects the t0→0 limit (needs α+β ≥ 2).
inline EnergyBreakdown energy_rescaled(const RescaledParams& p, const Trajectory& tr, double t0, double t) {
  detail::require_vanishing(tr, p.r, "energy_rescaled");
  if (p.gamma) {
    const auto& declared = tr.objective().h1_gamma();
    if (!declared) throw MetadataError("energy_rescaled: objective declares no H1 gamma");
    if (*p.gamma > *declared + 1e-12) throw MetadataError("energy_rescaled: objective does not satisfy H1 at this gamma");
  }
  const std::string dis = rescaled_dissipation_channel(p.r, p.alpha, p.beta), res = rescaled_residual_channel(p.alpha, p.beta);
  if (!tr.has_channel(dis) || !tr.has_channel(res))
    throw ConfigurationError("energy_rescaled: channels " + dis + " and " + res + " must be registered");
  const double e_pow = p.alpha + p.beta;
  if (t0 == 0.0 && e_pow < 2.0) throw InvalidParameter("energy_rescaled: t0 -> 0 limit needs alpha + beta >= 2");
  if (t0 > 0.0 && t0 < tr.t_first()) throw RangeError("energy_rescaled: t0 before trajectory start");
  const auto b = detail::agm_boundary(tr, p.r, p.alpha, p.beta, t);
  EnergyBreakdown e;
  e.law_id = p.gamma ? "rescaled_h1" : "rescaled";
  e.t = t;
  e.boundary_terms = {{"f_term", b.fterm}, {"momentum_term", b.momentum}, {"distance_term", b.distance}};
  e.dissipation_integral = detail::integral_between(tr, dis, t0, t);
  e.convexity_integral = detail::integral_between(tr, res, t0, t);
  e.finalize();
  e.warning = p.warning;
  if (p.warning) e.note = "r exceeds 1 + 2/gamma; terms may be negative";
  if (t0 == 0.0) {
    const double d0 = detail::d0_sq(tr);
    e.constant = e_pow == 2.0 ? 0.5 * (p.alpha * p.alpha + p.alpha * (p.alpha + 1.0 - p.r)) * d0 : 0.0;
  } else {
    const auto b0 = detail::agm_boundary(tr, p.r, p.alpha, p.beta, t0);
    e.constant = b0.fterm + b0.momentum + b0.distance;
  }
  return e;
}

inline EnergyBreakdown energy_scagm(double mu, const Trajectory& tr, double t) {
  auto* c = std::get_if<ConstantDamping>(&tr.family.kind);
  if (!c) throw InvalidParameter("energy_scagm: trajectory is not from constant damping");
  if (std::abs(c->mu - mu) > 1e-12 * mu) throw InvalidParameter("energy_scagm: damping mu does not match");
  const Objective& obj = tr.objective();
  if (obj.mu() < mu * (1.0 - 1e-12)) throw MetadataError("energy_scagm: objective is not mu-strongly convex");
  const std::string dis = scagm_dissipation_channel(mu), gap = scagm_gap_channel(mu);
  if (!tr.has_channel(dis) || !tr.has_channel(gap))
    throw ConfigurationError("energy_scagm: channels " + dis + " and " + gap + " must be registered");
  const Vec& xs = obj.require_minimizer();
  const double fs = obj.require_f_star();
  const double sm = std::sqrt(mu);
  const auto [X, V] = dense_eval(tr, t);
  const Vec d = X - xs;
  const double d0 = detail::d0_sq(tr);
  EnergyBreakdown e;
  e.law_id = "scagm";
  e.t = t;
  e.boundary_terms = {{"initial_offset", -0.5 * mu * d0},
                      {"scaled_energy", std::exp(sm * t) * (obj.value(X) - fs + 0.5 * (V + sm * d).squaredNorm())}};
  e.dissipation_integral = dense_channel(tr, dis, t);
  e.convexity_integral = dense_channel(tr, gap, t);
  e.finalize();
  e.constant = obj.value(tr.problem.x0) - fs;
  return e;
}

inline EnergyBreakdown energy_gradient_flow(const Trajectory& tr, double t) {
  if (!tr.family.first_order()) throw InvalidParameter("energy_gradient_flow: trajectory is not a gradient flow");
  if (!tr.has_channel(gf_dissipation_channel) || !tr.has_channel(gf_gap_channel))
    throw ConfigurationError("energy_gradient_flow: gradient-flow channels must be registered");
  const Objective& obj = tr.objective();
  const Vec& xs = obj.require_minimizer();
  const auto [X, V] = dense_eval(tr, t);
  const double d0 = detail::d0_sq(tr);
  EnergyBreakdown e;
  e.law_id = "gradient_flow";
  e.t = t;
  e.boundary_terms = {{"f_term", t * (obj.value(X) - obj.require_f_star())},
                      {"distance_term", 0.5 * (X - xs).squaredNorm()},
                      {"initial_offset", -d0}};
  e.dissipation_integral = dense_channel(tr, gf_dissipation_channel, t);
  e.convexity_integral = dense_channel(tr, gf_gap_channel, t);
  e.finalize();
  e.constant = -0.5 * d0;
  return e;
}

// ---------------------------------------------------------------------------
// OGM-G energy (post hoc Simpson, center may be X(T))

struct OgmgEnergyOptions {
  int min_panels = 64;          // Simpson panels per output interval, at least
  double max_spacing = 0.0;     // 0 selects (T)/20000
  double quad_tol = 1e-7;       // self-estimated error bound, relative to max(1, |E|)
  double delta_min = 0.0;       // 0 selects max(1e-6·T, 0)
};

namespace detail {

struct OgmgIntegrands {
  double dissipation, convexity;
};

inline OgmgIntegrands ogmg_integrands(double r, double alpha, double T, const Objective& obj, const Vec& Xc,
                                      double fc, double s, const Vec& X, const Vec& V) {
  const double tau = T - s;
  const Vec d = X - Xc;
  const double w = spow(tau, alpha - 3.0);
  const double dis = w * ((3.0 * alpha - 2.0 * r) / 2.0 * (tau * V - alpha * d).squaredNorm() -
                          alpha * (alpha + 1.0 - r) * (alpha + 2.0) / 2.0 * d.squaredNorm());
  const double gap = fc - obj.value(X) - obj.gradient(X).dot(Xc - X);
  return {dis, -2.0 * alpha * spow(tau, alpha - 1.0) * gap};
}

}  // namespace detail

/// Breakdown series at ascending times (each < T − δ_min), integrals from the trajectory start.
inline std::vector<EnergyBreakdown> energy_ogmg_series(double r, double alpha, const Vec& Xc, const Trajectory& tr,
                                                       std::vector<double> times, const OgmgEnergyOptions& opt = {}) {
  auto* m = std::get_if<TerminalDamping>(&tr.family.kind);
  if (!m) throw InvalidParameter("energy_ogmg: trajectory is not from terminal damping");
  if (std::abs(m->r - r) > 1e-12 * std::abs(r)) throw InvalidParameter("energy_ogmg: damping r does not match");
  if (!(r < 0.0)) throw InvalidParameter("energy_ogmg: r must be negative");
  const double T = m->T;
  const Objective& obj = tr.objective();
  if (Xc.size() != obj.dim()) throw InvalidParameter("energy_ogmg: center dimension mismatch");
  const double dmin = opt.delta_min > 0.0 ? opt.delta_min : 1e-6 * T;
  std::sort(times.begin(), times.end());
  for (double t : times) {
    if (t >= T - dmin * (1.0 - 1e-12)) throw RangeError("energy_ogmg: t must stay below T - delta_min");
    if (t < tr.t_first() || t > tr.t_last()) throw RangeError("energy_ogmg: t outside the trajectory");
  }
  const double fc = obj.value(Xc);
  const double t_start = tr.t_first();
  const double hmax = opt.max_spacing > 0.0 ? opt.max_spacing : T / 20000.0;

  auto integrands = [&](double s) {
    const auto [X, V] = dense_eval(tr, s);
    return detail::ogmg_integrands(r, alpha, T, obj, Xc, fc, s, X, V);
  };
  auto boundary = [&](double s, const Vec& X, const Vec& V) {
    const double tau = T - s;
    const Vec d = X - Xc;
    const double w = detail::spow(tau, alpha - 2.0);
    return std::array<double, 3>{2.0 * detail::spow(tau, alpha) * (obj.value(X) - fc),
                                 0.5 * w * (tau * V - alpha * d).squaredNorm(),
                                 alpha * (alpha + 1.0 - r) / 2.0 * w * d.squaredNorm()};
  };

  std::vector<EnergyBreakdown> out;
  double acc_dis = 0.0, acc_gap = 0.0, acc_err = 0.0;
  double a = t_start;
  const auto [X0s, V0s] = dense_eval(tr, t_start);
  const auto b0 = boundary(t_start, X0s, V0s);
  const double E0 = b0[0] + b0[1] + b0[2];
  auto prev = integrands(a);
  for (double t : times) {
    if (t > a) {
      // 4k subintervals: Simpson at spacing H (2k panels) and 2H (k panels).
      const int k = std::max(opt.min_panels / 2, static_cast<int>(std::ceil((t - a) / (4.0 * hmax))));
      const int nsub = 4 * k;
      const double H = (t - a) / nsub;
      std::vector<detail::OgmgIntegrands> vals(nsub + 1);
      vals[0] = prev;
      for (int j = 1; j <= nsub; ++j) vals[j] = integrands(j == nsub ? t : a + j * H);
      auto simpson = [&](int stride, auto field) {
        double sum = 0.0;
        const double h = H * stride;
        for (int j = 0; j + 2 * stride <= nsub; j += 2 * stride)
          sum += h / 3.0 * (field(vals[j]) + 4.0 * field(vals[j + stride]) + field(vals[j + 2 * stride]));
        return sum;
      };
      auto fd = [](const detail::OgmgIntegrands& v) { return v.dissipation; };
      auto fg = [](const detail::OgmgIntegrands& v) { return v.convexity; };
      const double sd1 = simpson(1, fd), sd2 = simpson(2, fd);
      const double sg1 = simpson(1, fg), sg2 = simpson(2, fg);
      acc_dis += sd1;
      acc_gap += sg1;
      acc_err += (std::abs(sd1 - sd2) + std::abs(sg1 - sg2)) / 15.0;
      prev = vals[nsub];
      a = t;
    }
    const auto [X, V] = dense_eval(tr, t);
    const auto b = boundary(t, X, V);
    EnergyBreakdown e;
    e.law_id = "ogmg_general";
    e.t = t;
    e.boundary_terms = {{"f_term", b[0]}, {"momentum_term", b[1]}, {"distance_term", b[2]}};
    e.dissipation_integral = acc_dis;
    e.convexity_integral = acc_gap;
    e.quadrature_error = acc_err;
    e.finalize();
    e.constant = E0;
    out.push_back(std::move(e));
  }
  const double scale = std::max(1.0, std::abs(E0));
  if (acc_err > opt.quad_tol * scale)
    throw QuadratureError("energy_ogmg: Simpson self-error " + detail::fmt_param(acc_err) + " exceeds tolerance");
  return out;
}

inline EnergyBreakdown energy_ogmg_general(double r, double alpha, const Vec& Xc, const Trajectory& tr, double t,
                                           const OgmgEnergyOptions& opt = {}) {
  return energy_ogmg_series(r, alpha, Xc, tr, {t}, opt).front();
}

/// Closed-form E = 2T^α(f(X₀)−f(X_c)) + (α²/2 + α(α+1−r)/2)T^{α−2}‖X₀−X_c‖² for a start at rest.
inline double ogmg_energy_constant(double r, double alpha, double T, const Objective& obj, const Vec& x0, const Vec& Xc) {
  return 2.0 * detail::spow(T, alpha) * (obj.value(x0) - obj.value(Xc)) +
         (alpha * alpha / 2.0 + alpha * (alpha + 1.0 - r) / 2.0) * detail::spow(T, alpha - 2.0) * (x0 - Xc).squaredNorm();
}

// ---------------------------------------------------------------------------
// Lyapunov functions

/// Φ(t) = t²·f_gap + ½‖tẊ + 2(X−X★)‖².
inline double lyapunov_agm(double t, const Vec& X, const Vec& V, const Vec& x_star, double f_gap) {
  if (t < 0.0) throw RangeError("lyapunov_agm: t must be nonnegative");
  return t * t * f_gap + 0.5 * conjugate_momentum(t, X, V, x_star).squaredNorm();
}

/// Φ(t) = 2τ^{-2}·f_gap + ½τ^{-4}‖τẊ+2(X−X_T)‖² + (r+1)τ^{-4}‖X−X_T‖², τ = T−t.
inline double lyapunov_ogmg(double t, const Vec& X, const Vec& V, const Vec& X_T, double f_gap, double T, double r) {
  if (!(t < T)) throw RangeError("lyapunov_ogmg: t must be below T");
  if (t < 0.0) throw RangeError("lyapunov_ogmg: t must be nonnegative");
  if (!(r <= -3.0)) throw InvalidParameter("lyapunov_ogmg: r must be <= -3");
  const double tau = T - t;
  const double t2 = tau * tau, t4 = t2 * t2;
  const Vec d = X - X_T;
  return 2.0 * f_gap / t2 + 0.5 * (tau * V + 2.0 * d).squaredNorm() / t4 + (r + 1.0) * d.squaredNorm() / t4;
}

// ---------------------------------------------------------------------------
// Rate bounds

enum class BoundLaw { AgmR3, AgmRGt3, AgmRLt3, H1, ScAgm, GradientFlow, OgmgR3, OgmgGeneral, Concat };

struct BoundParams {
  std::optional<double> r, gamma, mu, E;
};

struct InitData {
  std::optional<double> dist0_sq;      // ‖X₀−X★‖²
  std::optional<double> f0_gap;        // f(X₀) − f★ (or f(X₀) − f(X(T)) for the OGM-G laws)
};

inline double rate_bound(BoundLaw law, const BoundParams& p, double t, const InitData& init) {
  auto need = [](const std::optional<double>& v, const char* what) {
    if (!v) throw InvalidParameter(std::string("rate_bound: missing ") + what);
    return *v;
  };
  if (!(t > 0.0)) throw InvalidParameter("rate_bound: time must be positive");
  switch (law) {
    case BoundLaw::AgmR3:
      if (p.r && *p.r != 3.0) throw InvalidParameter("rate_bound: AgmR3 requires r = 3");
      return 2.0 * need(init.dist0_sq, "dist0_sq") / (t * t);
    case BoundLaw::AgmRGt3: {
      const double r = need(p.r, "r");
      if (!(r > 3.0)) throw InvalidParameter("rate_bound: r must exceed 3");
      return (r - 1.0) * need(init.dist0_sq, "dist0_sq") / (t * t);
    }
    case BoundLaw::AgmRLt3: {
      const double r = need(p.r, "r");
      if (!(r >= 0.0 && r < 3.0)) throw InvalidParameter("rate_bound: r must lie in [0, 3)");
      return need(p.E, "E") / std::pow(t, 2.0 * r / 3.0);
    }
    case BoundLaw::H1: {
      const double r = need(p.r, "r"), g = need(p.gamma, "gamma");
      if (!(g >= 1.0)) throw InvalidParameter("rate_bound: gamma must be >= 1");
      if (r > 1.0 + 2.0 / g) throw InvalidParameter("rate_bound: H1 bound needs r <= 1 + 2/gamma");
      return need(p.E, "E") / std::pow(t, 2.0 * g * r / (g + 2.0));
    }
    case BoundLaw::ScAgm: {
      const double mu = need(p.mu, "mu");
      if (!(mu > 0.0)) throw InvalidParameter("rate_bound: mu must be positive");
      return std::exp(-std::sqrt(mu) * t) * (need(init.f0_gap, "f0_gap") + 0.5 * mu * need(init.dist0_sq, "dist0_sq"));
    }
    case BoundLaw::GradientFlow:
      return need(init.dist0_sq, "dist0_sq") / (2.0 * t);
    case BoundLaw::OgmgR3:
      if (p.r && *p.r != -3.0) throw InvalidParameter("rate_bound: OgmgR3 requires r = -3");
      return 4.0 * need(init.f0_gap, "f0_gap") / (t * t);
    case BoundLaw::OgmgGeneral: {
      const double r = need(p.r, "r");
      if (!(r <= -3.0)) throw InvalidParameter("rate_bound: OGM-G bound needs r <= -3");
      return 2.0 * (-1.0 - r) * need(init.f0_gap, "f0_gap") / (t * t);
    }
    case BoundLaw::Concat:
      return 8.0 * need(init.dist0_sq, "dist0_sq") / (t * t * t * t);
  }
  throw InvalidParameter("rate_bound: unknown law");
}

// ---------------------------------------------------------------------------
// Hamiltonian identity along the r = 3 flow

struct HamiltonianSample {
  double H = 0.0;
  double dH_dt = 0.0;
  double partial_t_H = 0.0;
};

/// H = (t/2)‖P‖² + t³(f−f★) with W = t²(X−X★), P = tẊ + 2(X−X★).
inline double hamiltonian(double t, const Vec& X, const Vec& V, const Vec& x_star, double f_gap) {
  return 0.5 * t * conjugate_momentum(t, X, V, x_star).squaredNorm() + t * t * t * f_gap;
}

/// dH/dt by Richardson-extrapolated central differences along the trajectory, step
/// rel_step·min(t, 1/√L) so it resolves the fastest oscillation; ∂H/∂t analytically at fixed (W, P).
inline HamiltonianSample hamiltonian_check(const Trajectory& tr, const Vec& x_star, double t, double rel_step = 3e-2) {
  detail::require_vanishing(tr, 3.0, "hamiltonian_check");
  const Objective& obj = tr.objective();
  const double fs = obj.require_f_star();
  const double h = rel_step * std::min(t, 1.0 / std::sqrt(obj.L()));
  if (!(h > 64.0 * std::numeric_limits<double>::epsilon() * t)) throw NumericError("hamiltonian_check: step underflow");
  if (t - h < tr.t_first() || t + h > tr.t_last()) throw RangeError("hamiltonian_check: t too close to the ends");
  auto H_at = [&](double s) {
    const auto [X, V] = dense_eval(tr, s);
    return hamiltonian(s, X, V, x_star, obj.value(X) - fs);
  };
  const double D1 = (H_at(t + h) - H_at(t - h)) / (2.0 * h);
  const double D2 = (H_at(t + 0.5 * h) - H_at(t - 0.5 * h)) / h;
  const auto [X, V] = dense_eval(tr, t);
  const Vec P = conjugate_momentum(t, X, V, x_star);
  const Vec dX_dt = -2.0 * (X - x_star) / t;
  HamiltonianSample out;
  out.H = hamiltonian(t, X, V, x_star, obj.value(X) - fs);
  out.dH_dt = (4.0 * D2 - D1) / 3.0;
  out.partial_t_H = 0.5 * P.squaredNorm() + 3.0 * t * t * (obj.value(X) - fs) + t * t * t * obj.gradient(X).dot(dX_dt);
  return out;
}

// ---------------------------------------------------------------------------
// Output

inline void write_energy_csv(std::ostream& os, const std::vector<EnergyBreakdown>& ledger) {
  os << "t";
  if (!ledger.empty())
    for (const auto& kv : ledger.front().boundary_terms) os << ',' << kv.first;
  os << ",dissipation_integral,convexity_integral,total\n" << std::setprecision(17);
  for (const auto& e : ledger) {
    os << e.t;
    for (const auto& kv : e.boundary_terms) os << ',' << kv.second;
    os << ',' << e.dissipation_integral << ',' << e.convexity_integral << ',' << e.total << '\n';
  }
}

inline nlohmann::json certificate_json(const Certificate& c) {
  nlohmann::json j{{"id", c.id},
                   {"kind", kind_name(c.kind)},
                   {"pass", c.pass},
                   {"worst_violation", c.worst_violation},
                   {"tolerance", c.tolerance}};
  if (!std::isfinite(c.worst_violation)) j["worst_violation"] = "inf";
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

}  // namespace agmlab
