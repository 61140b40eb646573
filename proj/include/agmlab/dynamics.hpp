#pragma once

// ODE families, an adaptive Dormand–Prince integrator with co-integrated
// accumulators, dense output, and terminal-time analysis for the OGM-G flow.

#include <agmlab/errors.hpp>
#include <agmlab/linalg.hpp>
#include <agmlab/problems.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace agmlab {

struct VanishingDamping {
  double r;
};
struct ConstantDamping {
  double mu;
};
struct TerminalDamping {
  double r;
  double T;
};
struct GradientFlow {};

/// One of the damped flows  Ẍ + d(t)Ẋ + g∇f(X) = 0, or Ẋ = −∇f(X).
struct OdeFamily {
  std::variant<VanishingDamping, ConstantDamping, TerminalDamping, GradientFlow> kind;
  double gradient_scale = 1.0;

  static OdeFamily vanishing(double r) { return {VanishingDamping{r}, 1.0}; }
  static OdeFamily constant(double mu) {
    if (!(mu > 0.0)) throw InvalidParameter("constant damping requires mu > 0");
    return {ConstantDamping{mu}, 1.0};
  }
  static OdeFamily terminal(double r, double T) {
    if (!(r < 0.0)) throw InvalidParameter("terminal damping requires r < 0");
    if (!(T > 0.0)) throw InvalidParameter("terminal damping requires T > 0");
    return {TerminalDamping{r, T}, 2.0};
  }
  static OdeFamily gradient_flow() { return {GradientFlow{}, 1.0}; }

  bool first_order() const { return std::holds_alternative<GradientFlow>(kind); }
  bool is_vanishing() const { return std::holds_alternative<VanishingDamping>(kind); }
  bool is_terminal() const { return std::holds_alternative<TerminalDamping>(kind); }

  /// Coefficient d(t) multiplying Ẋ.
  double damping(double t) const {
    if (auto* v = std::get_if<VanishingDamping>(&kind)) return v->r / t;
    if (auto* c = std::get_if<ConstantDamping>(&kind)) return 2.0 * std::sqrt(c->mu);
    if (auto* m = std::get_if<TerminalDamping>(&kind)) return m->r / (t - m->T);
    return 0.0;
  }

  std::string name() const {
    std::ostringstream os;
    os << std::setprecision(6);
    if (auto* v = std::get_if<VanishingDamping>(&kind)) os << "vanishing(r=" << v->r << ")";
    else if (auto* c = std::get_if<ConstantDamping>(&kind)) os << "constant(mu=" << c->mu << ")";
    else if (auto* m = std::get_if<TerminalDamping>(&kind)) os << "terminal(r=" << m->r << ",T=" << m->T << ")";
    else os << "gradient_flow";
    return os.str();
  }
};

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double start_offset = 0.0;     // ε; 0 selects 1e-6·horizon
  double terminal_offset = 0.0;  // δ; 0 selects 1e-6·T
  int sample_count = 0;          // uniform output grid; 0 keeps only step nodes
  long max_steps = 5'000'000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw InvalidParameter("tolerances must be positive");
    if (!(max_step > 0.0)) throw InvalidParameter("max_step must be positive");
    if (start_offset < 0.0 || terminal_offset < 0.0) throw InvalidParameter("offsets must be nonnegative");
    if (sample_count < 0) throw InvalidParameter("sample_count must be nonnegative");
  }

  IntegratorConfig scaled(double factor) const {
    IntegratorConfig c = *this;
    c.rel_tol *= factor;
    c.abs_tol *= factor;
    return c;
  }
};

/// Extra scalar state q with q' = integrand(t, X, Ẋ), q(t_start) = 0.
struct AccumulatorSpec {
  std::string name;
  std::function<double(double, const Vec&, const Vec&)> integrand;
};

struct Trajectory {
  OdeFamily family;
  ProblemInstance problem;
  std::vector<double> times;
  std::vector<Vec> X;
  std::vector<Vec> V;
  std::vector<Vec> A;  // Ẍ at each node (unused for gradient flow)
  std::vector<std::string> channel_names;
  std::vector<std::vector<double>> channels;
  std::vector<std::vector<double>> channel_rates;
  std::vector<std::size_t> sample_nodes;  // node indices of requested output times
  long accepted_steps = 0;
  long rejected_steps = 0;

  std::size_t size() const { return times.size(); }
  int dim() const { return problem.objective.dim(); }
  double t_first() const { return times.front(); }
  double t_last() const { return times.back(); }
  const Objective& objective() const { return problem.objective; }
  const std::string& label() const { return problem.label; }

  bool has_channel(const std::string& name) const {
    return std::find(channel_names.begin(), channel_names.end(), name) != channel_names.end();
  }
  std::size_t channel_index(const std::string& name) const {
    auto it = std::find(channel_names.begin(), channel_names.end(), name);
    if (it == channel_names.end()) throw ConfigurationError("trajectory has no accumulator channel '" + name + "'");
    return static_cast<std::size_t>(it - channel_names.begin());
  }
  const std::vector<double>& channel(const std::string& name) const { return channels[channel_index(name)]; }
};

// ---------------------------------------------------------------------------

/// Second-order series start (X(ε), Ẋ(ε)) for the damped flows.
inline std::pair<Vec, Vec> taylor_init(const OdeFamily& family, const Objective& obj, const Vec& x0, double eps) {
  if (!(eps >= 0.0)) throw InvalidParameter("taylor_init: eps must be nonnegative");
  if (x0.size() != obj.dim()) throw InvalidParameter("taylor_init: dimension mismatch");
  const Vec g = obj.gradient(x0);
  if (!all_finite(g)) throw OracleFailure("gradient is not finite at x0");
  if (auto* v = std::get_if<VanishingDamping>(&family.kind)) {
    if (!(v->r > -1.0)) throw InvalidParameter("taylor_init: vanishing damping requires r > -1");
    const double c = 1.0 / (1.0 + v->r);
    return {x0 - (0.5 * eps * eps * c) * g, -(eps * c) * g};
  }
  if (family.first_order()) throw InvalidParameter("taylor_init: gradient flow needs no series start");
  const double gs = family.gradient_scale;
  return {x0 - (0.5 * gs * eps * eps) * g, -(gs * eps) * g};
}

namespace detail {

// Dormand–Prince 5(4) tableau.
struct DP45 {
  static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

class FlowSystem {
 public:
  FlowSystem(const OdeFamily& family, const Objective& obj, const std::vector<AccumulatorSpec>* specs)
      : family_(family), obj_(obj), specs_(specs), n_(obj.dim()) {}

  int n() const { return n_; }
  int state_dim() const { return n_ * (family_.first_order() ? 1 : 2) + channel_count(); }
  int channel_count() const { return specs_ ? static_cast<int>(specs_->size()) : 0; }
  int channel_offset() const { return n_ * (family_.first_order() ? 1 : 2); }

  Vec grad(const Vec& x) const {
    Vec g = obj_.gradient(x);
    if (!all_finite(g)) throw OracleFailure("gradient oracle returned a non-finite value");
    return g;
  }

  Vec position(const Vec& y) const { return y.head(n_); }
  Vec velocity(const Vec& y) const {
    return family_.first_order() ? Vec(-grad(y.head(n_))) : Vec(y.segment(n_, n_));
  }

  Vec rhs(double t, const Vec& y) const {
    Vec dy(y.size());
    const Vec x = y.head(n_);
    const Vec g = grad(x);
    Vec v;
    if (family_.first_order()) {
      v = -g;
      dy.head(n_) = v;
    } else {
      v = y.segment(n_, n_);
      dy.head(n_) = v;
      dy.segment(n_, n_) = -family_.damping(t) * v - family_.gradient_scale * g;
    }
    const int off = channel_offset();
    for (int i = 0; i < channel_count(); ++i) {
      const double q = (*specs_)[i].integrand(t, x, v);
      if (!std::isfinite(q)) throw OracleFailure("accumulator '" + (*specs_)[i].name + "' integrand is not finite");
      dy(off + i) = q;
    }
    return dy;
  }

 private:
  const OdeFamily& family_;
  const Objective& obj_;
  const std::vector<AccumulatorSpec>* specs_;
  int n_;
};

inline double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double rtol, double atol) {
  const Vec sc = (atol + rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array()).matrix();
  return std::sqrt((err.cwiseQuotient(sc)).squaredNorm() / static_cast<double>(err.size()));
}

struct StepResult {
  Vec y;
  Vec dy;  // rhs at the new point (FSAL)
  double err;
};

inline StepResult dp_step(const FlowSystem& sys, double t, const Vec& y, const Vec& k1, double h, double rtol,
                          double atol) {
  using D = DP45;
  const Vec k2 = sys.rhs(t + D::c[1] * h, y + h * (D::a21 * k1));
  const Vec k3 = sys.rhs(t + D::c[2] * h, y + h * (D::a31 * k1 + D::a32 * k2));
  const Vec k4 = sys.rhs(t + D::c[3] * h, y + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3));
  const Vec k5 = sys.rhs(t + D::c[4] * h, y + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4));
  const Vec k6 =
      sys.rhs(t + h, y + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 + D::a65 * k5));
  Vec y1 = y + h * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 + D::b6 * k6);
  Vec k7 = sys.rhs(t + h, y1);
  const Vec e = h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * k7);
  return {std::move(y1), std::move(k7), error_norm(e, y, y + h * k1, rtol, atol)};
}

inline double initial_step(const FlowSystem& sys, double t0, const Vec& y0, const Vec& f0, double span,
                           double rtol, double atol) {
  const Vec sc = (atol + rtol * y0.cwiseAbs().array()).matrix();
  const double d0 = std::sqrt(y0.cwiseQuotient(sc).squaredNorm() / y0.size());
  const double d1 = std::sqrt(f0.cwiseQuotient(sc).squaredNorm() / y0.size());
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  const Vec f1 = sys.rhs(t0 + h0, y0 + h0 * f0);
  const double d2 = std::sqrt((f1 - f0).cwiseQuotient(sc).squaredNorm() / y0.size()) / h0;
  const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                               : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
  // Singular damping at the start: never step further than the start time itself.
  return std::min({100.0 * h0, h1, span});
}

inline void push_node(Trajectory& tr, const FlowSystem& sys, double t, const Vec& y, const Vec& dy) {
  const int n = sys.n();
  tr.times.push_back(t);
  tr.X.push_back(y.head(n));
  if (tr.family.first_order()) {
    tr.V.push_back(dy.head(n));
    tr.A.push_back(Vec::Zero(n));
  } else {
    tr.V.push_back(y.segment(n, n));
    tr.A.push_back(dy.segment(n, n));
  }
  const int off = sys.channel_offset();
  for (int i = 0; i < sys.channel_count(); ++i) {
    tr.channels[i].push_back(y(off + i));
    tr.channel_rates[i].push_back(dy(off + i));
  }
}

// Runs DP45 from (t0, y0) to t1, hitting every time in `stops` exactly.
// `on_node` is invoked for every accepted node (including t0).
template <class OnNode>
inline Vec drive(const FlowSystem& sys, double t0, Vec y, double t1, const std::vector<double>& stops,
                 const IntegratorConfig& cfg, long& accepted, long& rejected, OnNode on_node) {
  Vec k1 = sys.rhs(t0, y);
  on_node(t0, y, k1, false);
  const double span = t1 - t0;
  double h = std::min(initial_step(sys, t0, y, k1, span, cfg.rel_tol, cfg.abs_tol), cfg.max_step);
  if (t0 > 0.0) h = std::min(h, 0.5 * t0);
  double t = t0;
  std::size_t next_stop = 0;
  while (next_stop < stops.size() && stops[next_stop] <= t0) ++next_stop;
  long steps = 0;
  while (t < t1) {
    if (++steps > cfg.max_steps) throw IntegrationFailure("step budget exhausted", t);
    const double target = next_stop < stops.size() ? std::min(stops[next_stop], t1) : t1;
    bool clamped = false;
    double hs = std::min(h, cfg.max_step);
    if (t + hs >= target || target - (t + hs) < 1e-12 * std::max(1.0, std::abs(target))) {
      hs = target - t;
      clamped = true;
    }
    if (hs <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
      throw IntegrationFailure("step size underflow", t);
    StepResult st = dp_step(sys, t, y, k1, hs, cfg.rel_tol, cfg.abs_tol);
    if (!all_finite(st.y)) {
      ++rejected;
      h = 0.25 * hs;
      continue;
    }
    if (st.err <= 1.0) {
      t = clamped ? target : t + hs;
      y = std::move(st.y);
      k1 = std::move(st.dy);
      ++accepted;
      const bool is_stop = clamped && next_stop < stops.size() && target == stops[next_stop];
      if (is_stop) ++next_stop;
      on_node(t, y, k1, is_stop);
      const double fac = st.err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(st.err, -0.2), 0.2, 5.0);
      // A clamped step says nothing about the natural step length; do not shrink h for it.
      h = clamped ? std::max(h, hs * fac) : hs * fac;
    } else {
      ++rejected;
      h = hs * std::clamp(0.9 * std::pow(st.err, -0.2), 0.1, 0.9);
    }
  }
  return y;
}

inline std::vector<double> uniform_grid(double a, double b, int count) {
  std::vector<double> out;
  if (count <= 0) return out;
  if (count == 1) return {b};
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(i + 1 == count ? b : a + (b - a) * i / (count - 1.0));
  return out;
}

}  // namespace detail

/// Effective start time for a run requested to begin at t_start.
inline double effective_start(const OdeFamily& family, double t_start, double t_end, const IntegratorConfig& cfg) {
  if (!family.is_vanishing()) return t_start;
  const double eps = cfg.start_offset > 0.0 ? cfg.start_offset : 1e-6 * (t_end - t_start);
  return std::max(t_start, eps);
}

/// Terminal offset δ_min = max(δ_config, 1e-6·T).
inline double terminal_offset_min(const OdeFamily& family, const IntegratorConfig& cfg) {
  auto* m = std::get_if<TerminalDamping>(&family.kind);
  if (!m) return 0.0;
  return std::max(cfg.terminal_offset, 1e-6 * m->T);
}

/// Integrates the flow on [t_start, t_end]. For vanishing damping the run starts at
/// max(t_start, ε) from the series seed; accumulators start at 0 at the first node.
inline Trajectory integrate(const OdeFamily& family, const ProblemInstance& problem, double t_start, double t_end,
                            const IntegratorConfig& config, const std::vector<AccumulatorSpec>& accumulators = {},
                            std::vector<double> output_times = {}) {
  config.validate();
  if (!(t_start < t_end)) throw InvalidParameter("integrate: t_start must be < t_end");
  if (t_start < 0.0) throw InvalidParameter("integrate: t_start must be nonnegative");
  if (auto* m = std::get_if<TerminalDamping>(&family.kind)) {
    if (t_end > m->T - terminal_offset_min(family, config) * (1.0 - 1e-12))
      throw RangeError("integrate: terminal damping requires t_end <= T - delta");
  }
  const Objective& obj = problem.objective;
  const double eps = effective_start(family, t_start, t_end, config);
  if (eps >= t_end) throw InvalidParameter("integrate: start offset exceeds the horizon");

  Vec x, v;
  double t0 = t_start;
  detail::FlowSystem bare(family, obj, nullptr);
  long acc_steps = 0, rej_steps = 0;
  if (family.is_vanishing()) {
    const double seed_t = std::min(eps, config.start_offset > 0.0 ? config.start_offset : 1e-6 * (t_end - t_start));
    std::tie(x, v) = taylor_init(family, obj, problem.x0, seed_t);
    t0 = eps;
    if (eps > seed_t) {
      Vec y(2 * obj.dim());
      y << x, v;
      y = detail::drive(bare, seed_t, y, eps, {}, config, acc_steps, rej_steps,
                        [](double, const Vec&, const Vec&, bool) {});
      x = y.head(obj.dim());
      v = y.segment(obj.dim(), obj.dim());
    }
  } else {
    x = problem.x0;
    v = Vec::Zero(obj.dim());
    if (!std::isfinite(obj.value(x))) throw OracleFailure("objective is not finite at x0");
  }

  detail::FlowSystem sys(family, obj, &accumulators);
  Vec y(sys.state_dim());
  y.head(obj.dim()) = x;
  if (!family.first_order()) y.segment(obj.dim(), obj.dim()) = v;
  y.tail(sys.channel_count()).setZero();

  if (output_times.empty()) output_times = detail::uniform_grid(t0, t_end, config.sample_count);
  std::sort(output_times.begin(), output_times.end());
  output_times.erase(std::unique(output_times.begin(), output_times.end()), output_times.end());
  for (double s : output_times)
    if (s < t0 - 1e-15 * std::max(1.0, t0) || s > t_end) throw RangeError("integrate: output time outside the run");

  Trajectory tr{family, problem, {}, {}, {}, {}, {}, {}, {}, {}, 0, 0};
  for (const auto& a : accumulators) tr.channel_names.push_back(a.name);
  tr.channels.resize(accumulators.size());
  tr.channel_rates.resize(accumulators.size());

  detail::drive(sys, t0, y, t_end, output_times, config, acc_steps, rej_steps,
                [&](double t, const Vec& yy, const Vec& dy, bool is_stop) {
                  detail::push_node(tr, sys, t, yy, dy);
                  if (is_stop) tr.sample_nodes.push_back(tr.times.size() - 1);
                });
  if (!output_times.empty() && output_times.front() <= t0) tr.sample_nodes.insert(tr.sample_nodes.begin(), 0);
  tr.accepted_steps = acc_steps;
  tr.rejected_steps = rej_steps;
  return tr;
}

namespace detail {

inline std::size_t locate(const Trajectory& tr, double t) {
  if (tr.times.empty()) throw RangeError("dense_eval: empty trajectory");
  const double lo = tr.times.front(), hi = tr.times.back();
  if (t < lo || t > hi) throw RangeError("dense_eval: t outside the trajectory range");
  auto it = std::upper_bound(tr.times.begin(), tr.times.end(), t);
  std::size_t i = static_cast<std::size_t>(it - tr.times.begin());
  return i == 0 ? 0 : std::min(i - 1, tr.times.size() - 2);
}

struct Hermite {
  double h00, h10, h01, h11, d00, d10, d01, d11;
  Hermite(double t0, double t1, double t) {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s, s3 = s2 * s;
    h00 = 2 * s3 - 3 * s2 + 1;
    h10 = (s3 - 2 * s2 + s) * h;
    h01 = -2 * s3 + 3 * s2;
    h11 = (s3 - s2) * h;
    d00 = (6 * s2 - 6 * s) / h;
    d10 = 3 * s2 - 4 * s + 1;
    d01 = (-6 * s2 + 6 * s) / h;
    d11 = 3 * s2 - 2 * s;
  }
};

}  // namespace detail

/// Cubic-Hermite (X(t), Ẋ(t)); exact at stored nodes.
inline std::pair<Vec, Vec> dense_eval(const Trajectory& tr, double t) {
  const std::size_t i = detail::locate(tr, t);
  if (tr.times.size() == 1 || t == tr.times[i]) return {tr.X[i], tr.V[i]};
  if (t == tr.times[i + 1]) return {tr.X[i + 1], tr.V[i + 1]};
  const detail::Hermite w(tr.times[i], tr.times[i + 1], t);
  Vec x = w.h00 * tr.X[i] + w.h10 * tr.V[i] + w.h01 * tr.X[i + 1] + w.h11 * tr.V[i + 1];
  if (tr.family.first_order()) {
    Vec v = -tr.objective().gradient(x);
    return {std::move(x), std::move(v)};
  }
  Vec v = w.h00 * tr.V[i] + w.h10 * tr.A[i] + w.h01 * tr.V[i + 1] + w.h11 * tr.A[i + 1];
  return {std::move(x), std::move(v)};
}

/// Cubic-Hermite value of an accumulator channel.
inline double dense_channel(const Trajectory& tr, const std::string& name, double t) {
  const std::size_t c = tr.channel_index(name);
  const std::size_t i = detail::locate(tr, t);
  if (tr.times.size() == 1 || t == tr.times[i]) return tr.channels[c][i];
  if (t == tr.times[i + 1]) return tr.channels[c][i + 1];
  const detail::Hermite w(tr.times[i], tr.times[i + 1], t);
  return w.h00 * tr.channels[c][i] + w.h10 * tr.channel_rates[c][i] + w.h01 * tr.channels[c][i + 1] +
         w.h11 * tr.channel_rates[c][i + 1];
}

/// Times of the requested output grid (falls back to all nodes).
inline std::vector<double> sample_times(const Trajectory& tr) {
  std::vector<double> out;
  if (tr.sample_nodes.empty()) return tr.times;
  for (std::size_t i : tr.sample_nodes) out.push_back(tr.times[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Terminal analysis

struct TerminalReport {
  Vec X_T;
  Vec velocity_limit;  // lim Ẋ(t)/(t−T)
  Vec grad_estimate;   // −(r+1)/2 · velocity_limit
  Vec grad_at_XT;      // ∇f(X_T)
  double limit_coefficient = 0.0;  // ⟨velocity_limit, ∇f(X_T)⟩/‖∇f(X_T)‖², expected −2/(r+1)
  double limit_residual = 0.0;     // ‖velocity_limit + 2/(r+1)∇f(X_T)‖
  std::vector<std::pair<double, double>> speed_decay;  // (δ, ‖Ẋ(T−δ)‖)
  std::vector<std::pair<double, double>> ratio_error;  // (δ, ‖Ẋ(T−δ)/(−δ) + 2/(r+1)∇f(X_T)‖)
  double extrapolation_order = 0.0;  // observed order of X(T−δ) → X_T
  double ratio_order = 0.0;          // observed order of ratio_error over the caller's ladder
  double f_X0 = 0.0;
  double f_XT = 0.0;
  double delta_min = 0.0;
  std::shared_ptr<const Trajectory> trajectory;
};

namespace detail {

// Order from the norms of successive differences e1−e2, e2−e3 on a ladder with ratio q.
inline double difference_order(double d12, double d23, double q) {
  if (d12 == 0.0 || d23 == 0.0) return std::numeric_limits<double>::infinity();
  return std::log(d12 / d23) / std::log(q);
}

// Least-squares slope of log(err) against log(δ).
inline double fitted_order(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (auto [d, e] : pts) {
    if (!(e > 0.0)) continue;
    const double lx = std::log(d), ly = std::log(e);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::infinity();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

/// Integrates the OGM-G flow up to T−δ for each δ and extrapolates X(T) and
/// lim Ẋ(t)/(t−T) in δ² over a geometric ladder ending at δ_min.
inline TerminalReport terminal_analysis(const OdeFamily& family, const ProblemInstance& problem,
                                        const IntegratorConfig& config, std::vector<double> deltas,
                                        const std::vector<AccumulatorSpec>& accumulators = {},
                                        int sample_count = 0) {
  auto* m = std::get_if<TerminalDamping>(&family.kind);
  if (!m) throw InvalidParameter("terminal_analysis: family must be terminal damping");
  const double r = m->r, T = m->T;
  if (!(r < 0.0)) throw InvalidParameter("terminal_analysis: r must be negative");
  if (r == -1.0) throw InvalidParameter("terminal_analysis: r = -1 has no finite limit coefficient");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0 && deltas[i] < T)) throw InvalidParameter("terminal_analysis: deltas must lie in (0, T)");
    if (i > 0 && !(deltas[i] < deltas[i - 1])) throw InvalidParameter("terminal_analysis: deltas must decrease");
  }

  const double dmin = terminal_offset_min(family, config);
  constexpr double q = 4.0;
  std::vector<double> ladder;
  for (int j = 3; j >= 0; --j) ladder.push_back(dmin * std::pow(q, j));

  std::vector<double> outs;
  for (double d : ladder) outs.push_back(T - d);
  for (double d : deltas)
    if (d >= dmin) outs.push_back(T - d);
  if (sample_count > 0)
    for (double s : detail::uniform_grid(0.0, T - dmin, sample_count)) outs.push_back(s);

  Trajectory tr = integrate(family, problem, 0.0, T - dmin, config, accumulators, outs);
  auto at = [&](double d) { return dense_eval(tr, T - d); };

  // Richardson elimination of the δ² term between neighbouring ladder levels.
  const double w = q * q;
  std::vector<Vec> xr, vr;
  std::vector<Vec> xs, vs;
  for (double d : ladder) {
    auto [x, v] = at(d);
    xs.push_back(x);
    vs.push_back(v / (-d));
  }
  for (std::size_t j = 0; j + 1 < ladder.size(); ++j) {
    xr.push_back((w * xs[j + 1] - xs[j]) / (w - 1.0));
    vr.push_back((w * vs[j + 1] - vs[j]) / (w - 1.0));
  }
  const Objective& obj = problem.objective;
  const double scale_x = 1.0 + xs.back().norm();
  const double scale_v = 1.0 + vs.back().norm();
  const double floor_x = 1e3 * config.rel_tol * scale_x;
  const double floor_v = 1e3 * config.rel_tol * scale_v / (dmin / T);
  auto diverges = [](const std::vector<Vec>& est, double floor) {
    const double late = (est[2] - est[1]).norm();
    const double early = (est[1] - est[0]).norm();
    return late > floor && late > 2.0 * early;
  };
  if (diverges(xr, floor_x) || diverges(vr, floor_v))
    throw TerminalAnalysisError("terminal extrapolation does not converge");

  TerminalReport rep{};
  rep.X_T = xr.back();
  rep.velocity_limit = vr.back();
  rep.grad_estimate = -(r + 1.0) / 2.0 * rep.velocity_limit;
  rep.grad_at_XT = obj.gradient(rep.X_T);
  const double gg = rep.grad_at_XT.squaredNorm();
  rep.limit_coefficient = gg > 0.0 ? rep.velocity_limit.dot(rep.grad_at_XT) / gg : 0.0;
  const Vec expected = (-2.0 / (r + 1.0)) * rep.grad_at_XT;
  rep.limit_residual = (rep.velocity_limit - expected).norm();
  // X(T−δ) − X_T ≈ a₂δ²; order from successive differences along the ladder.
  rep.extrapolation_order = detail::difference_order((xs[0] - xs[1]).norm(), (xs[1] - xs[2]).norm(), q);
  for (double d : deltas) {
    if (d < dmin) continue;
    auto [x, v] = at(d);
    rep.speed_decay.emplace_back(d, v.norm());
    rep.ratio_error.emplace_back(d, (v / (-d) - expected).norm());
  }
  rep.ratio_order = detail::fitted_order(rep.ratio_error);
  rep.f_X0 = obj.value(problem.x0);
  rep.f_XT = obj.value(rep.X_T);
  rep.delta_min = dmin;
  rep.trajectory = std::make_shared<const Trajectory>(std::move(tr));
  return rep;
}

// ---------------------------------------------------------------------------

inline void write_csv(std::ostream& os, const Trajectory& tr, bool samples_only = false) {
  const int n = tr.dim();
  os << "t";
  for (int i = 0; i < n; ++i) os << ",x_" << i;
  for (int i = 0; i < n; ++i) os << ",v_" << i;
  for (const auto& c : tr.channel_names) os << ',' << c;
  os << '\n';
  os << std::setprecision(17);
  auto row = [&](std::size_t k) {
    os << tr.times[k];
    for (int i = 0; i < n; ++i) os << ',' << tr.X[k](i);
    for (int i = 0; i < n; ++i) os << ',' << tr.V[k](i);
    for (const auto& c : tr.channels) os << ',' << c[k];
    os << '\n';
  };
  if (samples_only && !tr.sample_nodes.empty())
    for (std::size_t k : tr.sample_nodes) row(k);
  else
    for (std::size_t k = 0; k < tr.size(); ++k) row(k);
}

}  // namespace agmlab
