#pragma once

// Smooth convex test objectives with verified metadata and oracle self-checks.

#include <agmlab/errors.hpp>
#include <agmlab/linalg.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace agmlab {

/// Immutable smooth convex objective. Copies share the same oracle.
class Objective {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradFn = std::function<Vec(const Vec&)>;

  struct Metadata {
    std::string family;
    double L = 0.0;
    double mu = 0.0;
    std::optional<Vec> minimizer;
    std::optional<double> f_star;
    std::optional<double> h1_gamma;
    // Radius (around the minimizer, or the origin) inside which L is valid.
    std::optional<double> validity_radius;
  };

  /// Builds an objective from raw oracles. L must be positive; mu nonnegative.
  static Objective from_functions(int dim, ValueFn f, GradFn grad, Metadata meta) {
    if (dim <= 0) throw InvalidParameter("objective dimension must be positive");
    if (!(meta.L > 0.0)) throw InvalidParameter("L must be positive");
    if (meta.mu < 0.0) throw InvalidParameter("mu must be nonnegative");
    if (meta.minimizer && meta.minimizer->size() != dim)
      throw InvalidParameter("minimizer dimension mismatch");
    if (meta.h1_gamma && *meta.h1_gamma < 1.0) throw InvalidParameter("h1_gamma must be >= 1");
    auto impl = std::make_shared<Impl>(Impl{dim, std::move(f), std::move(grad), std::move(meta)});
    return Objective(std::move(impl));
  }

  int dim() const { return impl_->dim; }
  double value(const Vec& x) const { return impl_->f(x); }
  Vec gradient(const Vec& x) const { return impl_->grad(x); }
  double operator()(const Vec& x) const { return value(x); }

  const Metadata& metadata() const { return impl_->meta; }
  const std::string& family() const { return impl_->meta.family; }
  double L() const { return impl_->meta.L; }
  double mu() const { return impl_->meta.mu; }
  const std::optional<Vec>& minimizer() const { return impl_->meta.minimizer; }
  const std::optional<double>& f_star() const { return impl_->meta.f_star; }
  const std::optional<double>& h1_gamma() const { return impl_->meta.h1_gamma; }
  const std::optional<double>& validity_radius() const { return impl_->meta.validity_radius; }

  /// Same oracle with minimizer metadata attached. The original is unchanged.
  Objective with_minimizer(const Vec& x_star, std::optional<double> f_star = std::nullopt) const {
    if (x_star.size() != dim()) throw InvalidParameter("minimizer dimension mismatch");
    Metadata meta = impl_->meta;
    meta.minimizer = x_star;
    meta.f_star = f_star ? *f_star : value(x_star);
    return from_functions(dim(), impl_->f, impl_->grad, std::move(meta));
  }

  /// Same oracle with minimizer metadata removed (the "f_star only" regime).
  Objective without_minimizer() const {
    Metadata meta = impl_->meta;
    meta.minimizer.reset();
    return from_functions(dim(), impl_->f, impl_->grad, std::move(meta));
  }

  const Vec& require_minimizer() const {
    if (!impl_->meta.minimizer) throw MetadataError(family() + ": minimizer metadata required");
    return *impl_->meta.minimizer;
  }
  double require_f_star() const {
    if (!impl_->meta.f_star) throw MetadataError(family() + ": f_star metadata required");
    return *impl_->meta.f_star;
  }

 private:
  struct Impl {
    int dim;
    ValueFn f;
    GradFn grad;
    Metadata meta;
  };

  explicit Objective(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<const Impl> impl_;
};

struct ProblemInstance {
  Objective objective;
  Vec x0;
  std::string label;

  ProblemInstance(Objective obj, Vec start, std::string name)
      : objective(std::move(obj)), x0(std::move(start)), label(std::move(name)) {
    if (x0.size() != objective.dim()) throw InvalidParameter("x0 dimension does not match objective");
  }
};

// ---------------------------------------------------------------------------
// Families

/// f(x) = ½ Σ λᵢ(xᵢ−cᵢ)² + offset.
inline Objective make_quadratic(const std::vector<double>& eigenvalues, const Vec& center,
                                double offset = 0.0) {
  if (eigenvalues.empty()) throw InvalidParameter("quadratic: eigenvalue list is empty");
  for (double lam : eigenvalues)
    if (!(lam > 0.0)) throw InvalidParameter("quadratic: eigenvalues must be positive");
  if (static_cast<std::size_t>(center.size()) != eigenvalues.size())
    throw InvalidParameter("quadratic: center dimension must equal eigenvalue count");

  const int n = static_cast<int>(eigenvalues.size());
  Vec lam = Eigen::Map<const Vec>(eigenvalues.data(), n);
  Vec c = center;
  Objective::Metadata meta;
  meta.family = "quadratic";
  meta.L = lam.maxCoeff();
  meta.mu = lam.minCoeff();
  meta.minimizer = c;
  meta.f_star = offset;
  // ⟨∇f(x), x−c⟩ = 2(f−f★): H₁(γ) holds for every γ ≤ 2.
  meta.h1_gamma = 2.0;
  return Objective::from_functions(
      n,
      [lam, c, offset](const Vec& x) { return 0.5 * (lam.array() * (x - c).array().square()).sum() + offset; },
      [lam, c](const Vec& x) -> Vec { return lam.cwiseProduct(x - c); }, std::move(meta));
}

inline Objective make_quadratic(const std::vector<double>& eigenvalues) {
  return make_quadratic(eigenvalues, Vec::Zero(static_cast<Eigen::Index>(eigenvalues.size())), 0.0);
}

/// f(x) = ρ·log Σᵢ exp((⟨aᵢ,x⟩−bᵢ)/ρ), evaluated with a max shift.
inline Objective make_logsumexp(const Mat& rows, const Vec& rhs, double temperature) {
  if (rows.rows() < 1 || rows.cols() < 1) throw InvalidParameter("logsumexp: A needs at least one row");
  if (rhs.size() != rows.rows()) throw InvalidParameter("logsumexp: b length must equal row count");
  if (!(temperature > 0.0)) throw InvalidParameter("logsumexp: temperature must be positive");

  const Mat A = rows;
  const Vec b = rhs;
  const double rho = temperature;
  Eigen::JacobiSVD<Mat> svd(A);
  const double smax = svd.singularValues()(0);

  auto scaled = [A, b, rho](const Vec& x) -> Vec { return (A * x - b) / rho; };
  Objective::Metadata meta;
  meta.family = "logsumexp";
  meta.L = std::max(smax * smax / rho, std::numeric_limits<double>::min());
  meta.mu = 0.0;
  return Objective::from_functions(
      static_cast<int>(A.cols()),
      [scaled, rho](const Vec& x) {
        const Vec u = scaled(x);
        const double m = u.maxCoeff();
        return rho * (m + std::log((u.array() - m).exp().sum()));
      },
      [scaled, A](const Vec& x) -> Vec {
        const Vec u = scaled(x);
        const double m = u.maxCoeff();
        Vec w = (u.array() - m).exp().matrix();
        w /= w.sum();
        return A.transpose() * w;
      },
      std::move(meta));
}

/// f(x) = ‖x‖^p on R^n. L = p(p−1)R^{p−2} is a local bound on the ball of radius R.
inline Objective make_power(double exponent, int dim, double radius = 10.0) {
  if (!(exponent >= 2.0)) throw InvalidParameter("power: exponent must be >= 2");
  if (!(radius > 0.0)) throw InvalidParameter("power: validity radius must be positive");
  if (dim <= 0) throw InvalidParameter("power: dimension must be positive");
  const double p = exponent;
  Objective::Metadata meta;
  meta.family = "power";
  meta.L = p * (p - 1.0) * std::pow(radius, p - 2.0);
  meta.mu = 0.0;
  meta.validity_radius = radius;
  meta.h1_gamma = p;
  meta.minimizer = Vec::Zero(dim);
  meta.f_star = 0.0;
  return Objective::from_functions(
      dim, [p](const Vec& x) { return std::pow(x.norm(), p); },
      [p](const Vec& x) -> Vec {
        const double r = x.norm();
        if (r == 0.0) return Vec::Zero(x.size());
        return p * std::pow(r, p - 2.0) * x;
      },
      std::move(meta));
}

// ---------------------------------------------------------------------------
// Oracle building blocks and self-checks

/// f(x) − f(y) − ⟨∇f(y), x−y⟩.
inline double convexity_gap(const Objective& obj, const Vec& x, const Vec& y) {
  if (x.size() != obj.dim() || y.size() != obj.dim())
    throw InvalidParameter("convexity_gap: dimension mismatch");
  return obj.value(x) - obj.value(y) - obj.gradient(y).dot(x - y);
}

/// Max over coordinates of |central difference − gradient component|.
inline double check_gradient(const Objective& obj, const Vec& x, double h) {
  if (!(h > 0.0)) throw InvalidParameter("check_gradient: h must be positive");
  const Vec g = obj.gradient(x);
  double worst = 0.0;
  Vec xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    const double fd = (obj.value(xp) - obj.value(xm)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g(i)));
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return worst;
}

struct GradientOrderReport {
  std::vector<double> steps;
  std::vector<double> errors;
  double observed_order = 0.0;  // least-squares slope of log error vs log h
  bool exact = false;           // every error at the rounding floor
};

/// Runs check_gradient over a halving ladder of h and fits the observed order.
inline GradientOrderReport gradient_order(const Objective& obj, const Vec& x, double h0 = 1e-2,
                                          int levels = 4) {
  GradientOrderReport rep;
  const double floor = 1e-11 * (1.0 + std::abs(obj.value(x)) + obj.gradient(x).norm());
  double h = h0;
  for (int i = 0; i < levels; ++i, h *= 0.5) {
    rep.steps.push_back(h);
    rep.errors.push_back(check_gradient(obj, x, h));
  }
  rep.exact = std::all_of(rep.errors.begin(), rep.errors.end(), [&](double e) { return e <= floor; });
  if (rep.exact) {
    rep.observed_order = std::numeric_limits<double>::infinity();
    return rep;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int i = 0; i < levels; ++i) {
    if (rep.errors[i] <= floor) continue;
    const double lx = std::log(rep.steps[i]), ly = std::log(rep.errors[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  rep.observed_order = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
  return rep;
}

struct SampleCheck {
  std::string name;
  int samples = 0;
  double worst = 0.0;  // most negative slack (convexity) or largest ratio excess (smoothness)
  bool pass = false;
};

namespace detail {

inline Vec sample_in_ball(std::mt19937_64& rng, const Vec& center, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec d(center.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = normal(rng);
  const double n = d.norm();
  if (n == 0.0) return center;
  const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(center.size()));
  return center + (r / n) * d;
}

inline Vec sampling_center(const Objective& obj) {
  return obj.minimizer() ? *obj.minimizer() : Vec::Zero(obj.dim());
}

inline double sampling_radius(const Objective& obj) {
  return obj.validity_radius() ? *obj.validity_radius() : 3.0;
}

}  // namespace detail

/// Convexity inequality on seeded pairs: slack ≥ −1e-12·(1+|f(x)|+|f(y)|).
inline SampleCheck sample_convexity(const Objective& obj, int pairs = 1000, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  const Vec c = detail::sampling_center(obj);
  const double R = detail::sampling_radius(obj);
  SampleCheck out{"convexity", pairs, 0.0, true};
  for (int i = 0; i < pairs; ++i) {
    const Vec x = detail::sample_in_ball(rng, c, R);
    const Vec y = detail::sample_in_ball(rng, c, R);
    const double scale = 1.0 + std::abs(obj.value(x)) + std::abs(obj.value(y));
    const double slack = convexity_gap(obj, x, y) / scale;
    out.worst = std::min(out.worst, slack);
  }
  out.pass = out.worst >= -1e-12;
  return out;
}

/// ‖∇f(x)−∇f(y)‖ ≤ L‖x−y‖(1+1e-10) on seeded pairs within the validity radius.
inline SampleCheck sample_smoothness(const Objective& obj, int pairs = 1000, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  const Vec c = detail::sampling_center(obj);
  const double R = detail::sampling_radius(obj);
  SampleCheck out{"smoothness", pairs, 0.0, true};
  for (int i = 0; i < pairs; ++i) {
    const Vec x = detail::sample_in_ball(rng, c, R);
    const Vec y = detail::sample_in_ball(rng, c, R);
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    const double ratio = (obj.gradient(x) - obj.gradient(y)).norm() / (obj.L() * dist);
    out.worst = std::max(out.worst, ratio - 1.0);
  }
  out.pass = out.worst <= 1e-10;
  return out;
}

/// |⟨∇f(x), x−X★⟩ − γ(f(x)−f★)| ≤ 1e-12·(1+|f(x)|) on seeded points (equality form of H₁(γ)).
inline SampleCheck sample_h1_equality(const Objective& obj, int points = 1000, std::uint64_t seed = 13) {
  if (!obj.h1_gamma()) throw MetadataError(obj.family() + ": no h1_gamma declared");
  const Vec& xs = obj.require_minimizer();
  const double fs = obj.require_f_star();
  const double gamma = *obj.h1_gamma();
  std::mt19937_64 rng(seed);
  SampleCheck out{"h1_equality", points, 0.0, true};
  for (int i = 0; i < points; ++i) {
    const Vec x = detail::sample_in_ball(rng, xs, detail::sampling_radius(obj));
    const double fx = obj.value(x);
    const double resid = std::abs(obj.gradient(x).dot(x - xs) - gamma * (fx - fs)) / (1.0 + std::abs(fx));
    out.worst = std::max(out.worst, resid);
  }
  out.pass = out.worst <= 1e-12;
  return out;
}

/// f(minimizer) = f_star and ∇f(minimizer) ≈ 0, when the metadata is present.
inline SampleCheck check_metadata(const Objective& obj) {
  SampleCheck out{"metadata", 0, 0.0, true};
  if (!obj.minimizer()) return out;
  const Vec& xs = *obj.minimizer();
  const double gnorm = obj.gradient(xs).norm();
  double worst = gnorm / (1e-10 * std::max(1.0, obj.L()));
  if (obj.f_star()) {
    const double fs = *obj.f_star();
    const double rel = std::abs(obj.value(xs) - fs) / std::max(1.0, std::abs(fs));
    worst = std::max(worst, rel / 1e-12);
  }
  out.samples = 1;
  out.worst = worst;
  out.pass = worst <= 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Catalog: "quadratic:1,4", "quadratic:n=10,min=1,max=4", "logsumexp:2x1",
// "logsumexp:8x4,rho=0.5", "power:p=4", "power:p=4,n=3,R=10".

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  double v;
  if (!(is >> v) || !is.eof()) throw InvalidParameter(key + ": cannot parse number '" + text + "'");
  return v;
}

// Strips an optional leading "λ=" / "lambda=" from a quadratic eigenvalue list.
inline std::string strip_lambda(std::string s) {
  for (const std::string prefix : {"λ=", "lambda=", "l="})
    if (s.rfind(prefix, 0) == 0) return s.substr(prefix.size());
  return s;
}

/// Deterministic symmetric row set: base rows e_{i mod n} (+ seeded perturbation
/// for i ≥ n), stacked as [B; −B] so the softmax weights cancel at the center.
inline Mat symmetric_rows(int m, int n) {
  const int half = m / 2;
  Mat B = Mat::Zero(half, n);
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (int i = 0; i < half; ++i) {
    B(i, i % n) = 1.0;
    if (i >= n)
      for (int j = 0; j < n; ++j) B(i, j) += normal(rng);
  }
  Mat A(2 * half, n);
  A << B, -B;
  return A;
}

}  // namespace detail

/// Builds an objective from a catalog key. Keys are listed by problem_catalog().
inline Objective make_objective(const std::string& key) {
  const auto colon = key.find(':');
  const std::string family = detail::trim(key.substr(0, colon));
  const std::string args = colon == std::string::npos ? std::string() : detail::trim(key.substr(colon + 1));

  if (family == "quadratic") {
    if (args.empty()) throw InvalidParameter("quadratic: eigenvalues required, e.g. quadratic:1,4");
    if (args.find("n=") != std::string::npos) {
      int n = 0;
      double lo = 1.0, hi = 1.0;
      for (const auto& part : detail::split(args, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw InvalidParameter("quadratic: expected k=v in '" + part + "'");
        const std::string k = detail::trim(part.substr(0, eq));
        const double v = detail::parse_number(key, detail::trim(part.substr(eq + 1)));
        if (k == "n") n = static_cast<int>(v);
        else if (k == "min") lo = v;
        else if (k == "max") hi = v;
        else throw InvalidParameter("quadratic: unknown parameter '" + k + "'");
      }
      if (n <= 0) throw InvalidParameter("quadratic: n must be positive");
      std::vector<double> eig(n);
      for (int i = 0; i < n; ++i) eig[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1.0);
      return make_quadratic(eig);
    }
    std::vector<double> eig;
    for (const auto& part : detail::split(detail::strip_lambda(args), ','))
      eig.push_back(detail::parse_number(key, detail::trim(part)));
    return make_quadratic(eig);
  }

  if (family == "logsumexp") {
    const auto parts = detail::split(args, ',');
    const auto x = parts.at(0).find('x');
    if (x == std::string::npos) throw InvalidParameter("logsumexp: expected MxN, e.g. logsumexp:2x1");
    const int m = static_cast<int>(detail::parse_number(key, parts[0].substr(0, x)));
    const int n = static_cast<int>(detail::parse_number(key, parts[0].substr(x + 1)));
    if (m < 2 || m % 2 != 0 || n < 1)
      throw InvalidParameter("logsumexp: row count must be even and >= 2, columns >= 1");
    double rho = 1.0;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto eq = parts[i].find('=');
      const std::string k = detail::trim(parts[i].substr(0, eq));
      if (k != "rho" || eq == std::string::npos) throw InvalidParameter("logsumexp: unknown parameter '" + k + "'");
      rho = detail::parse_number(key, detail::trim(parts[i].substr(eq + 1)));
    }
    const Mat A = detail::symmetric_rows(m, n);
    const Objective base = make_logsumexp(A, Vec::Zero(A.rows()), rho);
    return base.with_minimizer(Vec::Zero(n), rho * std::log(static_cast<double>(A.rows())));
  }

  if (family == "power") {
    double p = -1.0, R = 10.0;
    int n = 1;
    for (const auto& part : detail::split(args, ',')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) throw InvalidParameter("power: expected k=v in '" + part + "'");
      const std::string k = detail::trim(part.substr(0, eq));
      const double v = detail::parse_number(key, detail::trim(part.substr(eq + 1)));
      if (k == "p") p = v;
      else if (k == "R") R = v;
      else if (k == "n") n = static_cast<int>(v);
      else throw InvalidParameter("power: unknown parameter '" + k + "'");
    }
    if (p < 0) throw InvalidParameter("power: exponent p required, e.g. power:p=4");
    return make_power(p, n, R);
  }

  throw InvalidParameter("unknown problem family '" + family + "'");
}

/// Default start: minimizer (or origin) displaced by the unit vector (1,…,1)/√n.
inline Vec default_start(const Objective& obj) {
  const Vec base = obj.minimizer() ? *obj.minimizer() : Vec::Zero(obj.dim());
  return base + Vec::Ones(obj.dim()) / std::sqrt(static_cast<double>(obj.dim()));
}

inline ProblemInstance make_problem(const std::string& key, std::optional<Vec> x0 = std::nullopt) {
  Objective obj = make_objective(key);
  Vec start = x0 ? *x0 : default_start(obj);
  if (obj.validity_radius() && start.norm() > *obj.validity_radius())
    throw InvalidParameter(key + ": x0 lies outside the declared validity radius");
  return ProblemInstance(std::move(obj), std::move(start), key);
}

struct CatalogEntry {
  std::string key_pattern;
  std::string description;
};

inline std::vector<CatalogEntry> problem_catalog() {
  return {
      {"quadratic:<l1>,<l2>,...", "½Σλᵢxᵢ², minimizer 0, f★ = 0 (also accepts quadratic:λ=1,4)"},
      {"quadratic:n=<N>,min=<a>,max=<b>", "N-dim quadratic with eigenvalues evenly spaced in [a,b]"},
      {"logsumexp:<M>x<N>[,rho=<ρ>]", "ρ·log Σ exp(⟨aᵢ,x⟩/ρ) over M symmetric rows ±aᵢ; minimizer 0, f★ = ρ log M"},
      {"power:p=<p>[,n=<N>][,R=<R>]", "‖x‖^p (p ≥ 2), H₁(p) with equality, L local on radius R (default 10)"},
  };
}

}  // namespace agmlab
