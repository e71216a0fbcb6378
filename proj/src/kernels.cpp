#include "sbm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

// Boost 1.74 pchip calls isnan unqualified
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "sbm/io.hpp"
#include "sbm/laplace.hpp"
#include "sbm/quadrature.hpp"

namespace sbm {

namespace {

constexpr double pi = std::numbers::pi;

void require_dim(int d) {
  if (d < 1) throw DomainError("dimension d must be >= 1, got " + std::to_string(d));
}

void require_r(double r) {
  if (!(r > 0) || !std::isfinite(r)) throw DomainError("r must be positive, got " + fmt_double(r));
}

}  // namespace

double KernelPoint::r() const {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

void KernelPoint::validate() const {
  require_dim(d);
  if (x.size() != static_cast<std::size_t>(d) || y.size() != static_cast<std::size_t>(d))
    throw DomainError("points must have d=" + std::to_string(d) + " coordinates");
  if (t && !(*t > 0)) throw DomainError("t must be positive");
}

double sphere_area(int d) {
  require_dim(d);
  return 2 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d);
}

// ---------------------------------------------------------------- tables

struct DensityTable::Impl {
  BernsteinSpec spec;
  QuadratureConfig cfg;
  std::vector<double> lt, lf;  // log t, log f
  std::unique_ptr<boost::math::interpolators::pchip<std::vector<double>>> interp;
  double kappa_lo = 0, kappa_hi = 0;  // f ~ t^{-kappa} beyond each end

  double exact(DensityKind k, double t) const {
    return k == DensityKind::mu ? levy_density_mu(spec, t, cfg).value
                                : potential_density_u(spec, t, cfg).value;
  }
};

std::shared_ptr<const DensityTable> DensityTable::get(const BernsteinSpec& spec, DensityKind kind,
                                                      const QuadratureConfig& cfg) {
  static std::mutex m;
  static std::map<std::string, std::shared_ptr<const DensityTable>> cache;
  const std::string key =
      spec.id() + (kind == DensityKind::mu ? ":mu:" : ":u:") + cfg.hash();
  std::lock_guard lock(m);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  cfg.validate();
  const int n = std::max(cfg.density_cache_points, 8);
  auto impl = std::make_shared<Impl>(Impl{spec, cfg, {}, {}, nullptr, 0, 0});
  const double a = cfg.log10_t_min * std::numbers::ln10, b = cfg.log10_t_max * std::numbers::ln10;
  std::vector<double> lt(n), lf(n);
  for (int i = 0; i < n; ++i) {
    lt[i] = a + (b - a) * i / (n - 1);
    const double t = std::exp(std::clamp(lt[i], a, b));
    const double v = impl->exact(kind, t);
    if (!(v > 0))
      throw ConvergenceError("density table for " + spec.label() + " hit a non-positive value at t=" +
                             fmt_double(t));
    lf[i] = std::log(v);
  }
  const int w = std::min(4, n - 1);
  impl->kappa_lo = -(lf[w] - lf[0]) / (lt[w] - lt[0]);
  impl->kappa_hi = -(lf[n - 1] - lf[n - 1 - w]) / (lt[n - 1] - lt[n - 1 - w]);
  impl->lt = lt;
  impl->lf = lf;
  impl->interp = std::make_unique<boost::math::interpolators::pchip<std::vector<double>>>(
      std::move(lt), std::move(lf));

  auto tab = std::shared_ptr<DensityTable>(new DensityTable());
  tab->impl_ = impl;
  tab->kind_ = kind;
  tab->t_lo_ = std::exp(a);
  tab->t_hi_ = std::exp(b);
  cache.emplace(key, tab);
  return tab;
}

double DensityTable::operator()(double t) const {
  const auto& I = *impl_;
  const double l = std::log(t);
  if (l <= I.lt.front()) return std::exp(I.lf.front() - I.kappa_lo * (l - I.lt.front()));
  if (l >= I.lt.back()) return std::exp(I.lf.back() - I.kappa_hi * (l - I.lt.back()));
  if (I.cfg.exact_densities) return I.exact(kind_, t);
  return std::exp((*I.interp)(l));
}

double DensityTable::decay_exponent(double t) const {
  const auto& I = *impl_;
  const double l = std::log(t);
  if (l <= I.lt.front()) return I.kappa_lo;
  if (l >= I.lt.back()) return I.kappa_hi;
  return -I.interp->prime(l);
}

// ----------------------------------------------------- subordination

double j_estimate(const BernsteinSpec& spec, int d, double r) {
  return std::pow(r, -d) * spec(1.0 / (r * r));
}

double g_estimate(const BernsteinSpec& spec, int d, double r) {
  return std::pow(r, -d) / spec(1.0 / (r * r));
}

namespace {

// int_0^inf (4 pi t)^{-d/2} e^{-r^2/(4t)} f(t) dt in x = log(t/r^2), split
// at t = r^2. Past the table end f is a power law and the remainder is an
// incomplete gamma function.
double subordinate(const DensityTable& f, int d, double r, const QuadratureConfig& cfg) {
  const double r2 = r * r;
  const double hd = 0.5 * d;
  auto integrand = [&](double x) {
    const double t = r2 * std::exp(x);
    return std::exp(-hd * std::log(4 * pi * t) - 0.25 * r2 / t) * f(t) * t;
  };
  // e^{-1/(4s)} < e^{-740} below s = 1/2960
  const double x_lo = -std::log(2960.0);
  const double T = f.t_max();
  const double x_hi = std::log(T / r2);
  const double tol = std::max(cfg.rel_tol * 1e-2, 1e-12);
  double v = 0;
  if (x_hi > x_lo) {
    v += numint::gk(integrand, x_lo, std::min(0.0, x_hi), tol, cfg.max_subdivisions);
    if (x_hi > 0) v += numint::gk(integrand, 0.0, x_hi, tol, cfg.max_subdivisions);
  }
  const double kappa = f.decay_exponent(T);
  const double p = hd + kappa;
  if (!(p > 1))
    throw ConvergenceError("subordination integral diverges at large t (d/2 + kappa = " +
                           fmt_double(p) + " <= 1)");
  const double c = 0.25 * r2;
  const double lc = std::log(f(T)) + kappa * std::log(T);
  const double lg = std::log(boost::math::tgamma_lower(p - 1, c / T));
  v += std::exp(-hd * std::log(4 * pi) + lc + (1 - p) * std::log(c) + lg);
  if (!(v > 0) || !std::isfinite(v))
    throw ConvergenceError("subordination integral at r=" + fmt_double(r) + " is not positive");
  return v;
}

}  // namespace

double jump_density_j(const BernsteinSpec& spec, int d, double r, const QuadratureConfig& cfg) {
  require_dim(d);
  require_r(r);
  return subordinate(*DensityTable::get(spec, DensityKind::mu, cfg), d, r, cfg);
}

double green_radial_g(const BernsteinSpec& spec, int d, double r, const QuadratureConfig& cfg) {
  require_dim(d);
  require_r(r);
  auto tr = check_transience(spec, d);
  if (!tr.transient())
    throw DomainError("Green function needs a transient process; d=" + std::to_string(d) +
                      " is " + to_string(tr.status) + " (" + tr.reason + ")");
  return subordinate(*DensityTable::get(spec, DensityKind::u, cfg), d, r, cfg);
}

// ------------------------------------------------------------ transience

std::string to_string(Transience t) {
  switch (t) {
    case Transience::transient: return "transient";
    case Transience::recurrent: return "recurrent";
    case Transience::borderline: return "borderline";
  }
  return "?";
}

TransienceResult check_transience(const BernsteinSpec& spec, int d) {
  require_dim(d);
  TransienceResult res;
  res.half_d = 0.5 * d;
  constexpr double eps = 1e-8, tol = 1e-3;

  // int lambda^{d/2}/phi d(log lambda) per decade
  auto decade = [&](double lo) {
    auto f = [&](double x) {
      const double l = std::exp(x);
      return std::pow(l, res.half_d) / spec(l);
    };
    return numint::gk(f, std::log(lo), std::log(10 * lo), 1e-10, 12);
  };
  for (double lo = eps; lo < 1; lo *= 10) res.integral_eps_1 += decade(lo);
  res.last_decade_ratio = decade(eps) / decade(10 * eps);
  const double h = 1e-3;
  res.end_slope = (std::log(spec(eps * (1 + h))) - std::log(spec(eps * (1 - h)))) /
                  (std::log1p(h) - std::log1p(-h));

  if (d >= 3) {
    res.status = Transience::transient;
    res.reason = "d >= 3";
    return res;
  }
  bool fitted = false;
  try {
    auto fit = fit_scaling_side(spec, eps, 1.0, ScalingSide::at_zero);
    res.delta3 = fit.delta_lower;
    res.delta4 = fit.delta_upper;
    fitted = true;
  } catch (const CertificationError&) {
  }
  if (fitted && res.half_d > res.delta4 + tol) {
    res.status = Transience::transient;
    res.reason = "d/2 exceeds the upper index at zero";
  } else if (fitted && res.half_d < res.delta3 - tol) {
    res.status = Transience::recurrent;
    res.reason = "d/2 is below the lower index at zero";
  } else if (res.half_d > res.end_slope + tol) {
    res.status = Transience::transient;
    res.reason = "d/2 exceeds the local index at 1e-8";
  } else if (res.half_d < res.end_slope - tol) {
    res.status = Transience::recurrent;
    res.reason = "d/2 is below the local index at 1e-8";
  } else if (res.last_decade_ratio >= 0.9) {
    res.status = Transience::recurrent;
    res.reason = "integral grows by a fixed amount per decade toward zero";
  } else if (res.last_decade_ratio <= 0.5) {
    res.status = Transience::transient;
    res.reason = "decade contributions decay toward zero";
  } else {
    res.status = Transience::borderline;
    res.reason = "d/2 equals the index at zero within tolerance";
  }
  return res;
}

// ------------------------------------------------------------ heat kernel

HeatKernelValue free_heat_kernel(const BernsteinSpec& spec, int d, double t, double r,
                                 const QuadratureConfig& cfg) {
  require_dim(d);
  if (!(t > 0) || !std::isfinite(t)) throw DomainError("t must be positive");
  if (!(r >= 0) || !std::isfinite(r)) throw DomainError("r must be nonnegative");
  HeatKernelValue out;
  // e^{-t phi(rho^2)} < e^{-40} beyond rho_max
  out.rho_max = 1.0 / capital_phi_inv(spec, t / 40, cfg);
  const double rho_max = out.rho_max;
  const double scale = capital_phi_inv(spec, t, cfg);
  out.oscillation_warning = r / scale > 100;

  const double nu = 0.5 * d - 1;
  std::function<double(double)> f;
  double pre;
  if (r == 0) {
    pre = sphere_area(d) / std::pow(2 * pi, d);
    f = [&](double rho) { return std::pow(rho, d - 1) * std::exp(-t * spec(rho * rho)); };
  } else if (d == 1) {
    pre = 1 / pi;
    f = [&](double rho) { return std::cos(rho * r) * std::exp(-t * spec(rho * rho)); };
  } else {
    pre = std::pow(2 * pi, -0.5 * d) * std::pow(r, -nu);
    f = [&](double rho) {
      return std::cyl_bessel_j(nu, rho * r) * std::pow(rho, 0.5 * d) * std::exp(-t * spec(rho * rho));
    };
  }

  // geometric panels toward 0 resolve the rho^{2 delta} cusp; panels of
  // width pi/r follow the oscillation
  std::vector<double> br{0.0};
  for (int k = 60; k >= 1; --k) br.push_back(rho_max * std::ldexp(1.0, -k));
  if (r > 0) {
    const double w = pi / r;
    const double n_osc = std::floor(rho_max / w);
    if (n_osc > 2e5) throw ConvergenceError("heat kernel needs more than 2e5 oscillation panels");
    for (double k = 1; k <= n_osc; ++k) br.push_back(k * w);
  }
  br.push_back(rho_max);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());

  const double tol = std::max(cfg.rel_tol * 1e-4, 1e-13);
  constexpr double eps = std::numeric_limits<double>::epsilon();
  double sum = 0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    const double a = br[i], b = br[i + 1];
    if (b - a <= 0) continue;
    ++out.panels;
    if (d == 1 && r > 0) {
      // cos(rho r) = (-1)^k cos((rho - k w) r): the phase stays exact where
      // rho r itself would carry a rounding error of rho r eps
      const double w = pi / r;
      const double k = std::floor(a / w + 1e-9);
      const double base = k * w, sign = std::fmod(k, 2.0) == 0 ? 1.0 : -1.0;
      auto g = [&](double s) { return sign * std::cos(s * r) * std::exp(-t * spec((base + s) * (base + s))); };
      sum += numint::gk(g, a - base, b - base, tol, cfg.max_subdivisions);
      continue;
    }
    // Bessel arguments rho r carry relative rounding eps
    const double tol_i = r > 0 ? std::max(tol, 16 * eps * b * r) : tol;
    sum += numint::gk(f, a, b, tol_i, cfg.max_subdivisions);
  }
  out.value = pre * sum;
  if (!(out.value > 0))
    throw ConvergenceError("heat kernel at t=" + fmt_double(t) + ", r=" + fmt_double(r) +
                           " lost all accuracy (value " + fmt_double(out.value) + ")");
  return out;
}

// -------------------------------------------------------------- estimates

double p_estimate(const BernsteinSpec& spec, int d, double t, double r) {
  require_dim(d);
  const double vol = std::pow(capital_phi_inv(spec, t), -d);
  if (r == 0) return vol;
  return std::min(vol, t * j_estimate(spec, d, r));
}

double boundary_factor(const BernsteinSpec& spec, double t, double delta) {
  if (!(delta > 0)) throw DomainError("point is outside the half-space");
  return std::min(1.0, std::sqrt(capital_phi(spec, delta) / t));
}

namespace {

double dist(const Point& x, const Point& y) {
  if (x.size() != y.size()) throw DomainError("points differ in dimension");
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

void require_half_space(int d, const Point& x, const Point& y) {
  require_dim(d);
  if (x.size() != static_cast<std::size_t>(d) || y.size() != static_cast<std::size_t>(d))
    throw DomainError("points must have d=" + std::to_string(d) + " coordinates");
  if (!(x.back() > 0) || !(y.back() > 0))
    throw DomainError("points must lie in the open half-space x_d > 0");
}

}  // namespace

double half_space_hk_estimate(const BernsteinSpec& spec, int d, double t, const Point& x,
                              const Point& y) {
  require_half_space(d, x, y);
  return boundary_factor(spec, t, x.back()) * boundary_factor(spec, t, y.back()) *
         p_estimate(spec, d, t, dist(x, y));
}

std::string to_string(GreenRegime g) {
  return g == GreenRegime::two_sided ? "two_sided" : "one_dimensional";
}

GreenEstimate half_space_green_estimate(const BernsteinSpec& spec, int d, const Point& x,
                                        const Point& y, const ScalingCertificate& cert) {
  require_half_space(d, x, y);
  const double r = dist(x, y);
  if (!(r > 0)) throw DomainError("Green estimate needs x != y");
  if (!cert.at_infinity || !cert.at_zero)
    throw DomainError("Green regime selection needs indices on both sides");
  constexpr double tol = 1e-6;
  const double px = capital_phi(spec, x.back()), py = capital_phi(spec, y.back());
  GreenEstimate g;
  const double up = cert.combined_upper();
  const double lo = cert.combined_lower();
  if (d > 2 * up + tol) {
    const double pr = capital_phi(spec, r);
    g.regime = GreenRegime::two_sided;
    g.regime_condition = "d > 2(delta2 v delta4) = " + fmt_double(2 * up);
    g.value = pr / std::pow(r, d) * std::min(1.0, std::sqrt(px / pr)) *
              std::min(1.0, std::sqrt(py / pr));
    return g;
  }
  if (d == 1 && lo > 0.5 + tol) {
    const double m = std::sqrt(px * py);
    g.regime = GreenRegime::one_dimensional;
    g.regime_condition = "d = 1, delta1 ^ delta3 = " + fmt_double(lo) + " > 1/2";
    g.value = std::min(m / capital_phi_inv(spec, m), m / r);
    return g;
  }
  throw DomainError("no two-sided Green estimate applies: d=" + std::to_string(d) +
                    ", 2(delta2 v delta4)=" + fmt_double(2 * up) +
                    ", delta1 ^ delta3=" + fmt_double(lo) +
                    "; only the one-sided comparators are available");
}

GreenEstimate half_space_green_estimate(const BernsteinSpec& spec, int d, const Point& x,
                                        const Point& y) {
  return half_space_green_estimate(spec, d, x, y, certify(spec));
}

double half_space_green_upper(const BernsteinSpec& spec, int d, const Point& x, const Point& y) {
  require_half_space(d, x, y);
  const double r = dist(x, y);
  if (!(r > 0)) throw DomainError("Green comparator needs x != y");
  return std::sqrt(capital_phi(spec, x.back()) * capital_phi(spec, y.back())) / std::pow(r, d);
}

}  // namespace sbm
