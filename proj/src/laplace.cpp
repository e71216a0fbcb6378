#include "sbm/laplace.hpp"

#include <cmath>
#include <mutex>
#include <quadmath.h>
#include <numbers>
#include <vector>

#include "sbm/io.hpp"

namespace sbm {

double talbot_invert(const std::function<cplx(cplx)>& F, double t, int M) {
  const double r = 2.0 * M / (5.0 * t);
  double acc = 0.5 * (F(cplx(r, 0)) * std::exp(r * t)).real();
  for (int k = 1; k < M; ++k) {
    const double th = k * std::numbers::pi / M;
    const double cot = std::cos(th) / std::sin(th);
    const cplx s(r * th * cot, r * th);
    const cplx ds(0, th + (th * cot - 1) * cot);  // i sigma
    acc += (std::exp(t * s) * F(s) * (1.0 + ds)).real();
  }
  return r / M * acc;
}

namespace {

std::vector<quad> stehfest_weights(int N) {
  static std::mutex m;
  static std::vector<std::vector<quad>> cache(gaver_stehfest_max_order + 1);
  std::lock_guard lock(m);
  auto& w = cache[N];
  if (!w.empty()) return w;
  auto fact = [](int n) {
    quad f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  const int h = N / 2;
  w.assign(N + 1, 0);
  for (int k = 1; k <= N; ++k) {
    quad s = 0;
    for (int j = (k + 1) / 2; j <= std::min(k, h); ++j) {
      quad jp = 1;
      for (int i = 0; i < h; ++i) jp *= j;
      s += jp * fact(2 * j) / (fact(h - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
    }
    w[k] = ((h + k) % 2 ? -1 : 1) * s;
  }
  return w;
}

}  // namespace

double gaver_stehfest_invert(const std::function<quad(quad)>& F, double t, int N) {
  if (N < 2 || N > gaver_stehfest_max_order || N % 2)
    throw DomainError("Gaver-Stehfest order must be even and at most " +
                      std::to_string(gaver_stehfest_max_order));
  const auto w = stehfest_weights(N);
  const quad a = logq(2) / static_cast<quad>(t);
  quad acc = 0;
  for (int k = 1; k <= N; ++k) acc += w[k] * F(k * a);
  return static_cast<double>(a * acc);
}

void check_inversion_time(double t, const QuadratureConfig& cfg) {
  if (!(t > 0) || !std::isfinite(t)) throw DomainError("t must be positive, got " + fmt_double(t));
  const double lt = std::log10(t);
  if (lt < cfg.log10_t_min - 1e-12 || lt > cfg.log10_t_max + 1e-12)
    throw DomainError("t=" + fmt_double(t) + " outside the inversion window [1e" +
                      fmt_double(cfg.log10_t_min) + ", 1e" + fmt_double(cfg.log10_t_max) + "]");
}

namespace {

double gs_value(const CmFunctionHandle& h, double t, const QuadratureConfig& cfg) {
  if (h.real_q) return gaver_stehfest_invert(h.real_q, t, cfg.gaver_stehfest_order);
  // A double-valued transform cannot feed the large alternating weights of
  // high orders, so the order is capped.
  auto f = [&](quad x) { return static_cast<quad>(h.real(static_cast<double>(x))); };
  return gaver_stehfest_invert(f, t, std::min(cfg.gaver_stehfest_order, gaver_stehfest_double_order));
}

}  // namespace

double invert_cm(const CmFunctionHandle& h, double t, const QuadratureConfig& cfg) {
  check_inversion_time(t, cfg);
  double v;
  if (cfg.inversion_method == InversionMethod::talbot && h.complex) {
    v = talbot_invert(h.complex, t, cfg.talbot_nodes);
  } else {
    if (!h.real && !h.real_q) throw DomainError("transform '" + h.label + "' has no evaluator");
    v = gs_value(h, t, cfg);
  }
  if (!std::isfinite(v))
    throw ConvergenceError("inversion of " + h.label + " at t=" + fmt_double(t) + " is not finite");
  if (v < 0)
    throw ConvergenceError("inversion of " + h.label + " at t=" + fmt_double(t) +
                           " is negative (" + fmt_double(v) +
                           "); complete monotonicity violated or inversion failed");
  return v;
}

CrossCheck cross_validate(const CmFunctionHandle& h, double t, const QuadratureConfig& cfg) {
  check_inversion_time(t, cfg);
  if (!h.complex) throw DomainError("cross validation needs a complex evaluator for Talbot");
  if (!h.real_q && !h.real) throw DomainError("cross validation needs a real evaluator");
  CrossCheck c;
  c.talbot = talbot_invert(h.complex, t, cfg.talbot_nodes);
  c.gaver_stehfest = gs_value(h, t, cfg);
  const double scale = std::max(std::fabs(c.talbot), std::fabs(c.gaver_stehfest));
  c.rel_diff = scale > 0 ? std::fabs(c.talbot - c.gaver_stehfest) / scale : 0;
  c.agree = std::fabs(c.talbot - c.gaver_stehfest) <= std::max(cfg.abs_tol, 1e-6 * scale);
  return c;
}

CmFunctionHandle mu_transform(const BernsteinSpec& spec) {
  CmFunctionHandle h;
  h.label = "phi'[" + spec.label() + "]";
  h.real = [spec](double l) { return spec.derivative(l); };
  if (spec.has_quad()) h.real_q = [spec](quad l) { return spec.derivative(l); };
  if (spec.has_complex()) h.complex = [spec](cplx l) { return spec.derivative(l); };
  return h;
}

CmFunctionHandle u_transform(const BernsteinSpec& spec) {
  CmFunctionHandle h;
  h.label = "1/phi[" + spec.label() + "]";
  h.real = [spec](double l) { return 1.0 / spec(l); };
  if (spec.has_quad()) h.real_q = [spec](quad l) { return 1 / spec(l); };
  if (spec.has_complex()) h.complex = [spec](cplx l) { return 1.0 / spec(l); };
  return h;
}

CmFunctionHandle tail_transform(const BernsteinSpec& spec) {
  CmFunctionHandle h;
  h.label = "phi(l)/l[" + spec.label() + "]";
  h.real = [spec](double l) { return spec(l) / l; };
  if (spec.has_quad()) h.real_q = [spec](quad l) { return spec(l) / l; };
  if (spec.has_complex()) h.complex = [spec](cplx l) { return spec(l) / l; };
  return h;
}

double mu_upper_bound(const BernsteinSpec& spec, double t) {
  return spec(1.0 / t) / (t * (1 - 2 / std::numbers::e));
}
double u_upper_bound(const BernsteinSpec& spec, double t) {
  return 1.0 / (t * spec(1.0 / t) * (1 - 1 / std::numbers::e));
}
double tail_upper_bound(const BernsteinSpec& spec, double t) {
  // phi*(1/t) = (1/t) / phi(1/t)
  return spec(1.0 / t) / (1 - 1 / std::numbers::e);
}

namespace {

DensityValue finish(double t, double v, double bound, const QuadratureConfig& cfg,
                    const CmFunctionHandle& h) {
  DensityValue d;
  d.t = t;
  d.value = v;
  d.bound = bound;
  d.bound_violated = v > cfg.bound_factor * bound;
  d.method = (cfg.inversion_method == InversionMethod::talbot && h.complex)
                 ? InversionMethod::talbot
                 : InversionMethod::gaver_stehfest;
  return d;
}

}  // namespace

DensityValue levy_density_mu(const BernsteinSpec& spec, double t, const QuadratureConfig& cfg) {
  auto h = mu_transform(spec);
  return finish(t, invert_cm(h, t, cfg) / t, mu_upper_bound(spec, t), cfg, h);
}

DensityValue potential_density_u(const BernsteinSpec& spec, double t, const QuadratureConfig& cfg) {
  auto h = u_transform(spec);
  return finish(t, invert_cm(h, t, cfg), u_upper_bound(spec, t), cfg, h);
}

DensityValue levy_tail(const BernsteinSpec& spec, double t, const QuadratureConfig& cfg) {
  auto h = tail_transform(spec);
  return finish(t, invert_cm(h, t, cfg), tail_upper_bound(spec, t), cfg, h);
}

}  // namespace sbm
