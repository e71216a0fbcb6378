#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sbm/errors.hpp"

namespace sbm::numint {

namespace detail {

// One 61-point Kronrod pass with the error estimate scaled to [a, b]. The
// adaptive driver of Boost 1.74 compares the unscaled error against a scaled
// tolerance, which recurses to full depth on narrow intervals.
template <class F>
auto gk_panel(F& f, double a, double b, double* err) {
  double e = 0;
  const auto v =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 0, 0.0, &e);
  *err = e * 0.5 * (b - a);
  return v;
}

template <class F, class V>
V gk_adapt(F& f, double a, double b, V v, double e, double abs_tol, double rel_tol, int depth,
           double* err) {
  using std::abs;
  if (depth <= 0 || e <= std::max(abs_tol, rel_tol * abs(v))) {
    *err += e;
    return v;
  }
  const double m = 0.5 * (a + b);
  double el, er;
  const V vl = gk_panel(f, a, m, &el);
  const V vr = gk_panel(f, m, b, &er);
  return gk_adapt(f, a, m, vl, el, 0.5 * abs_tol, rel_tol, depth - 1, err) +
         gk_adapt(f, m, b, vr, er, 0.5 * abs_tol, rel_tol, depth - 1, err);
}

}  // namespace detail

// Adaptive 61-point Gauss-Kronrod on a finite [a, b], real or complex
// valued. Bisects until each piece meets max(abs_tol share, rel_tol *
// |piece|); abs_tol defaults to rel_tol times the whole-interval estimate.
template <class F>
auto gk(F&& f, double a, double b, double rel_tol, int max_depth, double* err = nullptr,
        double abs_tol = -1) {
  using std::abs;
  using V = decltype(f(a));
  if (!(a < b)) return V(0);
  double e0;
  const V v0 = detail::gk_panel(f, a, b, &e0);
  if (abs_tol < 0) abs_tol = rel_tol * abs(v0);
  double e = 0;
  const V v = detail::gk_adapt(f, a, b, v0, e0, abs_tol, rel_tol, max_depth, &e);
  if (err) *err = e;
  if (!std::isfinite(abs(v))) throw ConvergenceError("Gauss-Kronrod produced a non-finite value");
  return v;
}

// Tanh-sinh rule on (a, b). The integrand receives (x, x - a, b - x) with
// both distances computed without cancellation, so endpoint singularities
// of the form log(x - a) or 1/tan(b - x) are resolved to full precision.
// Levels are halved until two successive estimates agree to rel_tol,
// measured against the L1 norm so that integrals near zero still converge.
template <class T, class F>
T tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-14, int max_level = 9,
            double min_dist = 1e-100) {
  const double half = 0.5 * (b - a);
  const double c = 0.5 * (a + b);
  constexpr double pi_2 = 1.5707963267948966;
  double l1 = 0;
  auto node = [&](double t, T& acc) {
    const double u = pi_2 * std::sinh(t);
    const double eu = std::exp(-2 * std::fabs(u));
    // distance to the nearer end, and to the farther one
    const double near = half * 2 * eu / (1 + eu);
    const double far = half * 2 / (1 + eu);
    if (near < min_dist) return false;
    const double ch = std::cosh(u);
    const double w = half * pi_2 * std::cosh(t) / (ch * ch);
    const T v = t >= 0 ? f(c + (far - half), far, near) : f(c - (far - half), near, far);
    acc += w * v;
    l1 += w * std::abs(v);
    return true;
  };
  double h = 0.5;
  T sum = T(0);
  node(0.0, sum);
  for (int j = 1;; ++j) {
    bool any = node(j * h, sum);
    any = node(-j * h, sum) || any;
    if (!any || j * h > 7) break;
  }
  T est = sum * h;
  for (int level = 1; level <= max_level; ++level) {
    h *= 0.5;
    // odd multiples of the new step are the new nodes
    for (int j = 1;; j += 2) {
      bool any = node(j * h, sum);
      any = node(-j * h, sum) || any;
      if (!any || j * h > 7) break;
    }
    T next = sum * h;
    if (std::abs(next - est) <= rel_tol * std::max<double>(std::abs(next), l1 * h) && level >= 3)
      return next;
    est = next;
  }
  throw ConvergenceError("tanh-sinh rule did not converge");
}

}  // namespace sbm::numint
