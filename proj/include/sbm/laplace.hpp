#pragma once

#include <functional>
#include <string>

#include "sbm/bernstein.hpp"
#include "sbm/config.hpp"

namespace sbm {

// Laplace transform F of a (presumed completely monotone) density f.
// `real` is required; `complex` enables Talbot; `real_q` lets
// Gaver-Stehfest run in binary128, which high orders need.
struct CmFunctionHandle {
  std::string label;
  std::function<double(double)> real;
  std::function<cplx(cplx)> complex;
  std::function<quad(quad)> real_q;
};

// Fixed Talbot contour of Abate and Valko with M nodes.
double talbot_invert(const std::function<cplx(cplx)>& F, double t, int nodes);
// Gaver-Stehfest of even order N in binary128.
double gaver_stehfest_invert(const std::function<quad(quad)>& F, double t, int order);
// Largest order used when only a double evaluator exists.
inline constexpr int gaver_stehfest_double_order = 14;

// f(t). Talbot needs `complex`; without it the call falls back to
// Gaver-Stehfest. Negative output throws ConvergenceError.
double invert_cm(const CmFunctionHandle& h, double t, const QuadratureConfig& cfg = {});

struct CrossCheck {
  double talbot = 0, gaver_stehfest = 0;
  double rel_diff = 0;
  bool agree = false;
};
CrossCheck cross_validate(const CmFunctionHandle& h, double t, const QuadratureConfig& cfg = {});

struct DensityValue {
  double t = 0;
  double value = 0;
  double bound = 0;  // theoretical upper bound at t
  bool bound_violated = false;
  InversionMethod method = InversionMethod::talbot;
};

CmFunctionHandle mu_transform(const BernsteinSpec& spec);    // phi', transform of t mu(t)
CmFunctionHandle u_transform(const BernsteinSpec& spec);     // 1/phi
CmFunctionHandle tail_transform(const BernsteinSpec& spec);  // phi(l)/l

// mu(t) <= (1-2/e)^{-1} t^{-1} phi(1/t)
DensityValue levy_density_mu(const BernsteinSpec& spec, double t, const QuadratureConfig& cfg = {});
// u(t) <= (1-1/e)^{-1} t^{-1} / phi(1/t)
DensityValue potential_density_u(const BernsteinSpec& spec, double t,
                                 const QuadratureConfig& cfg = {});
// mu(t, inf) = potential density of lambda/phi(lambda),
// bounded by (1-1/e)^{-1} t^{-1} / phi*(1/t).
DensityValue levy_tail(const BernsteinSpec& spec, double t, const QuadratureConfig& cfg = {});

double mu_upper_bound(const BernsteinSpec& spec, double t);
double u_upper_bound(const BernsteinSpec& spec, double t);
double tail_upper_bound(const BernsteinSpec& spec, double t);

// Checks t against the admissible inversion window.
void check_inversion_time(double t, const QuadratureConfig& cfg);

}  // namespace sbm
