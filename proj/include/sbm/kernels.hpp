#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sbm/bernstein.hpp"
#include "sbm/config.hpp"

namespace sbm {

using Point = std::vector<double>;

struct KernelPoint {
  int d = 1;
  std::optional<double> t;
  Point x, y;
  double r() const;  // |x - y|
  void validate() const;
};

enum class DensityKind { mu, u };

// mu or u on a log grid over the inversion window, pchip in log-log,
// power-law extrapolation beyond the ends. In exact mode every call inverts.
class DensityTable {
 public:
  static std::shared_ptr<const DensityTable> get(const BernsteinSpec& spec, DensityKind kind,
                                                 const QuadratureConfig& cfg);
  double operator()(double t) const;
  // Local power-law exponent kappa of the density near t (f ~ t^{-kappa}).
  double decay_exponent(double t) const;
  double t_min() const { return t_lo_; }
  double t_max() const { return t_hi_; }
  DensityKind kind() const { return kind_; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  DensityKind kind_ = DensityKind::mu;
  double t_lo_ = 0, t_hi_ = 0;
  friend struct DensityTableBuilder;
};

// r^{-d} phi(r^{-2})
double j_estimate(const BernsteinSpec& spec, int d, double r);
// r^{-d} / phi(r^{-2})
double g_estimate(const BernsteinSpec& spec, int d, double r);

double jump_density_j(const BernsteinSpec& spec, int d, double r, const QuadratureConfig& cfg = {});
// Requires check_transience(spec, d) == transient.
double green_radial_g(const BernsteinSpec& spec, int d, double r, const QuadratureConfig& cfg = {});

enum class Transience { transient, recurrent, borderline };
std::string to_string(Transience t);

struct TransienceResult {
  Transience status = Transience::borderline;
  std::string reason;
  double half_d = 0;
  double delta3 = 0, delta4 = 0;  // fitted on [1e-8, 1]
  double end_slope = 0;           // local slope of phi at 1e-8
  double integral_eps_1 = 0;      // Chung-Fuchs integral over [1e-8, 1]
  double last_decade_ratio = 0;   // contribution of [1e-8,1e-7] over [1e-7,1e-6]
  bool transient() const { return status == Transience::transient; }
};
TransienceResult check_transience(const BernsteinSpec& spec, int d);

struct HeatKernelValue {
  double value = 0;
  double rho_max = 0;  // truncation frequency
  std::size_t panels = 0;
  bool oscillation_warning = false;
};
// Free transition density p(t, x, y) at |x - y| = r.
HeatKernelValue free_heat_kernel(const BernsteinSpec& spec, int d, double t, double r,
                                 const QuadratureConfig& cfg = {});

// Phi^{-1}(t)^{-d} ^ t r^{-d} phi(r^{-2}); volume branch at r = 0.
double p_estimate(const BernsteinSpec& spec, int d, double t, double r);
// (sqrt(Phi(x_d)/t) ^ 1)(sqrt(Phi(y_d)/t) ^ 1) p_estimate(t, |x-y|)
double half_space_hk_estimate(const BernsteinSpec& spec, int d, double t, const Point& x,
                              const Point& y);
// sqrt(Phi(delta)/t) ^ 1
double boundary_factor(const BernsteinSpec& spec, double t, double delta);

enum class GreenRegime { two_sided, one_dimensional };
std::string to_string(GreenRegime g);

struct GreenEstimate {
  double value = 0;
  GreenRegime regime = GreenRegime::two_sided;
  std::string regime_condition;
};
// Two-sided half-space Green estimate. Regime selection uses the fitted
// indices: d > 2(delta2 v delta4) gives the product form, d = 1 with
// delta1 ^ delta3 > 1/2 the one-dimensional form; anything else throws.
GreenEstimate half_space_green_estimate(const BernsteinSpec& spec, int d, const Point& x,
                                        const Point& y, const ScalingCertificate& cert);
GreenEstimate half_space_green_estimate(const BernsteinSpec& spec, int d, const Point& x,
                                        const Point& y);
// One-sided upper comparator sqrt(Phi(x_d) Phi(y_d)) / |x-y|^d, meaningful
// when Phi(x_d) Phi(y_d) <= Phi(|x-y|)^2.
double half_space_green_upper(const BernsteinSpec& spec, int d, const Point& x, const Point& y);

// Surface area of the unit sphere in R^d.
double sphere_area(int d);

}  // namespace sbm
