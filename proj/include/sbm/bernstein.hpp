#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sbm/config.hpp"
#include "sbm/errors.hpp"

namespace sbm {

using cplx = std::complex<double>;
// IEEE binary128, used for real-axis inversion where cancellation is severe.
using quad = __float128;
using json = nlohmann::json;

enum class Family {
  sum_of_powers,
  power_of_shifted,
  power_log,
  power_over_log,
  log_cosh,
  log_sinh,
  pure_power,
  custom,
};

std::string family_name(Family f);
std::optional<Family> family_from_name(std::string_view name);
std::vector<std::string> family_names();

using ParamMap = std::map<std::string, double>;

// Only `value` is mandatory. Without `complex_value` the Talbot route is
// unavailable and inversions fall back to Gaver-Stehfest; without
// `derivative` a central difference is used.
struct CustomEvaluator {
  std::string name;
  std::function<double(double)> value;
  std::function<cplx(cplx)> complex_value;
  std::function<double(double)> derivative;
  std::function<cplx(cplx)> complex_derivative;
};

// Named custom evaluators reachable from JSON: "log1p" is log(1+x) and
// "square" is x^2 (not Bernstein; used as a negative control).
std::optional<CustomEvaluator> builtin_custom(std::string_view name);
std::vector<std::string> builtin_custom_names();

namespace detail {
class PhiModel;
}

class BernsteinSpec {
 public:
  static BernsteinSpec make(Family family, const ParamMap& params, bool normalize = true);
  static BernsteinSpec pure_power(double alpha);
  static BernsteinSpec sum_of_powers(double alpha, double beta);
  static BernsteinSpec power_of_shifted(double alpha, double beta);
  static BernsteinSpec power_log(double alpha, double beta);
  static BernsteinSpec power_over_log(double alpha, double beta);
  static BernsteinSpec log_cosh(double alpha);
  static BernsteinSpec log_sinh(double alpha);
  static BernsteinSpec custom(CustomEvaluator ev, bool normalize = true);

  static BernsteinSpec from_json(const json& j);
  json to_json() const;
  // Stable 16-hex-digit hash of the canonical JSON form.
  std::string id() const;
  std::string label() const;

  Family family() const;
  const ParamMap& params() const;
  double param(const std::string& name) const;
  bool normalized() const { return normalize_; }
  // Factor multiplying the raw family value.
  double scale() const { return scale_; }

  // Hot-path evaluation, no domain checks.
  double operator()(double lambda) const;
  long double operator()(long double lambda) const;
  quad operator()(quad lambda) const;
  cplx operator()(cplx lambda) const;
  double derivative(double lambda) const;
  long double derivative(long double lambda) const;
  quad derivative(quad lambda) const;
  cplx derivative(cplx lambda) const;
  double raw(double lambda) const;

  bool has_complex() const;
  // False when binary128 evaluation would only widen a double result.
  bool has_quad() const;
  bool has_closed_form_derivative() const;

  // Exponent of the power law this spec reduces to, when it is one exactly
  // (pure_power and its conjugates/rescalings).
  std::optional<double> exact_power() const;

 private:
  BernsteinSpec(std::shared_ptr<const detail::PhiModel> model, bool normalize, json descriptor);
  friend BernsteinSpec conjugate(const BernsteinSpec&);
  friend BernsteinSpec rescale(const BernsteinSpec&, double);

  std::shared_ptr<const detail::PhiModel> model_;
  bool normalize_ = true;
  double scale_ = 1.0;
  long double scale_ld_ = 1.0L;
  quad scale_q_ = 1;
  json descriptor_;
  ParamMap params_;
};

double eval_phi(const BernsteinSpec& spec, double lambda);
double eval_phi_prime(const BernsteinSpec& spec, double lambda,
                      const QuadratureConfig& cfg = {});

// lambda / phi(lambda), renormalized at 1.
BernsteinSpec conjugate(const BernsteinSpec& spec);
// phi(lambda a^{-2}) / phi(a^{-2}).
BernsteinSpec rescale(const BernsteinSpec& spec, double a);

// Phi(r) = 1/phi(r^{-2}).
double capital_phi(const BernsteinSpec& spec, double r);
double capital_phi_inv(const BernsteinSpec& spec, double t, const QuadratureConfig& cfg = {});

// Log-spaced grid lo..hi inclusive with the given density per decade.
std::vector<double> log_grid(double lo, double hi, double points_per_decade);

enum class ScalingSide { at_zero, at_infinity };
std::string to_string(ScalingSide s);

struct SideFit {
  ScalingSide side = ScalingSide::at_infinity;
  double delta_lower = 0, delta_upper = 0;
  double a_lower = 1, a_upper = 1;
  // Index extrapolated to the far end of the grid under a slowly varying
  // correction model s(x) = delta + c/|log x|.
  double asymptotic_index = 0;
  double r_min = 0, r_max = 0;
  std::size_t points = 0;
  double points_per_decade = 0;
  // Pair attaining the extreme slopes.
  double lower_pair_r = 0, lower_pair_R = 0;
  double upper_pair_r = 0, upper_pair_R = 0;
};

struct ScalingOptions {
  double points_per_decade = 64;
  // Fail unless the asymptotic index lies in [tol, 1 - tol].
  double asymptotic_tol = 0.01;
};

struct ScalingCertificate {
  std::optional<SideFit> at_infinity;  // delta1, delta2, a1, a2
  std::optional<SideFit> at_zero;      // delta3, delta4, a3, a4
  double a5 = 1, a6 = 1;               // combined bound, both sides present
  bool empirical = true;

  double delta1() const;
  double delta2() const;
  double delta3() const;
  double delta4() const;
  double combined_lower() const;  // delta1 ^ delta3
  double combined_upper() const;  // delta2 v delta4
  json to_json() const;
};

// Fits the grid-extremal indices. Throws CertificationError naming the side
// and the offending pair when the fit leaves (0,1).
SideFit fit_scaling_side(const BernsteinSpec& spec, double r_min, double r_max,
                         ScalingSide side, const ScalingOptions& opt = {});
ScalingCertificate estimate_scaling_indices(const BernsteinSpec& spec, double r_min,
                                            double r_max, ScalingSide side,
                                            const ScalingOptions& opt = {});
// Both sides over [1e-8, 1] and [1, 1e8] by default; all failures are
// collected into one CertificationError.
ScalingCertificate certify(const BernsteinSpec& spec, double decades = 8,
                           const ScalingOptions& opt = {});

struct SanityViolation {
  std::string check;
  double lambda = 0, t = 0;
  double lhs = 0, rhs = 0;
};

struct SanityReport {
  bool passed = true;
  std::size_t points_checked = 0;
  std::optional<SanityViolation> first_violation;
  json to_json() const;
};

// Pointwise checks over all (lambda, t) pairs drawn from the two grids.
SanityReport check_bernstein_sanity(const BernsteinSpec& spec, const std::vector<double>& lambdas,
                                    const std::vector<double>& ts,
                                    const QuadratureConfig& cfg = {});

}  // namespace sbm
