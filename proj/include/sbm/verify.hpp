#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sbm/bernstein.hpp"
#include "sbm/config.hpp"

namespace sbm {

enum class Provenance { quadrature, monte_carlo };
std::string to_string(Provenance p);

struct SweepOptions {
  double band_limit = 100;
  // |slope| of log ratio against log grid; <= 0 disables the drift test.
  double slope_limit = 0.05;
  // Optional absolute limits on every ratio.
  std::optional<double> ratio_floor, ratio_ceiling;
  Provenance provenance = Provenance::quadrature;
  unsigned workers = 1;
};

struct ComparabilityReport {
  std::string name;
  std::vector<double> grid, values, estimates, ratios;
  std::vector<Provenance> provenance;
  std::vector<std::string> errors;  // empty string where the point evaluated
  double ratio_min = 0, ratio_max = 0;
  double band = 0;  // ratio_max / ratio_min
  double band_limit = 0;
  double slope = 0;  // least-squares slope of log ratio against log grid
  double slope_limit = 0;
  bool passed = false;
  std::string message;
  json to_json() const;
  std::string to_csv() const;
};

// Evaluates value/estimate at every grid point; passes iff every point
// evaluated, all ratios are positive, the band is within band_limit, the
// drift is within slope_limit and any absolute limits hold.
ComparabilityReport comparability_sweep(const std::string& name,
                                        const std::function<double(double)>& value_fn,
                                        const std::function<double(double)>& estimate_fn,
                                        const std::vector<double>& grid,
                                        const SweepOptions& opt = {});

// One-sided lhs <= factor * rhs at every point.
struct BoundReport {
  std::string name;
  std::vector<double> grid, lhs, rhs;
  double factor = 1;
  double worst = 0;  // max lhs / rhs
  std::size_t violations = 0;
  std::optional<double> first_violation;
  bool passed = false;
  std::string message;
  json to_json() const;
  std::string to_csv() const;
};

BoundReport bound_sweep(const std::string& name, const std::function<double(double)>& lhs_fn,
                        const std::function<double(double)>& rhs_fn,
                        const std::vector<double>& grid, double factor, unsigned workers = 1);

// lhs <= c rhs with c fitted on a coarse subgrid (every (n/7)-th point
// plus both ends) and checked, with `factor` slack, on the full grid.
BoundReport fitted_bound_sweep(const std::string& name,
                               const std::function<double(double)>& lhs_fn,
                               const std::function<double(double)>& rhs_fn,
                               const std::vector<double>& grid, double factor,
                               unsigned workers = 1);

// Integrals of the integral-estimate lemma, by quadrature in log r.
double ie1_lhs(const BernsteinSpec& spec, double lambda);  // int_0^{1/l} phi(r^-2)^{1/2} dr
double ie1_rhs(const BernsteinSpec& spec, double lambda);  // l^{-1} phi(l^2)^{1/2}
double ie2_lhs(const BernsteinSpec& spec, double lambda);
double ie2_rhs(const BernsteinSpec& spec, double lambda);  // phi(l^2)
double ie3_lhs(const BernsteinSpec& spec, double lambda);  // int_0^{1/l} r^-1 / phi(r^-2) dr
double ie3_rhs(const BernsteinSpec& spec, double lambda);  // 1 / phi(l^2)

enum class CheckStatus { passed, failed, skipped, errored };
std::string to_string(CheckStatus s);

struct CheckResult {
  std::string name;
  std::string stage;
  CheckStatus status = CheckStatus::skipped;
  std::string message;
  double ratio_min = 0, ratio_max = 0;
  std::size_t n_points = 0;
  json details;
  std::string csv;
};

struct SuiteConfig {
  bool quadrature = true;
  bool monte_carlo = true;
  double r_min = 1e-3, r_max = 1e3;
  double points_per_decade = 8;
  double band_limit_quadrature = 100;
  double band_limit_mc = 1000;
  double slope_limit = 0.05;
  double bound_factor = 1.05;
  // Monte Carlo sizes
  std::size_t n_exit = 20000;
  std::size_t n_half_space = 100000;
  std::size_t n_bhp = 20000;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  // Negative control: compare j against r^{-d} phi(r^{-1}).
  bool inject_wrong_exponent = false;
  QuadratureConfig cfg;
  json to_json() const;
};

struct SuiteBundle {
  json spec;
  int d = 1;
  json config;
  std::vector<CheckResult> checks;
  bool passed() const;  // every non-skipped check passed
  std::vector<std::string> failed_checks() const;
  json summary() const;
  void write(const std::filesystem::path& dir) const;
};

// Names of every check, in run order.
const std::vector<std::string>& check_manifest();

SuiteBundle run_suite(const BernsteinSpec& spec, int d, const SuiteConfig& cfg = {});

}  // namespace sbm
