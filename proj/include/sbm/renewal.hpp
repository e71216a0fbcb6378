#pragma once

#include <string>
#include <vector>

#include "sbm/bernstein.hpp"
#include "sbm/config.hpp"

namespace sbm {

// Laplace exponent of the ascending ladder-height process of one coordinate,
// exp((1/pi) int_0^{pi/2} log phi(lambda^2 tan^2 u) du).
double ladder_exponent_chi(const BernsteinSpec& spec, double lambda, const QuadratureConfig& cfg = {});
// Analytic continuation used on the Talbot contour. For Re lambda < 0 the
// factorization chi(lambda) chi(-lambda) = phi(-lambda^2) is used.
cplx ladder_exponent_chi(const BernsteinSpec& spec, cplx lambda, const QuadratureConfig& cfg = {});

// Renewal density v (transform 1/chi) and renewal function V on a grid.
// V is only defined on [grid.front(), grid.back()].
struct RenewalTable {
  std::vector<double> grid, v, V;
  std::string spec_id;
  double head_exponent = 0;  // V ~ r^{head_exponent} below grid.front()

  double operator()(double r) const;  // V(r), monotone interpolation
  double density(double r) const;     // v(r)
  std::string to_csv() const;
  static RenewalTable from_csv(const std::string& text, const std::string& spec_id);
};

struct RenewalOptions {
  double r_min = 1e-6, r_max = 1e6;
  int points = 1024;
  // Read and write the CSV cache in cache_dir().
  bool use_cache = true;
};

RenewalTable renewal_table(const BernsteinSpec& spec, const std::vector<double>& grid,
                           const QuadratureConfig& cfg = {});
// Log-spaced table from options, cached between runs by spec id and
// configuration hash.
RenewalTable renewal_table(const BernsteinSpec& spec, const RenewalOptions& opt = {},
                           const QuadratureConfig& cfg = {});

// V((x_d)^+); zero off the half-space, DomainError beyond the table.
double boundary_decay_w(const RenewalTable& table, const std::vector<double>& x);

// sqrt(phi(delta_y^{-2}) / phi(delta_x^{-2}))
double bhp_decay_comparator(const BernsteinSpec& spec, double delta_x, double delta_y);

}  // namespace sbm
