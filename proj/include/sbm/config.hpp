#pragma once

#include <string>

namespace sbm {

enum class InversionMethod { talbot, gaver_stehfest };

inline constexpr int gaver_stehfest_max_order = 40;

std::string to_string(InversionMethod m);
InversionMethod inversion_method_from_string(const std::string& s);

struct QuadratureConfig {
  InversionMethod inversion_method = InversionMethod::talbot;
  int talbot_nodes = 32;
  // Even, at most gaver_stehfest_max_order; evaluated in binary128.
  int gaver_stehfest_order = 32;

  double abs_tol = 1e-300;
  double rel_tol = 1e-8;
  int max_subdivisions = 15;  // bisection depth of adaptive Gauss-Kronrod

  // Admissible time range for inversions, log10.
  double log10_t_min = -12.0;
  double log10_t_max = 12.0;

  // Bracket for Phi^{-1}, log10 of length.
  double phi_inv_log10_lo = -40.0;
  double phi_inv_log10_hi = 40.0;

  // Relative step of central differences, used only for custom evaluators
  // that supply no derivative.
  double fd_rel_step = 1e-6;

  // Multiplicative slack before an upper bound is flagged as violated.
  double bound_factor = 1.05;

  // Kernel integrals: interpolate mu/u on a cached log grid, or invert at
  // every quadrature node.
  bool exact_densities = false;
  int density_cache_points = 512;

  void validate() const;
  std::string hash() const;
};

}  // namespace sbm
