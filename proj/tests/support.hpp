#pragma once

#include <cmath>
#include <vector>

#include "sbm/bernstein.hpp"

inline std::vector<sbm::BernsteinSpec> six_families() {
  using sbm::BernsteinSpec;
  return {BernsteinSpec::sum_of_powers(0.3, 0.7), BernsteinSpec::power_of_shifted(0.5, 0.5),
          BernsteinSpec::power_log(0.5, 0.3),     BernsteinSpec::power_over_log(0.7, 0.3),
          BernsteinSpec::log_cosh(0.5),           BernsteinSpec::log_sinh(0.5)};
}

inline double rel_err(double a, double b) { return std::fabs(a - b) / std::fabs(b); }
