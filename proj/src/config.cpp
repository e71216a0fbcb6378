#include "sbm/config.hpp"

#include <cmath>

#include "json.hpp"
#include "sbm/errors.hpp"
#include "sbm/io.hpp"

namespace sbm {

std::string to_string(InversionMethod m) {
  return m == InversionMethod::talbot ? "talbot" : "gaver_stehfest";
}

InversionMethod inversion_method_from_string(const std::string& s) {
  if (s == "talbot") return InversionMethod::talbot;
  if (s == "gaver_stehfest") return InversionMethod::gaver_stehfest;
  throw DomainError("unknown inversion method '" + s + "' (talbot, gaver_stehfest)");
}

void QuadratureConfig::validate() const {
  if (!(abs_tol > 0) || !(rel_tol > 0)) throw DomainError("tolerances must be positive");
  if (gaver_stehfest_order < 2 || gaver_stehfest_order > gaver_stehfest_max_order ||
      gaver_stehfest_order % 2)
    throw DomainError("gaver_stehfest order must be even and in [2, " +
                      std::to_string(gaver_stehfest_max_order) + "]");
  if (talbot_nodes < 16) throw DomainError("talbot needs at least 16 nodes");
  if (max_subdivisions < 1) throw DomainError("max_subdivisions must be >= 1");
  if (!(log10_t_min < log10_t_max)) throw DomainError("empty inversion time range");
  if (!(phi_inv_log10_lo < phi_inv_log10_hi)) throw DomainError("empty Phi^{-1} bracket");
  if (!(fd_rel_step > 0 && fd_rel_step < 0.1)) throw DomainError("fd_rel_step out of range");
  if (!(bound_factor >= 1)) throw DomainError("bound_factor must be >= 1");
  if (density_cache_points < 16) throw DomainError("density cache needs >= 16 points");
}

std::string QuadratureConfig::hash() const {
  nlohmann::json j = {
      {"method", to_string(inversion_method)}, {"talbot", talbot_nodes},
      {"gs", gaver_stehfest_order},           {"abs", abs_tol},
      {"rel", rel_tol},                        {"sub", max_subdivisions},
      {"tlo", log10_t_min},                    {"thi", log10_t_max},
      {"fd", fd_rel_step},                     {"exact", exact_densities},
      {"cache_pts", density_cache_points},
  };
  return hex64(fnv1a64(j.dump()));
}

}  // namespace sbm
