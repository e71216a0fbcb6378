#include "sbm/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

// Boost 1.74 pchip calls isnan unqualified
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>

#include "sbm/io.hpp"
#include "sbm/laplace.hpp"
#include "sbm/quadrature.hpp"

namespace sbm {

namespace {

// tan u near either end, from the distance to that end
double tan_at(double u, double da, double db) {
  constexpr double pi_2 = std::numbers::pi / 2;
  if (db < 0.25) return 1 / std::tan(db);
  if (da < 0.25) return std::tan(da);
  return std::tan(std::min(u, pi_2));
}

double fristedt(const BernsteinSpec& spec, double lambda2) {
  auto f = [&](double u, double da, double db) {
    const double tn = tan_at(u, da, db);
    return std::log(spec(lambda2 * (tn * tn)));
  };
  const double I = numint::tanh_sinh<double>(f, 0.0, std::numbers::pi / 2, 1e-13, 10);
  return std::exp(I / std::numbers::pi);
}

}  // namespace

double ladder_exponent_chi(const BernsteinSpec& spec, double lambda, const QuadratureConfig&) {
  if (!(lambda > 0) || !std::isfinite(lambda))
    throw DomainError("lambda must be positive, got " + fmt_double(lambda));
  return fristedt(spec, lambda * lambda);
}

cplx ladder_exponent_chi(const BernsteinSpec& spec, cplx lambda, const QuadratureConfig& cfg) {
  if (!spec.has_complex()) throw DomainError(spec.label() + " has no complex evaluator");
  if (lambda.imag() == 0 && lambda.real() > 0)
    return ladder_exponent_chi(spec, lambda.real(), cfg);
  if (lambda.real() < 0) return spec(-lambda * lambda) / ladder_exponent_chi(spec, -lambda, cfg);
  if (!(lambda.real() > 0)) throw DomainError("chi is not continued onto the imaginary axis");
  // Rotating the integration ray onto the positive axis leaves a Poisson
  // kernel and keeps phi off its branch cut: log chi(lambda) =
  // (1/pi) int_0^inf lambda log phi(w^2) / (lambda^2 + w^2) dw, w = |lambda| e^x.
  const double m = std::abs(lambda);
  auto f = [&](double x) {
    const double w = m * std::exp(x);
    return lambda * w * std::log(spec(w * w)) / (lambda * lambda + w * w);
  };
  // the kernel peaks near x = 0 with width Re(lambda)/|lambda|
  const double width = std::max(lambda.real() / m, 1e-6);
  std::vector<double> br{-45, -5, -1, 1, 5, 45};
  for (double k = 1; k * width < 1; k *= 4) {
    br.push_back(-k * width);
    br.push_back(k * width);
  }
  br.push_back(0);
  std::sort(br.begin(), br.end());
  cplx I = 0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i) I += numint::gk(f, br[i], br[i + 1], 1e-13, 20);
  return std::exp(I / std::numbers::pi);
}

// ---------------------------------------------------------------- tables

namespace {

using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

// pchip in log-log over a 4-point window around `at`
double log_interp(const std::vector<double>& x, const std::vector<double>& y, double at) {
  const std::size_t n = x.size();
  const std::size_t i = std::upper_bound(x.begin(), x.end(), at) - x.begin();
  const std::size_t lo = std::min(i >= 2 ? i - 2 : 0, n - 4);
  std::vector<double> lx(4), ly(4);
  for (std::size_t k = 0; k < 4; ++k) {
    lx[k] = std::log(x[lo + k]);
    ly[k] = std::log(y[lo + k]);
  }
  Pchip p(std::move(lx), std::move(ly));
  return std::exp(p(std::log(at)));
}

void check_range(const RenewalTable& t, double r) {
  if (t.grid.size() < 4) throw DomainError("renewal table has fewer than 4 points");
  if (r < t.grid.front() * (1 - 1e-12) || r > t.grid.back() * (1 + 1e-12))
    throw DomainError("r=" + fmt_double(r) + " outside the renewal table [" +
                      fmt_double(t.grid.front()) + ", " + fmt_double(t.grid.back()) + "]");
}

}  // namespace

double RenewalTable::operator()(double r) const {
  check_range(*this, r);
  return log_interp(grid, V, std::clamp(r, grid.front(), grid.back()));
}

double RenewalTable::density(double r) const {
  check_range(*this, r);
  return log_interp(grid, v, std::clamp(r, grid.front(), grid.back()));
}

std::string RenewalTable::to_csv() const {
  CsvWriter w({"r", "v", "V"});
  for (std::size_t i = 0; i < grid.size(); ++i) w.row_numbers({grid[i], v[i], V[i]});
  return w.str();
}

RenewalTable RenewalTable::from_csv(const std::string& text, const std::string& id) {
  RenewalTable t;
  t.spec_id = id;
  for (const auto& row : parse_numeric_csv(text)) {
    if (row.size() != 3) throw Error("renewal CSV rows need 3 columns");
    t.grid.push_back(row[0]);
    t.v.push_back(row[1]);
    t.V.push_back(row[2]);
  }
  if (t.grid.size() < 4) throw Error("renewal CSV has fewer than 4 rows");
  t.head_exponent = std::log(t.V[1] / t.V[0]) / std::log(t.grid[1] / t.grid[0]);
  return t;
}

RenewalTable renewal_table(const BernsteinSpec& spec, const std::vector<double>& grid,
                           const QuadratureConfig& cfg) {
  if (grid.size() < 4) throw DomainError("renewal grid needs at least 4 points");
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!(grid[i] > 0) || (i && !(grid[i] > grid[i - 1])))
      throw DomainError("renewal grid must be positive and increasing");
  cfg.validate();

  CmFunctionHandle h;
  h.label = "1/chi[" + spec.label() + "]";
  h.real = [&](double l) { return 1 / ladder_exponent_chi(spec, l, cfg); };
  if (spec.has_complex()) h.complex = [&](cplx l) { return 1.0 / ladder_exponent_chi(spec, l, cfg); };

  RenewalTable t;
  t.spec_id = spec.id();
  t.grid = grid;
  // an odd node count keeps every Talbot node off the imaginary axis
  QuadratureConfig icfg = cfg;
  icfg.talbot_nodes |= 1;
  t.v.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    t.v[i] = invert_cm(h, grid[i], icfg);
    if (!(t.v[i] > 0))
      throw ConvergenceError("renewal density is not positive at r=" + fmt_double(grid[i]));
  }

  // v is integrated exactly between grid points as a local power law
  auto slope = [&](std::size_t i) {
    return -std::log(t.v[i + 1] / t.v[i]) / std::log(t.grid[i + 1] / t.grid[i]);
  };
  const double k0 = slope(0);
  if (!(k0 < 1)) throw ConvergenceError("renewal density is not integrable at 0 (local exponent " +
                                        fmt_double(k0) + ")");
  t.V.resize(grid.size());
  t.V[0] = t.v[0] * grid[0] / (1 - k0);
  t.head_exponent = 1 - k0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double k = slope(i), q = grid[i + 1] / grid[i], e = 1 - k;
    const double piece = std::fabs(e) < 1e-10 ? t.v[i] * grid[i] * std::log(q)
                                              : t.v[i] * grid[i] * std::expm1(e * std::log(q)) / e;
    t.V[i + 1] = t.V[i] + piece;
  }
  return t;
}

RenewalTable renewal_table(const BernsteinSpec& spec, const RenewalOptions& opt,
                           const QuadratureConfig& cfg) {
  if (!(opt.r_min > 0) || !(opt.r_max > opt.r_min) || opt.points < 4)
    throw DomainError("renewal options need 0 < r_min < r_max and at least 4 points");
  std::vector<double> grid(opt.points);
  const double a = std::log(opt.r_min), b = std::log(opt.r_max);
  for (int i = 0; i < opt.points; ++i) grid[i] = std::exp(a + (b - a) * i / (opt.points - 1));

  const std::string key = spec.id() + "-" +
                          hex64(fnv1a64(cfg.hash() + "|" + fmt_double(opt.r_min) + "|" +
                                        fmt_double(opt.r_max) + "|" + std::to_string(opt.points)));
  const auto path = cache_dir() / ("renewal-" + key + ".csv");
  if (opt.use_cache) {
    if (auto text = read_file(path)) {
      try {
        auto t = RenewalTable::from_csv(*text, spec.id());
        if (t.grid.size() == grid.size()) return t;
      } catch (const Error&) {
        // unreadable cache entry, rebuild
      }
    }
  }
  auto t = renewal_table(spec, grid, cfg);
  if (opt.use_cache) {
    try {
      write_file_atomic(path, t.to_csv());
    } catch (const std::exception&) {
      // a read-only cache directory only costs a rebuild next time
    }
  }
  return t;
}

double boundary_decay_w(const RenewalTable& table, const std::vector<double>& x) {
  if (x.empty()) throw DomainError("point has no coordinates");
  const double xd = x.back();
  if (!(xd > 0)) return 0;
  return table(xd);
}

double bhp_decay_comparator(const BernsteinSpec& spec, double delta_x, double delta_y) {
  if (!(delta_x > 0) || !(delta_y > 0)) throw DomainError("boundary distances must be positive");
  return std::sqrt(spec(1 / (delta_y * delta_y)) / spec(1 / (delta_x * delta_x)));
}

}  // namespace sbm
