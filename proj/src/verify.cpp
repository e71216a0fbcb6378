#include "sbm/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <mutex>
#include <thread>

#include "sbm/io.hpp"
#include "sbm/kernels.hpp"
#include "sbm/laplace.hpp"
#include "sbm/quadrature.hpp"
#include "sbm/renewal.hpp"
#include "sbm/simulate.hpp"

namespace sbm {

std::string to_string(Provenance p) {
  return p == Provenance::quadrature ? "quadrature" : "monte_carlo";
}

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::passed: return "passed";
    case CheckStatus::failed: return "failed";
    case CheckStatus::skipped: return "skipped";
    case CheckStatus::errored: return "errored";
  }
  return "?";
}

namespace {

unsigned resolve_workers(unsigned w) {
  return w ? w : std::max(1u, std::thread::hardware_concurrency());
}

// f at every grid point; per-point exceptions become error strings.
void parallel_eval(const std::vector<double>& grid, const std::function<double(double)>& f,
                   std::vector<double>& out, std::vector<std::string>& err, unsigned workers) {
  out.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  err.resize(grid.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < grid.size();) {
      try {
        out[i] = f(grid[i]);
      } catch (const std::exception& e) {
        if (err[i].empty()) err[i] = e.what();
      }
    }
  };
  const unsigned w = std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(grid.size(), 1));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < w; ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

double lsq_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = x.size();
  if (n < 2) return 0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0;
}

std::string first_error(const std::vector<double>& grid, const std::vector<std::string>& err) {
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!err[i].empty()) return "point " + fmt_double(grid[i]) + " errored: " + err[i];
  return {};
}

}  // namespace

// ------------------------------------------------------------ sweeps

ComparabilityReport comparability_sweep(const std::string& name,
                                        const std::function<double(double)>& value_fn,
                                        const std::function<double(double)>& estimate_fn,
                                        const std::vector<double>& grid, const SweepOptions& opt) {
  if (grid.empty()) throw DomainError(name + ": empty grid");
  if (!(opt.band_limit > 1)) throw DomainError(name + ": band_limit must exceed 1");
  ComparabilityReport rep;
  rep.name = name;
  rep.grid = grid;
  rep.band_limit = opt.band_limit;
  rep.slope_limit = opt.slope_limit;
  rep.provenance.assign(grid.size(), opt.provenance);
  std::vector<std::string> e1, e2;
  parallel_eval(grid, value_fn, rep.values, e1, opt.workers);
  parallel_eval(grid, estimate_fn, rep.estimates, e2, opt.workers);
  rep.errors.resize(grid.size());
  rep.ratios.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rep.errors[i] = !e1[i].empty() ? e1[i] : e2[i];
    rep.ratios[i] = rep.values[i] / rep.estimates[i];
    if (rep.errors[i].empty() && !(rep.ratios[i] > 0 && std::isfinite(rep.ratios[i])))
      rep.errors[i] = "ratio " + fmt_double(rep.ratios[i]) + " is not positive and finite";
  }
  if (auto e = first_error(grid, rep.errors); !e.empty()) {
    rep.message = name + ": " + e;
    return rep;
  }
  rep.ratio_min = *std::min_element(rep.ratios.begin(), rep.ratios.end());
  rep.ratio_max = *std::max_element(rep.ratios.begin(), rep.ratios.end());
  rep.band = rep.ratio_max / rep.ratio_min;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    lx.push_back(std::log(grid[i]));
    ly.push_back(std::log(rep.ratios[i]));
  }
  rep.slope = lsq_slope(lx, ly);
  std::vector<std::string> why;
  if (rep.band > opt.band_limit)
    why.push_back("band " + fmt_double(rep.band) + " exceeds " + fmt_double(opt.band_limit));
  if (opt.slope_limit > 0 && std::fabs(rep.slope) > opt.slope_limit)
    why.push_back("log-ratio slope " + fmt_double(rep.slope) + " exceeds " + fmt_double(opt.slope_limit));
  if (opt.ratio_floor && rep.ratio_min < *opt.ratio_floor)
    why.push_back("ratio " + fmt_double(rep.ratio_min) + " below " + fmt_double(*opt.ratio_floor));
  if (opt.ratio_ceiling && rep.ratio_max > *opt.ratio_ceiling)
    why.push_back("ratio " + fmt_double(rep.ratio_max) + " above " + fmt_double(*opt.ratio_ceiling));
  rep.passed = why.empty();
  if (rep.passed) {
    rep.message = name + ": band " + fmt_double(rep.band) + ", slope " + fmt_double(rep.slope);
  } else {
    rep.message = name + ":";
    for (const auto& w : why) rep.message += " " + w + ";";
    rep.message.pop_back();
  }
  return rep;
}

json ComparabilityReport::to_json() const {
  return {{"name", name},           {"passed", passed},        {"ratio_min", ratio_min},
          {"ratio_max", ratio_max}, {"band", band},            {"band_limit", band_limit},
          {"slope", slope},         {"slope_limit", slope_limit}, {"n_points", grid.size()},
          {"message", message}};
}

std::string ComparabilityReport::to_csv() const {
  CsvWriter w({"x", "value", "estimate", "ratio", "provenance", "error"});
  for (std::size_t i = 0; i < grid.size(); ++i)
    w.row({fmt_double(grid[i]), fmt_double(values[i]), fmt_double(estimates[i]),
           fmt_double(ratios[i]), to_string(provenance[i]), errors[i]});
  return w.str();
}

BoundReport bound_sweep(const std::string& name, const std::function<double(double)>& lhs_fn,
                        const std::function<double(double)>& rhs_fn,
                        const std::vector<double>& grid, double factor, unsigned workers) {
  if (grid.empty()) throw DomainError(name + ": empty grid");
  BoundReport rep;
  rep.name = name;
  rep.grid = grid;
  rep.factor = factor;
  std::vector<std::string> e1, e2;
  parallel_eval(grid, lhs_fn, rep.lhs, e1, workers);
  parallel_eval(grid, rhs_fn, rep.rhs, e2, workers);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!e1[i].empty() || !e2[i].empty()) {
      rep.message = name + ": point " + fmt_double(grid[i]) + " errored: " + (e1[i].empty() ? e2[i] : e1[i]);
      return rep;
    }
    const double q = rep.lhs[i] / rep.rhs[i];
    rep.worst = std::max(rep.worst, q);
    if (!(rep.lhs[i] <= factor * rep.rhs[i])) {
      ++rep.violations;
      if (!rep.first_violation) rep.first_violation = grid[i];
    }
  }
  rep.passed = rep.violations == 0;
  rep.message = name + ": " + std::to_string(rep.violations) + " violations, worst lhs/rhs " +
                fmt_double(rep.worst);
  if (rep.first_violation) rep.message += ", first at " + fmt_double(*rep.first_violation);
  return rep;
}

BoundReport fitted_bound_sweep(const std::string& name,
                               const std::function<double(double)>& lhs_fn,
                               const std::function<double(double)>& rhs_fn,
                               const std::vector<double>& grid, double factor,
                               unsigned workers) {
  auto rep = bound_sweep(name, lhs_fn, rhs_fn, grid, std::numeric_limits<double>::infinity(), workers);
  if (!rep.message.empty() && rep.message.find("errored") != std::string::npos) {
    rep.passed = false;
    return rep;
  }
  const std::size_t n = grid.size();
  const std::size_t stride = std::max<std::size_t>(1, n / 7);
  double c = 0;
  for (std::size_t i = 0; i < n; i += stride) c = std::max(c, rep.lhs[i] / rep.rhs[i]);
  c = std::max(c, rep.lhs[n - 1] / rep.rhs[n - 1]);
  rep.factor = factor * c;
  rep.violations = 0;
  rep.worst = 0;
  rep.first_violation.reset();
  std::vector<double> lx, lq;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = rep.lhs[i] / rep.rhs[i];
    rep.worst = std::max(rep.worst, q / c);
    lx.push_back(std::log(grid[i]));
    lq.push_back(std::log(q));
    if (!(q > 0) || !(rep.lhs[i] <= rep.factor * rep.rhs[i])) {
      ++rep.violations;
      if (!rep.first_violation) rep.first_violation = grid[i];
    }
  }
  // growth of the ratio toward either end of the grid
  const std::size_t m = std::max<std::size_t>(2, n / 4);
  const double lo_slope = lsq_slope({lx.begin(), lx.begin() + m}, {lq.begin(), lq.begin() + m});
  const double hi_slope = lsq_slope({lx.end() - m, lx.end()}, {lq.end() - m, lq.end()});
  rep.passed = rep.violations == 0;
  rep.message = name + ": fitted c " + fmt_double(c) + ", " + std::to_string(rep.violations) +
                " violations beyond " + fmt_double(factor) + "c, end slopes " +
                fmt_double(lo_slope) + " / " + fmt_double(hi_slope);
  if (rep.first_violation) rep.message += "; first violation at " + fmt_double(*rep.first_violation);
  return rep;
}

json BoundReport::to_json() const {
  return {{"name", name},     {"passed", passed},         {"factor", factor},
          {"worst", worst},   {"violations", violations}, {"n_points", grid.size()},
          {"message", message}};
}

std::string BoundReport::to_csv() const {
  CsvWriter w({"x", "lhs", "rhs", "ratio"});
  for (std::size_t i = 0; i < grid.size(); ++i)
    w.row_numbers({grid[i], lhs[i], rhs[i], lhs[i] / rhs[i]});
  return w.str();
}

// --------------------------------------------------------- integrals

namespace {

// int_a^inf f(x) dx (dir = +1) or int_-inf^a f(x) dx (dir = -1), in panels of
// width 16 until a panel adds less than 1e-15 of the total.
template <class F>
double log_line_integral(F&& f, double a, int dir) {
  double total = 0;
  for (int k = 0; k < 60; ++k) {
    const double lo = dir > 0 ? a + 16.0 * k : a - 16.0 * (k + 1);
    const double v = numint::gk(f, lo, lo + 16, 1e-11, 30);
    total += v;
    if (k > 0 && std::fabs(v) <= 1e-15 * std::fabs(total)) return total;
  }
  throw ConvergenceError("integral over a half line did not converge");
}

}  // namespace

double ie1_lhs(const BernsteinSpec& spec, double l) {
  return log_line_integral([&](double x) { return std::sqrt(spec(std::exp(-2 * x))) * std::exp(x); },
                           -std::log(l), -1);
}
double ie1_rhs(const BernsteinSpec& spec, double l) { return std::sqrt(spec(l * l)) / l; }

double ie2_lhs(const BernsteinSpec& spec, double l) {
  const double a = -std::log(l);
  const double inner =
      log_line_integral([&](double x) { return spec(std::exp(-2 * x)) * std::exp(2 * x); }, a, -1);
  const double outer = log_line_integral([&](double x) { return spec(std::exp(-2 * x)); }, a, +1);
  return l * l * inner + outer;
}
double ie2_rhs(const BernsteinSpec& spec, double l) { return spec(l * l); }

double ie3_lhs(const BernsteinSpec& spec, double l) {
  return log_line_integral([&](double x) { return 1 / spec(std::exp(-2 * x)); }, -std::log(l), -1);
}
double ie3_rhs(const BernsteinSpec& spec, double l) { return 1 / spec(l * l); }

// ------------------------------------------------------------- suite

json SuiteConfig::to_json() const {
  return {{"quadrature", quadrature},
          {"monte_carlo", monte_carlo},
          {"r_min", r_min},
          {"r_max", r_max},
          {"points_per_decade", points_per_decade},
          {"band_limit_quadrature", band_limit_quadrature},
          {"band_limit_mc", band_limit_mc},
          {"slope_limit", slope_limit},
          {"bound_factor", bound_factor},
          {"n_exit", n_exit},
          {"n_half_space", n_half_space},
          {"n_bhp", n_bhp},
          {"seed", seed},
          {"inject_wrong_exponent", inject_wrong_exponent},
          {"quadrature_config", cfg.hash()}};
}

bool SuiteBundle::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) {
    return c.status == CheckStatus::passed || c.status == CheckStatus::skipped;
  });
}

std::vector<std::string> SuiteBundle::failed_checks() const {
  std::vector<std::string> out;
  for (const auto& c : checks)
    if (c.status == CheckStatus::failed || c.status == CheckStatus::errored) out.push_back(c.name);
  return out;
}

json SuiteBundle::summary() const {
  json s = json::object();
  for (const auto& c : checks)
    s[c.name] = {{"passed", c.status == CheckStatus::passed},
                 {"status", to_string(c.status)},
                 {"ratio_min", c.ratio_min},
                 {"ratio_max", c.ratio_max},
                 {"n_points", c.n_points},
                 {"message", c.message}};
  return s;
}

void SuiteBundle::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& c : checks)
    if (!c.csv.empty()) write_file_atomic(dir / (c.name + ".csv"), c.csv);
  write_file_atomic(dir / "summary.json", summary().dump(2) + "\n");
  json b{{"spec", spec},
         {"d", d},
         {"config", config},
         {"passed", passed()},
         {"failed", failed_checks()},
         {"checks", json::array()}};
  for (const auto& c : checks)
    b["checks"].push_back({{"name", c.name}, {"stage", c.stage}, {"status", to_string(c.status)},
                           {"details", c.details}});
  write_file_atomic(dir / "bundle.json", b.dump(2) + "\n");
}

namespace {

struct CheckDef {
  std::string name, stage;
  std::vector<std::string> requires_;  // checks that must have passed
  bool needs_certificate = false;
  bool monte_carlo = false;
};

const std::vector<CheckDef>& check_defs() {
  static const std::vector<CheckDef> defs = {
      {"bernstein_sanity", "sanity", {}},
      {"derivative_bound", "sanity", {"bernstein_sanity"}},
      {"certification", "certification", {"bernstein_sanity"}},
      {"mu_upper_bound", "density_bounds", {"bernstein_sanity"}},
      {"u_upper_bound", "density_bounds", {"bernstein_sanity"}},
      {"tail_upper_bound", "density_bounds", {"bernstein_sanity"}},
      {"mu_lower_bound", "density_bounds", {"mu_upper_bound"}, true},
      {"u_lower_bound", "density_bounds", {"u_upper_bound"}, true},
      {"integral_ie1", "integrals", {"bernstein_sanity"}, true},
      {"integral_ie2", "integrals", {"bernstein_sanity"}, true},
      {"integral_ie3", "integrals", {"bernstein_sanity"}, true},
      {"j_comparability", "kernels", {"mu_upper_bound"}, true},
      {"g_comparability", "kernels", {"u_upper_bound"}, true},
      {"renewal_comparability", "renewal", {"bernstein_sanity"}, true},
      {"mc_exit_time", "monte_carlo", {"j_comparability"}, true, true},
      {"mc_exit_density", "monte_carlo", {"j_comparability"}, true, true},
      {"mc_survival", "monte_carlo", {"renewal_comparability"}, true, true},
      {"mc_half_space_hk", "monte_carlo", {"renewal_comparability"}, true, true},
      {"mc_bhp", "monte_carlo", {"renewal_comparability"}, true, true},
  };
  return defs;
}

CheckResult from(const ComparabilityReport& r) {
  CheckResult c;
  c.status = r.passed ? CheckStatus::passed : CheckStatus::failed;
  c.message = r.message;
  c.ratio_min = r.ratio_min;
  c.ratio_max = r.ratio_max;
  c.n_points = r.grid.size();
  c.details = r.to_json();
  c.csv = r.to_csv();
  return c;
}

CheckResult from(const BoundReport& r) {
  CheckResult c;
  c.status = r.passed ? CheckStatus::passed : CheckStatus::failed;
  c.message = r.message;
  c.n_points = r.grid.size();
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    lo = std::min(lo, r.lhs[i] / r.rhs[i]);
    hi = std::max(hi, r.lhs[i] / r.rhs[i]);
  }
  c.ratio_min = std::isfinite(lo) ? lo : 0;
  c.ratio_max = hi;
  c.details = r.to_json();
  c.csv = r.to_csv();
  return c;
}

class SuiteRunner {
 public:
  SuiteRunner(const BernsteinSpec& spec, int d, const SuiteConfig& cfg)
      : spec_(spec), d_(d), cfg_(cfg), workers_(resolve_workers(cfg.workers)) {}

  CheckResult run(const std::string& name) {
    if (name == "bernstein_sanity") return sanity();
    if (name == "derivative_bound")
      return from(bound_sweep(
          name, [&](double l) { return l * eval_phi_prime(spec_, l, cfg_.cfg); },
          [&](double l) { return spec_(l); }, log_grid(1e-6, 1e6, cfg_.points_per_decade),
          cfg_.bound_factor, workers_));
    if (name == "certification") return certification();
    if (name == "mu_upper_bound")
      return from(bound_sweep(
          name, [&](double t) { return levy_density_mu(spec_, t, cfg_.cfg).value; },
          [&](double t) { return mu_upper_bound(spec_, t); }, t_grid(), cfg_.bound_factor, workers_));
    if (name == "u_upper_bound")
      return from(bound_sweep(
          name, [&](double t) { return potential_density_u(spec_, t, cfg_.cfg).value; },
          [&](double t) { return u_upper_bound(spec_, t); }, t_grid(), cfg_.bound_factor, workers_));
    if (name == "tail_upper_bound")
      return from(bound_sweep(
          name, [&](double t) { return levy_tail(spec_, t, cfg_.cfg).value; },
          [&](double t) { return tail_upper_bound(spec_, t); }, t_grid(), cfg_.bound_factor, workers_));
    // lower bounds with a fitted constant: estimate <= C value
    if (name == "mu_lower_bound")
      return from(fitted_bound_sweep(
          name, [&](double t) { return spec_(1 / t) / t; },
          [&](double t) { return levy_density_mu(spec_, t, cfg_.cfg).value; }, t_grid(),
          cfg_.bound_factor, workers_));
    if (name == "u_lower_bound")
      return from(fitted_bound_sweep(
          name, [&](double t) { return 1 / (t * spec_(1 / t)); },
          [&](double t) { return potential_density_u(spec_, t, cfg_.cfg).value; }, t_grid(),
          cfg_.bound_factor, workers_));
    if (name == "integral_ie1")
      return from(fitted_bound_sweep(
          name, [&](double l) { return ie1_lhs(spec_, l); }, [&](double l) { return ie1_rhs(spec_, l); },
          t_grid(), cfg_.bound_factor, workers_));
    if (name == "integral_ie2")
      return from(fitted_bound_sweep(
          name, [&](double l) { return ie2_lhs(spec_, l); }, [&](double l) { return ie2_rhs(spec_, l); },
          t_grid(), cfg_.bound_factor, workers_));
    if (name == "integral_ie3")
      return from(fitted_bound_sweep(
          name, [&](double l) { return ie3_lhs(spec_, l); }, [&](double l) { return ie3_rhs(spec_, l); },
          t_grid(), cfg_.bound_factor, workers_));
    if (name == "j_comparability") return j_sweep();
    if (name == "g_comparability") return g_sweep();
    if (name == "renewal_comparability") return renewal_sweep();
    if (name == "mc_exit_time") return mc_exit_time();
    if (name == "mc_exit_density") return mc_exit_density();
    if (name == "mc_survival") return mc_survival();
    if (name == "mc_half_space_hk") return mc_half_space_hk();
    if (name == "mc_bhp") return mc_bhp();
    throw DomainError("unknown check " + name);
  }

  std::optional<ScalingCertificate> cert;

 private:
  std::vector<double> t_grid() const {
    return log_grid(cfg_.r_min, cfg_.r_max, cfg_.points_per_decade);
  }
  SweepOptions quad_opt() const {
    SweepOptions o;
    o.band_limit = cfg_.band_limit_quadrature;
    o.slope_limit = cfg_.slope_limit;
    o.workers = workers_;
    return o;
  }
  SweepOptions mc_opt() const {
    SweepOptions o;
    o.band_limit = cfg_.band_limit_mc;
    o.slope_limit = 0;  // one-sided comparators and boundary effects; band only
    o.provenance = Provenance::monte_carlo;
    o.workers = 1;
    return o;
  }
  McConfig mc(std::uint32_t substream) const {
    McConfig m;
    m.seed = cfg_.seed;
    m.substream = substream;
    m.workers = cfg_.workers;
    return m;
  }
  SubordinatorSampler& sampler() {
    if (!sampler_) {
      SamplerOptions o;
      o.cfg = cfg_.cfg;
      sampler_ = SubordinatorSampler::make(spec_, o);
    }
    return *sampler_;
  }

  CheckResult sanity() {
    const auto g = log_grid(1e-6, 1e6, 2);
    auto rep = check_bernstein_sanity(spec_, g, g, cfg_.cfg);
    CheckResult c;
    c.status = rep.passed ? CheckStatus::passed : CheckStatus::failed;
    c.n_points = rep.points_checked;
    c.details = rep.to_json();
    c.message = rep.passed ? "bernstein_sanity: " + std::to_string(rep.points_checked) + " points"
                           : "bernstein_sanity: " + rep.first_violation->check + " fails at lambda=" +
                                 fmt_double(rep.first_violation->lambda) +
                                 ", t=" + fmt_double(rep.first_violation->t);
    return c;
  }

  CheckResult certification() {
    CheckResult c;
    try {
      cert = certify(spec_);
      c.status = CheckStatus::passed;
      c.details = cert->to_json();
      c.ratio_min = cert->combined_lower();
      c.ratio_max = cert->combined_upper();
      c.n_points = 4;
      c.message = "certification: indices in [" + fmt_double(c.ratio_min) + ", " +
                  fmt_double(c.ratio_max) + "]";
    } catch (const CertificationError& e) {
      c.status = CheckStatus::failed;
      c.message = std::string("certification failed: ") + e.what();
    }
    return c;
  }

  CheckResult j_sweep() {
    std::function<double(double)> est = [&](double r) { return j_estimate(spec_, d_, r); };
    if (cfg_.inject_wrong_exponent)
      est = [&](double r) { return std::pow(r, -d_) * spec_(1 / r); };
    return from(comparability_sweep(
        "j_comparability", [&](double r) { return jump_density_j(spec_, d_, r, cfg_.cfg); }, est,
        t_grid(), quad_opt()));
  }

  CheckResult g_sweep() {
    CheckResult c;
    c.status = CheckStatus::skipped;
    const auto tr = check_transience(spec_, d_);
    if (!tr.transient()) {
      c.message = "g_comparability: skipped, " + to_string(tr.status) + " in d=" +
                  std::to_string(d_) + " (" + tr.reason + ")";
      return c;
    }
    const double top = cert->combined_upper();
    if (!(d_ > 2 * top + 1e-3)) {
      c.message = "g_comparability: skipped, two-sided Green estimate needs d > 2(delta2 v delta4) = " +
                  fmt_double(2 * top);
      return c;
    }
    return from(comparability_sweep(
        "g_comparability", [&](double r) { return green_radial_g(spec_, d_, r, cfg_.cfg); },
        [&](double r) { return g_estimate(spec_, d_, r); }, t_grid(), quad_opt()));
  }

  CheckResult renewal_sweep() {
    const auto tab = renewal_table(spec_, RenewalOptions{}, cfg_.cfg);
    return from(comparability_sweep(
        "renewal_comparability", [&](double r) { return tab(r); },
        [&](double r) { return 1 / std::sqrt(spec_(1 / (r * r))); }, t_grid(), quad_opt()));
  }

  // Lemma-type scaling of the mean exit time: E tau phi(r^-2) over three radii.
  CheckResult mc_exit_time() {
    std::vector<double> radii{0.1, 1, 10};
    std::vector<double> means(radii.size());
    json rows = json::array();
    for (std::size_t i = 0; i < radii.size(); ++i) {
      StepRule st;
      st.dt = default_dt(spec_, radii[i]);
      auto r = mc_exit_ball(spec_, sampler(), d_, Point(d_, 0.0), radii[i], Point(d_, 0.0),
                            cfg_.n_exit, st, mc(static_cast<std::uint32_t>(i)), false);
      means[i] = r.mean_exit_time.value;
      rows.push_back({{"radius", radii[i]}, {"dt", st.dt}, {"estimate", r.mean_exit_time.to_json()}});
    }
    auto rep = comparability_sweep(
        "mc_exit_time",
        [&](double r) { return means[std::find(radii.begin(), radii.end(), r) - radii.begin()]; },
        [&](double r) { return 1 / spec_(1 / (r * r)); }, radii, mc_opt());
    auto c = from(rep);
    c.details["runs"] = rows;
    return c;
  }

  CheckResult mc_exit_density() {
    StepRule st;
    st.dt = default_dt(spec_, 1.0);
    auto rep = mc_exit_density_check(spec_, sampler(), d_, 1.0, cfg_.n_exit, st, mc(8));
    std::vector<double> grid, dens;
    for (const auto& s : rep.shells)
      if (!s.underfilled) {
        grid.push_back(std::sqrt(s.r_lo * s.r_hi));
        dens.push_back(s.ratio_lower);
      }
    CheckResult c;
    if (grid.size() < 3) {
      c.status = CheckStatus::failed;
      c.message = "mc_exit_density: only " + std::to_string(grid.size()) +
                  " shells reach the minimum hit count";
      c.details = rep.to_json();
      return c;
    }
    auto sweep = comparability_sweep(
        "mc_exit_density",
        [&](double r) { return dens[std::find(grid.begin(), grid.end(), r) - grid.begin()]; },
        [](double) { return 1.0; }, grid, mc_opt());
    c = from(sweep);
    c.message += ", c2 " + fmt_double(rep.c2) + ", c1 " + fmt_double(rep.c1) + ", " +
                 std::to_string(rep.underfilled) + " underfilled shells";
    c.details["shells"] = rep.to_json();
    CsvWriter w({"r_lo", "r_hi", "hits", "density", "density_se", "lower_comparator",
                 "upper_comparator", "ratio_lower", "ratio_upper", "underfilled"});
    for (const auto& s : rep.shells)
      w.row({fmt_double(s.r_lo), fmt_double(s.r_hi), std::to_string(s.hits), fmt_double(s.density),
             fmt_double(s.density_se), fmt_double(s.lower_comparator), fmt_double(s.upper_comparator),
             fmt_double(s.ratio_lower), fmt_double(s.ratio_upper), s.underfilled ? "1" : "0"});
    c.csv = w.str();
    return c;
  }

  Point axis_point(double xd) const {
    Point p(d_, 0.0);
    p.back() = xd;
    return p;
  }

  CheckResult mc_survival() {
    const double t = 1, s = capital_phi_inv(spec_, t, cfg_.cfg);
    std::vector<double> xs{0.01 * s, 0.1 * s, s};
    std::vector<double> surv(xs.size());
    StepRule st;
    st.dt = default_dt(spec_, s);
    st.adaptive = true;
    for (std::size_t i = 0; i < xs.size(); ++i)
      surv[i] = mc_survival_half_space(spec_, sampler(), d_, axis_point(xs[i]), t, cfg_.n_half_space,
                                       st, mc(16 + static_cast<std::uint32_t>(i)))
                    .value;
    return from(comparability_sweep(
        "mc_survival",
        [&](double x) { return surv[std::find(xs.begin(), xs.end(), x) - xs.begin()]; },
        [&](double x) { return boundary_factor(spec_, t, x); }, xs, mc_opt()));
  }

  CheckResult mc_half_space_hk() {
    const double t = 1, s = capital_phi_inv(spec_, t, cfg_.cfg);
    const auto edges = log_grid(0.02 * s, 20 * s, 40.0 / 3);
    std::vector<Box> cells;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      Box b{Point(d_, -0.25 * s), Point(d_, 0.25 * s)};
      b.lo.back() = edges[i];
      b.hi.back() = edges[i + 1];
      cells.push_back(b);
    }
    StepRule st;
    st.dt = default_dt(spec_, s);
    st.adaptive = true;
    std::vector<double> starts{0.05 * s, 0.2 * s, s, 5 * s}, survival;
    std::vector<double> grid, ratios;
    CsvWriter w({"x_d", "cell_lo", "cell_hi", "hits", "p_hat", "p_hat_se", "estimate", "ratio", "usable"});
    for (std::size_t k = 0; k < starts.size(); ++k) {
      auto r = mc_half_space_heat_kernel(spec_, sampler(), d_, t, axis_point(starts[k]), cells,
                                         cfg_.n_half_space, st, mc(24 + static_cast<std::uint32_t>(k)));
      survival.push_back(r.survival.value);
      for (const auto& c : r.cells) {
        w.row({fmt_double(starts[k]), fmt_double(c.cell.lo.back()), fmt_double(c.cell.hi.back()),
               std::to_string(c.hits), fmt_double(c.p_hat.value), fmt_double(c.p_hat.std_error),
               fmt_double(c.estimate), fmt_double(c.ratio), c.usable ? "1" : "0"});
        if (c.usable) {
          grid.push_back(static_cast<double>(grid.size() + 1));
          ratios.push_back(c.ratio);
        }
      }
    }
    CheckResult c;
    if (grid.empty()) {
      c.status = CheckStatus::failed;
      c.message = "mc_half_space_hk: no usable cells";
      return c;
    }
    c = from(comparability_sweep(
        "mc_half_space_hk", [&](double i) { return ratios[static_cast<std::size_t>(i) - 1]; },
        [](double) { return 1.0; }, grid, mc_opt()));
    const double rho = spearman_rho(starts, survival);
    c.details["spearman_xd_survival"] = rho;
    c.details["survival"] = survival;
    c.message += ", Spearman(x_d, survival) " + fmt_double(rho);
    if (!(rho > 0.9)) {
      c.status = CheckStatus::failed;
      c.message += " not above 0.9";
    }
    c.csv = w.str();
    return c;
  }

  CheckResult mc_bhp() {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> fracs{0.1, 0.25, 0.45, 0.65, 0.85};
    CsvWriter w({"h", "x_d", "y_d", "double_ratio", "double_ratio_se", "min_hits"});
    std::vector<double> grid, ratios;
    std::size_t degenerate = 0;
    std::uint32_t sub = 32;
    for (double h : {0.01, 1.0, 100.0}) {
      Box window{Point(d_, -h), Point(d_, h)};
      window.lo.back() = 0;
      Box a{Point(d_, -inf), Point(d_, inf)}, b = a;
      a.lo.back() = 1.25 * h;
      a.hi.back() = 2.5 * h;
      b.lo.back() = 2.5 * h;
      StepRule st;
      st.dt = default_dt(spec_, h);
      st.adaptive = true;
      st.resolution = 10;
      std::vector<WindowExit> ex;
      for (double f : fracs)
        ex.push_back(mc_window_exit(spec_, sampler(), d_, window, axis_point(f * h), {a, b},
                                    cfg_.n_bhp, st, mc(sub++)));
      for (std::size_t i = 0; i < ex.size(); ++i)
        for (std::size_t j = i + 1; j < ex.size(); ++j) {
          auto r = harmonic_ratio(spec_, ex[i], ex[j]);
          w.row({fmt_double(h), fmt_double(fracs[i] * h), fmt_double(fracs[j] * h),
                 fmt_double(r.double_ratio->value), fmt_double(r.double_ratio->std_error),
                 std::to_string(r.min_hits)});
          if (r.degenerate) {
            ++degenerate;
            continue;
          }
          grid.push_back(static_cast<double>(grid.size() + 1));
          ratios.push_back(r.double_ratio->value);
        }
    }
    CheckResult c;
    if (grid.empty()) {
      c.status = CheckStatus::failed;
      c.message = "mc_bhp: every pair is degenerate";
      c.csv = w.str();
      return c;
    }
    auto opt = mc_opt();
    opt.ratio_floor = 0.2;
    opt.ratio_ceiling = 5;
    c = from(comparability_sweep(
        "mc_bhp", [&](double i) { return ratios[static_cast<std::size_t>(i) - 1]; },
        [](double) { return 1.0; }, grid, opt));
    c.message += ", " + std::to_string(degenerate) + " degenerate pairs";
    c.details["degenerate_pairs"] = degenerate;
    c.csv = w.str();
    return c;
  }

  BernsteinSpec spec_;
  int d_;
  SuiteConfig cfg_;
  unsigned workers_;
  std::optional<SubordinatorSampler> sampler_;
};

}  // namespace

const std::vector<std::string>& check_manifest() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& d : check_defs()) v.push_back(d.name);
    return v;
  }();
  return names;
}

SuiteBundle run_suite(const BernsteinSpec& spec, int d, const SuiteConfig& cfg) {
  if (d < 1) throw DomainError("dimension d must be >= 1");
  cfg.cfg.validate();
  SuiteBundle bundle;
  bundle.spec = spec.to_json();
  bundle.d = d;
  bundle.config = cfg.to_json();
  SuiteRunner runner(spec, d, cfg);
  std::map<std::string, CheckStatus> status;
  std::set<std::string> blocked_by;
  for (const auto& def : check_defs()) {
    CheckResult c;
    std::string blocked;
    for (const auto& r : def.requires_)
      if (status[r] == CheckStatus::failed || status[r] == CheckStatus::errored || blocked_by.count(r))
        blocked = r;
    const bool cert_ok = status["certification"] == CheckStatus::passed;
    if (def.monte_carlo ? !cfg.monte_carlo : !cfg.quadrature) {
      c.status = CheckStatus::skipped;
      c.message = def.name + ": skipped, " + (def.monte_carlo ? "Monte Carlo" : "quadrature") +
                  " stage not selected";
    } else if (!blocked.empty()) {
      c.status = CheckStatus::skipped;
      c.message = def.name + ": skipped, needs " + blocked + " (" + to_string(status[blocked]) + ")";
      blocked_by.insert(def.name);
    } else if (def.needs_certificate && !cert_ok) {
      c.status = CheckStatus::skipped;
      c.message = def.name + ": skipped, scaling certification did not pass";
    } else {
      try {
        c = runner.run(def.name);
      } catch (const std::exception& e) {
        c.status = CheckStatus::errored;
        c.message = def.name + " errored: " + e.what();
      }
    }
    status[def.name] = c.status;
    c.name = def.name;
    c.stage = def.stage;
    bundle.checks.push_back(std::move(c));
  }
  return bundle;
}

}  // namespace sbm
