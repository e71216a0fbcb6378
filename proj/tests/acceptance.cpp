// Acceptance run: one PASS/FAIL line per criterion on stdout, details on
// stderr. Exit status is nonzero when any criterion not listed in
// --expect-red fails.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include "oracle.hpp"
#include "sbm/errors.hpp"
#include "sbm/kernels.hpp"
#include "sbm/laplace.hpp"
#include "sbm/renewal.hpp"
#include "sbm/simulate.hpp"
#include "sbm/verify.hpp"
#include "support.hpp"

using namespace sbm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

void note(const std::string& line) { std::cerr << "    " << line << "\n"; }

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

struct Run {
  std::string cli;
  unsigned workers = 0;
  fs::path scratch;
};

std::vector<BernsteinSpec> six() { return six_families(); }

// -------------------------------------------------------------- 1 to 3

Outcome laplace_oracle(const Run&) {
  const auto s = BernsteinSpec::pure_power(1);
  double worst_mu = 0, worst_u = 0;
  for (double t : log_grid(1e-3, 1e3, 64)) {
    worst_mu = std::max(worst_mu, rel_err(levy_density_mu(s, t).value,
                                          std::pow(t, -1.5) / (2 * std::sqrt(oracle::pi))));
    worst_u = std::max(worst_u, rel_err(potential_density_u(s, t).value,
                                        std::pow(t, -0.5) / std::sqrt(oracle::pi)));
  }
  return {worst_mu <= 1e-6 && worst_u <= 1e-6,
          "max rel err mu " + fmt(worst_mu) + ", u " + fmt(worst_u) + " (limit 1e-6)"};
}

Outcome kernel_oracle(const Run&) {
  const auto s = BernsteinSpec::pure_power(1);
  double wj = 0, wg = 0, wp = 0;
  for (int d : {1, 2, 3})
    for (double r : log_grid(1e-3, 1e3, 8))
      wj = std::max(wj, rel_err(jump_density_j(s, d, r), oracle::stable_j(d, 1, r)));
  for (double r : log_grid(1e-3, 1e3, 8))
    wg = std::max(wg, rel_err(green_radial_g(s, 3, r), 1 / (2 * oracle::pi * oracle::pi * r * r)));
  for (double t : {0.1, 1.0, 10.0}) {
    const double sc = capital_phi_inv(s, t);
    for (int k = 0; k <= 80; ++k) {
      const double r = 0.25 * k * sc;
      wp = std::max(wp, rel_err(free_heat_kernel(s, 1, t, r).value, oracle::cauchy(t, r)));
    }
  }
  return {wj <= 1e-6 && wg <= 1e-5 && wp <= 1e-6,
          "max rel err j " + fmt(wj) + ", g " + fmt(wg) + ", p " + fmt(wp)};
}

Outcome fristedt_oracle(const Run&) {
  double wc = 0;
  for (double a : {0.5, 1.0, 1.5}) {
    const auto s = BernsteinSpec::pure_power(a);
    for (double l : log_grid(1e-4, 1e4, 16))
      wc = std::max(wc, rel_err(ladder_exponent_chi(s, l), std::pow(l, a / 2)));
  }
  RenewalOptions opt;
  opt.use_cache = false;
  const auto tab = renewal_table(BernsteinSpec::pure_power(1), opt);
  double wv = 0;
  for (double r : log_grid(1e-6, 1e6, 16))
    wv = std::max(wv, rel_err(tab(r), 2 * std::sqrt(r / oracle::pi)));
  return {wc <= 1e-8 && wv <= 1e-6, "max rel err chi " + fmt(wc) + ", V " + fmt(wv)};
}

// -------------------------------------------------------------- 4 and 5

struct SuiteCache {
  std::vector<SuiteBundle> d1;
  double seconds = 0;
};

SuiteCache& suites(const Run& run) {
  static SuiteCache c;
  if (c.d1.empty()) {
    const auto t0 = std::chrono::steady_clock::now();
    SuiteConfig cfg;
    cfg.monte_carlo = false;
    cfg.workers = run.workers;
    for (const auto& s : six()) c.d1.push_back(run_suite(s, 1, cfg));
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return c;
}

const CheckResult& check(const SuiteBundle& b, const std::string& name) {
  for (const auto& c : b.checks)
    if (c.name == name) return c;
  throw Error("no check " + name);
}

Outcome bound_suite(const Run& run) {
  const std::vector<std::string> names{"bernstein_sanity", "derivative_bound", "mu_upper_bound",
                                       "u_upper_bound",    "tail_upper_bound", "mu_lower_bound",
                                       "u_lower_bound",    "integral_ie1",     "integral_ie2",
                                       "integral_ie3"};
  auto& c = suites(run);
  std::size_t bad = 0, total = 0;
  for (const auto& b : c.d1)
    for (const auto& n : names) {
      const auto& r = check(b, n);
      ++total;
      if (r.status != CheckStatus::passed) {
        ++bad;
        note(b.spec.dump() + " " + n + ": " + r.message);
      }
    }
  return {bad == 0, std::to_string(total - bad) + "/" + std::to_string(total) +
                        " bound checks pass over six families, quadrature suite " + fmt(c.seconds) + " s"};
}

Outcome comparability_bands(const Run& run) {
  auto& c = suites(run);
  bool ok = true;
  double worst = 0;
  for (const auto& b : c.d1)
    for (const char* n : {"j_comparability", "renewal_comparability"}) {
      const auto& r = check(b, n);
      const double slope = r.details.value("slope", 0.0);
      worst = std::max(worst, std::fabs(slope));
      note(b.spec.dump() + " " + n + ": band " + fmt(r.ratio_max / r.ratio_min) + ", slope " +
           fmt(slope));
      ok = ok && r.status == CheckStatus::passed;
    }
  SuiteConfig cfg;
  cfg.monte_carlo = false;
  cfg.workers = run.workers;
  const auto b2 = run_suite(BernsteinSpec::sum_of_powers(0.3, 0.7), 2, cfg);
  const auto& g = check(b2, "g_comparability");
  const double gs = g.details.value("slope", 0.0);
  note("sum_of_powers d=2 g_comparability: band " + fmt(g.ratio_max / g.ratio_min) + ", slope " +
       fmt(gs) + ", " + to_string(g.status));
  const bool g_ok = g.status == CheckStatus::passed;
  return {ok && g_ok, "j and V max |slope| " + fmt(worst) + (ok ? " (pass)" : " (FAIL)") +
                          "; g band " + fmt(g.ratio_max / g.ratio_min) + ", slope " + fmt(gs) +
                          (g_ok ? " (pass)" : " (exceeds 0.05)")};
}

// -------------------------------------------------------------- 6 to 8

McConfig mc(const Run& run, std::uint32_t sub) {
  McConfig m;
  m.seed = 2024;
  m.substream = sub;
  m.workers = run.workers;
  return m;
}

ExitBallResult exit_oracle_run(const Run& run, unsigned workers) {
  const auto s = BernsteinSpec::pure_power(1);
  StepRule st;
  st.dt = 0.02;
  auto m = mc(run, 1);
  m.workers = workers;
  return mc_exit_ball(s, SubordinatorSampler::make(s), 1, {0.0}, 1, {0.0}, 100000, st, m);
}

Outcome mc_exit(const Run& run) {
  const auto r = exit_oracle_run(run, run.workers);
  const auto& m = r.mean_exit_time;
  const double tol = std::max(3 * m.std_error, 0.05);
  const double shrink = m.bias_note->shrink;
  return {std::fabs(m.value - 1) <= tol && shrink >= 1.5,
          "mean " + fmt(m.value) + " +- " + fmt(m.std_error) + " (tolerance " + fmt(tol) +
              "), bias shrink " + fmt(shrink) + ", extrapolated " + fmt(m.bias_note->extrapolated)};
}

Outcome mc_half_space(const Run& run) {
  const auto s = BernsteinSpec::pure_power(1);
  const auto smp = SubordinatorSampler::make(s);
  const double t = 1, sc = capital_phi_inv(s, t);
  const auto edges = log_grid(0.02 * sc, 20 * sc, 40.0 / 3);
  std::vector<Box> cells;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) cells.push_back({{edges[i]}, {edges[i + 1]}});
  StepRule st;
  st.dt = default_dt(s, sc);
  st.adaptive = true;
  const std::vector<double> xs{0.05, 0.2, 1, 5};
  std::vector<double> surv;
  double lo = INFINITY, hi = 0;
  std::size_t usable = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto r = mc_half_space_heat_kernel(s, smp, 1, t, {xs[k]}, cells, 1000000, st,
                                             mc(run, 10 + static_cast<std::uint32_t>(k)));
    surv.push_back(r.survival.value);
    for (const auto& c : r.cells)
      if (c.usable) {
        ++usable;
        lo = std::min(lo, c.ratio);
        hi = std::max(hi, c.ratio);
      }
    note("x_d=" + fmt(xs[k]) + " survival " + fmt(r.survival.value));
  }
  const double rho = spearman_rho(xs, surv);
  const double band = usable ? hi / lo : INFINITY;
  return {cells.size() == 40 && usable > 0 && band <= 1e3 && rho > 0.9,
          std::to_string(usable) + " usable cells of " + std::to_string(4 * cells.size()) +
              ", ratio band " + fmt(band) + " (limit 1e3), Spearman " + fmt(rho)};
}

Outcome mc_bhp(const Run& run) {
  // stable, single ratio against (x/y)^{1/2}
  const auto s = BernsteinSpec::pure_power(1);
  Box window{{0.0}, {1.0}}, target{{1.0}, {INFINITY}};
  StepRule st;
  st.dt = default_dt(s, 1);
  st.adaptive = true;
  st.resolution = 10;
  const auto r = mc_harmonic_ratio_bhp(s, SubordinatorSampler::make(s), 1, window, {1e-3}, {4e-3},
                                       target, std::nullopt, 1000000, st, mc(run, 20));
  const double z = (r.single_ratio.value - r.comparator) / r.single_ratio.std_error;
  const bool stable_ok = std::fabs(z) <= 3;
  note("stable u(x)/u(y) " + fmt(r.single_ratio.value) + " +- " + fmt(r.single_ratio.std_error) +
       " vs " + fmt(r.comparator));

  // sum_of_powers double ratio, 3 geometries x 10 pairs
  const auto p = BernsteinSpec::sum_of_powers(0.3, 0.7);
  const auto smp = SubordinatorSampler::make(p);
  const std::vector<double> fracs{0.1, 0.25, 0.45, 0.65, 0.85};
  double lo = INFINITY, hi = 0;
  std::size_t pairs = 0, degenerate = 0;
  std::uint32_t sub = 30;
  for (double h : {0.01, 1.0, 100.0}) {
    Box w{{0.0}, {h}}, a{{1.25 * h}, {2.5 * h}}, b{{2.5 * h}, {INFINITY}};
    StepRule sp;
    sp.dt = default_dt(p, h);
    sp.adaptive = true;
    sp.resolution = 10;
    std::vector<WindowExit> ex;
    for (double f : fracs) ex.push_back(mc_window_exit(p, smp, 1, w, {f * h}, {a, b}, 40000, sp, mc(run, sub++)));
    for (std::size_t i = 0; i < ex.size(); ++i)
      for (std::size_t j = i + 1; j < ex.size(); ++j) {
        const auto hr = harmonic_ratio(p, ex[i], ex[j]);
        ++pairs;
        if (hr.degenerate) {
          ++degenerate;
          continue;
        }
        lo = std::min(lo, hr.double_ratio->value);
        hi = std::max(hi, hr.double_ratio->value);
      }
  }
  const bool mix_ok = degenerate == 0 && lo >= 0.2 && hi <= 5;
  return {stable_ok && mix_ok,
          "stable ratio " + fmt(r.single_ratio.value) + " vs " + fmt(r.comparator) + " (" +
              fmt(z) + " s.e.); sum_of_powers double ratios in [" + fmt(lo) + ", " + fmt(hi) +
              "] over " + std::to_string(pairs - degenerate) + "/" + std::to_string(pairs) + " pairs"};
}

// -------------------------------------------------------------- 9 and 10

std::pair<int, std::string> shell(const std::string& cmd) {
  std::string out;
  FILE* f = popen((cmd + " 2>&1").c_str(), "r");
  if (!f) return {-1, ""};
  char buf[4096];
  while (std::size_t k = std::fread(buf, 1, sizeof buf, f)) out.append(buf, k);
  const int st = pclose(f);
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome determinism(const Run& run) {
  const std::string a = exit_oracle_run(run, 1).to_json().dump();
  const std::string b = exit_oracle_run(run, 4).to_json().dump();
  bool cli_ok = true;
  if (!run.cli.empty()) {
    for (const char* w : {"1", "3"}) {
      const auto dir = run.scratch / (std::string("w") + w);
      fs::remove_all(dir);
      const auto [rc, out] = shell(run.cli + " --seed 5 --workers " + w + " --output-dir " +
                                   dir.string() + " simulate survival --n 20000");
      if (rc != 0) {
        note("cli run failed: " + out);
        cli_ok = false;
      }
    }
    for (const char* f : {"survival.json", "survival.csv"})
      cli_ok = cli_ok && slurp(run.scratch / "w1" / f) == slurp(run.scratch / "w3" / f) &&
               !slurp(run.scratch / "w1" / f).empty();
  }
  return {a == b && cli_ok, std::string("exit-time JSON ") + (a == b ? "identical" : "differs") +
                                " for 1 and 4 workers; CLI survival outputs " +
                                (run.cli.empty() ? "not run" : cli_ok ? "identical" : "differ")};
}

Outcome negative_controls(const Run& run) {
  SuiteConfig cfg;
  cfg.monte_carlo = false;
  cfg.workers = run.workers;
  cfg.inject_wrong_exponent = true;
  const auto wrong = run_suite(BernsteinSpec::pure_power(1), 3, cfg);
  cfg.inject_wrong_exponent = false;
  const auto l1p = run_suite(BernsteinSpec::from_json({{"family", "custom"}, {"evaluator", "log1p"}}), 3, cfg);
  auto names = [](const SuiteBundle& b) {
    std::string s;
    for (const auto& n : b.failed_checks()) s += (s.empty() ? "" : ",") + n;
    return s;
  };
  bool ok = !wrong.passed() && names(wrong).find("j_comparability") != std::string::npos &&
            !l1p.passed() && names(l1p).find("certification") != std::string::npos;
  std::string cli = "CLI not run";
  if (!run.cli.empty()) {
    const auto [rc1, o1] = shell(run.cli + " --d 3 verify --stage quadrature --negative-control");
    const auto [rc2, o2] =
        shell(run.cli + " --family custom --param evaluator=log1p --d 3 verify --stage quadrature");
    const bool c_ok = rc1 == 1 && o1.find("j_comparability") != std::string::npos && rc2 == 1 &&
                      o2.find("certification") != std::string::npos;
    cli = "CLI exits " + std::to_string(rc1) + " and " + std::to_string(rc2);
    ok = ok && c_ok;
  }
  return {ok, "wrong exponent fails [" + names(wrong) + "]; log1p fails [" + names(l1p) + "]; " + cli};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-10"};
  Run run;
  std::set<int> only, red;
  app.add_option("--cli", run.cli, "Path of the sbm executable, for the CLI parts of 9 and 10");
  app.add_option("--workers", run.workers, "Worker threads (0: available parallelism)");
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--expect-red", red, "Criteria known to fail; reported but not fatal");
  CLI11_PARSE(app, argc, argv);
  run.scratch = fs::temp_directory_path() / "sbm_acceptance";
  fs::create_directories(run.scratch);

  struct Criterion {
    int id;
    const char* title;
    double budget_s;
    std::function<Outcome(const Run&)> fn;
  };
  const std::vector<Criterion> all{
      {1, "stable Laplace-layer oracle", 10, laplace_oracle},
      {2, "stable kernel oracle", 60, kernel_oracle},
      {3, "Fristedt and renewal oracle", 10, fristedt_oracle},
      {4, "bound suite, six families", 300, bound_suite},
      {5, "comparability bands", 600, comparability_bands},
      {6, "MC exit-time oracle", 300, mc_exit},
      {7, "MC half-space heat kernel", 1200, mc_half_space},
      {8, "BHP decay", 1200, mc_bhp},
      {9, "determinism", 600, determinism},
      {10, "negative controls", 600, negative_controls},
  };
  int fatal = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::cerr << "criterion " << c.id << ": running\n";
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn(run);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = s <= c.budget_s;
    const bool pass = o.pass && in_time;
    std::cout << "criterion " << c.id << " [" << c.title << "]: " << (pass ? "PASS" : "FAIL") << " - "
              << o.detail << "; " << fmt(s) << " s (budget " << fmt(c.budget_s) << " s"
              << (in_time ? "" : ", exceeded") << ")" << (red.count(c.id) ? " [expected red]" : "")
              << std::endl;
    if (!pass && !red.count(c.id)) ++fatal;
    if (pass && red.count(c.id)) std::cout << "criterion " << c.id << " passed but was listed in --expect-red" << std::endl;
  }
  fs::remove_all(run.scratch);
  return fatal ? 1 : 0;
}
