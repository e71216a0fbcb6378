#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracle.hpp"
#include "sbm/errors.hpp"
#include "sbm/kernels.hpp"
#include "sbm/verify.hpp"
#include "support.hpp"

using namespace sbm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

SuiteConfig quadrature_only() {
  SuiteConfig c;
  c.monte_carlo = false;
  c.workers = 1;
  return c;
}

const CheckResult& find(const SuiteBundle& b, const std::string& name) {
  for (const auto& c : b.checks)
    if (c.name == name) return c;
  throw std::runtime_error("no check " + name);
}

}  // namespace

TEST_SUITE("verify") {

TEST_CASE("identity sweep") {
  const auto g = log_grid(1e-3, 1e3, 8);
  auto f = [](double r) { return std::exp(std::sin(r)); };
  const auto r = comparability_sweep("id", f, f, g);
  CHECK(r.passed);
  CHECK(r.band == 1);
  CHECK(r.slope == 0);
  CHECK(r.grid.size() == g.size());
}

TEST_CASE("stable jump kernel sits in a flat band") {
  const auto s = BernsteinSpec::pure_power(1);
  for (int d : {1, 3}) {
    const auto r = comparability_sweep(
        "j", [&](double x) { return jump_density_j(s, d, x); },
        [&](double x) { return j_estimate(s, d, x); }, log_grid(1e-3, 1e3, 8));
    CHECK(r.passed);
    CHECK(r.band <= 1.01);
    CHECK(r.ratio_min == doctest::Approx(oracle::stable_jump_constant(d, 1)).epsilon(1e-5));
  }
}

TEST_CASE("drift and band failures") {
  const auto s = BernsteinSpec::pure_power(1);
  const auto g = log_grid(1e-3, 1e3, 8);
  // j against the Green estimate: wrong power of r
  const auto bad = comparability_sweep(
      "j_vs_g", [&](double x) { return jump_density_j(s, 3, x); },
      [&](double x) { return g_estimate(s, 3, x); }, g);
  CHECK_FALSE(bad.passed);
  CHECK(bad.band > 1e5);

  // a slow drift inside the band is still caught
  SweepOptions opt;
  const auto drift = comparability_sweep(
      "drift", [](double x) { return std::pow(x, 0.1); }, [](double) { return 1.0; }, g, opt);
  CHECK(drift.band < opt.band_limit);
  CHECK(drift.slope == doctest::Approx(0.1).epsilon(1e-9));
  CHECK_FALSE(drift.passed);
  opt.slope_limit = 0;
  CHECK(comparability_sweep("drift", [](double x) { return std::pow(x, 0.1); },
                            [](double) { return 1.0; }, g, opt)
            .passed);

  // a point that throws is reported, not swallowed
  const auto err = comparability_sweep(
      "err",
      [](double x) {
        if (x > 100) throw DomainError("too far");
        return 1.0;
      },
      [](double) { return 1.0; }, g);
  CHECK_FALSE(err.passed);
  CHECK(std::count_if(err.errors.begin(), err.errors.end(), [](auto& e) { return !e.empty(); }) > 0);
}

TEST_CASE("bound sweeps") {
  const auto g = log_grid(1e-2, 1e2, 8);
  const auto ok = bound_sweep("b", [](double x) { return x; }, [](double x) { return x; }, g, 1.05);
  CHECK(ok.passed);
  CHECK(ok.worst == doctest::Approx(1));
  const auto bad =
      bound_sweep("b", [](double x) { return x * x; }, [](double x) { return x; }, g, 1.05);
  CHECK_FALSE(bad.passed);
  REQUIRE(bad.first_violation);
  CHECK(*bad.first_violation > 1);
  CHECK(*bad.first_violation < 1.5);

  const auto fit = fitted_bound_sweep(
      "f", [](double x) { return 3 * x * (1 + 0.01 * std::sin(std::log(x))); },
      [](double x) { return x; }, g, 1.05);
  CHECK(fit.passed);
  // a spike at g[1], between the fitting points
  const auto grow = fitted_bound_sweep(
      "f", [&](double x) { return x == g[1] ? 10 * x : x; }, [](double x) { return x; }, g, 1.05);
  CHECK(grow.violations == 1);
  CHECK(*grow.first_violation == g[1]);
  CHECK_FALSE(grow.passed);
}

TEST_CASE("integral estimates for the Cauchy case") {
  const auto s = BernsteinSpec::pure_power(1);
  for (double l : {1e-2, 1.0, 1e2}) {
    // int_0^{1/l} r^{-1/2} dr = 2 l^{-1/2}
    CHECK(ie1_lhs(s, l) == doctest::Approx(2 / std::sqrt(l)).epsilon(1e-7));
    CHECK(ie1_rhs(s, l) == doctest::Approx(1 / std::sqrt(l)).epsilon(1e-12));
    CHECK(ie3_lhs(s, l) == doctest::Approx(1 / l).epsilon(1e-7));
    CHECK(ie3_rhs(s, l) == doctest::Approx(1 / l).epsilon(1e-12));
    CHECK(ie2_rhs(s, l) == doctest::Approx(l).epsilon(1e-12));
    CHECK(ie2_lhs(s, l) > 0);
  }
}

TEST_CASE("quadrature suite on the Cauchy case") {
  const auto b = run_suite(BernsteinSpec::pure_power(1), 3, quadrature_only());
  CHECK(b.passed());
  CHECK(b.failed_checks().empty());
  REQUIRE(b.checks.size() == check_manifest().size());
  for (std::size_t i = 0; i < b.checks.size(); ++i) {
    CHECK(b.checks[i].name == check_manifest()[i]);
    const bool mc = b.checks[i].stage == "monte_carlo";
    CHECK(b.checks[i].status == (mc ? CheckStatus::skipped : CheckStatus::passed));
  }
  const auto& j = find(b, "j_comparability");
  CHECK(j.ratio_max / j.ratio_min <= 1.01);
  const auto sum = b.summary();
  for (const auto& n : check_manifest()) CHECK(sum.contains(n));
}

TEST_CASE("negative control fails the jump kernel check") {
  auto cfg = quadrature_only();
  cfg.inject_wrong_exponent = true;
  const auto b = run_suite(BernsteinSpec::pure_power(1), 3, cfg);
  CHECK_FALSE(b.passed());
  const auto f = b.failed_checks();
  CHECK(std::find(f.begin(), f.end(), "j_comparability") != f.end());
}

TEST_CASE("log1p is rejected") {
  const auto l = BernsteinSpec::from_json({{"family", "custom"}, {"evaluator", "log1p"}});
  const auto b = run_suite(l, 3, quadrature_only());
  CHECK_FALSE(b.passed());
  const auto f = b.failed_checks();
  CHECK(std::find(f.begin(), f.end(), "certification") != f.end());
  CHECK(find(b, "certification").message.find("at_infinity") != std::string::npos);
  // checks that need a certificate are skipped with a reason
  const auto& g = find(b, "g_comparability");
  CHECK(g.status == CheckStatus::skipped);
  CHECK_FALSE(g.message.empty());
}

TEST_CASE("bundles are byte-identical across runs") {
  const auto tmp = fs::temp_directory_path() / "sbm_verify_test";
  fs::remove_all(tmp);
  auto cfg = quadrature_only();
  cfg.r_min = 1e-2;
  cfg.r_max = 1e2;
  const auto s = BernsteinSpec::sum_of_powers(0.3, 0.7);
  run_suite(s, 3, cfg).write(tmp / "a");
  cfg.workers = 3;
  run_suite(s, 3, cfg).write(tmp / "b");
  for (const char* f : {"summary.json", "j_comparability.csv", "renewal_comparability.csv"})
    CHECK(slurp(tmp / "a" / f) == slurp(tmp / "b" / f));
  CHECK_FALSE(slurp(tmp / "a" / "summary.json").empty());
  fs::remove_all(tmp);
}

}  // TEST_SUITE
