#include <doctest.h>

#include <quadmath.h>

#include "oracle.hpp"
#include "sbm/errors.hpp"
#include "sbm/laplace.hpp"
#include "support.hpp"

using namespace sbm;

namespace {

CmFunctionHandle power_transform(double p) {  // l^{-p}
  return {"l^-p", [p](double l) { return std::pow(l, -p); },
          [p](cplx l) { return std::pow(l, -p); },
          [p](quad l) { return powq(l, quad(-p)); }};
}

}  // namespace

TEST_SUITE("laplace") {

TEST_CASE("elementary pairs") {
  for (auto m : {InversionMethod::talbot, InversionMethod::gaver_stehfest}) {
    QuadratureConfig cfg;
    cfg.inversion_method = m;
    CHECK(rel_err(invert_cm(power_transform(1), 3.7, cfg), 1.0) < 1e-8);
    CmFunctionHandle shifted{"1/(l+1)", [](double l) { return 1 / (l + 1); },
                             [](cplx l) { return 1.0 / (l + 1.0); },
                             [](quad l) { return 1 / (l + 1); }};
    CHECK(rel_err(invert_cm(shifted, 2, cfg), std::exp(-2.0)) < 1e-8);
    CHECK(rel_err(invert_cm(power_transform(0.5), 1, cfg), 1 / std::sqrt(oracle::pi)) < 1e-8);
  }
}

TEST_CASE("stable densities") {
  const auto s = BernsteinSpec::pure_power(1);
  for (double t : log_grid(1e-3, 1e3, 16)) {
    CHECK(rel_err(levy_density_mu(s, t).value, oracle::stable_mu(0.5, t)) < 1e-6);
    CHECK(rel_err(potential_density_u(s, t).value, oracle::stable_u(0.5, t)) < 1e-6);
    CHECK(rel_err(levy_tail(s, t).value, oracle::stable_tail(0.5, t)) < 1e-6);
  }
  CHECK(levy_density_mu(s, 1).value == doctest::Approx(0.2820948).epsilon(1e-6));
  CHECK(potential_density_u(s, 4).value == doctest::Approx(0.2820948).epsilon(1e-6));
  CHECK(levy_tail(s, 1).value == doctest::Approx(0.5641896).epsilon(1e-6));
}

TEST_CASE("sum of powers is a mixture of two stable densities") {
  const auto s = BernsteinSpec::sum_of_powers(0.3, 0.7);
  for (double t : {1e-2, 1.0, 50.0}) {
    const double want = 0.5 * (oracle::stable_mu(0.3, t) + oracle::stable_mu(0.7, t));
    CHECK(rel_err(levy_density_mu(s, t).value, want) < 1e-7);
  }
}

TEST_CASE("upper bounds at t = 1 and on a grid") {
  for (const auto& s : six_families()) {
    CHECK(levy_density_mu(s, 1).value <= 1 / (1 - 2 / std::exp(1.0)));
    CHECK(potential_density_u(s, 1).value <= 1 / (1 - 1 / std::exp(1.0)));
    for (double t : log_grid(1e-3, 1e3, 4)) {
      CHECK_FALSE(levy_density_mu(s, t).bound_violated);
      CHECK_FALSE(potential_density_u(s, t).bound_violated);
      CHECK_FALSE(levy_tail(s, t).bound_violated);
      CHECK(levy_tail(s, t).value <= 1.05 * tail_upper_bound(s, t));
    }
  }
}

TEST_CASE("positive and decreasing") {
  for (const auto& s : six_families()) {
    double pm = INFINITY, pu = INFINITY;
    for (double t : log_grid(1e-3, 1e3, 4)) {
      const double m = levy_density_mu(s, t).value, u = potential_density_u(s, t).value;
      CHECK(m > 0);
      CHECK(u > 0);
      CHECK(m < pm);
      CHECK(u < pu);
      pm = m;
      pu = u;
    }
  }
}

TEST_CASE("tail additivity") {
  for (const auto& s : six_families()) {
    const double t1 = levy_tail(s, 1).value;
    for (double t : {2.0, 10.0, 100.0}) {
      // int_1^t mu by Gauss-Legendre in log time
      const double I = oracle::legendre(
          [&](double x) { return std::exp(x) * levy_density_mu(s, std::exp(x)).value; }, 0,
          std::log(t), 48);
      CHECK(rel_err(levy_tail(s, t).value + I, t1) < 1e-6);
    }
  }
}

TEST_CASE("rescaling identities") {
  for (const auto& s : six_families()) {
    for (double a : {0.1, 7.0}) {
      const auto r = rescale(s, a);
      const double fa = s(1 / (a * a));
      for (double t : {0.01, 1.0, 30.0}) {
        const double mu = levy_density_mu(r, t).value;
        CHECK(rel_err(mu, a * a / fa * levy_density_mu(s, a * a * t).value) < 1e-6);
        const double u = potential_density_u(r, t).value;
        CHECK(rel_err(u, a * a * fa * potential_density_u(s, a * a * t).value) < 1e-6);
      }
    }
  }
}

TEST_CASE("talbot and gaver-stehfest agree") {
  for (const auto& s : six_families())
    for (double t : log_grid(1e-3, 1e3, 2)) {
      for (const auto& h : {mu_transform(s), u_transform(s)}) {
        const auto c = cross_validate(h, t);
        INFO(s.label() << " " << h.label << " t=" << t);
        CHECK(c.rel_diff < 1e-6);
        CHECK(c.agree);
      }
    }
}

TEST_CASE("inversion window") {
  const auto s = BernsteinSpec::pure_power(1);
  CHECK_THROWS_AS(levy_density_mu(s, 1e-13), DomainError);
  CHECK_THROWS_AS(potential_density_u(s, 1e13), DomainError);
  CHECK_NOTHROW(levy_density_mu(s, 1e-12));
}

}  // TEST_SUITE
