#include <doctest.h>

#include "oracle.hpp"
#include "sbm/bernstein.hpp"
#include "sbm/errors.hpp"
#include "support.hpp"

using namespace sbm;

TEST_SUITE("bernstein") {

TEST_CASE("values against raw formulas") {
  CHECK(BernsteinSpec::pure_power(1)(4.0) == doctest::Approx(2).epsilon(1e-15));
  CHECK(BernsteinSpec::sum_of_powers(0.3, 0.7)(1.0) == doctest::Approx(1).epsilon(1e-15));
  CHECK(BernsteinSpec::log_cosh(0.5)(1.0) == doctest::Approx(1).epsilon(1e-15));

  struct Case {
    const char* name;
    double a, b;
  };
  const Case cases[] = {{"sum_of_powers", 0.3, 0.7}, {"power_of_shifted", 0.5, 0.5},
                        {"power_log", 0.5, 0.3},     {"power_over_log", 0.7, 0.3},
                        {"log_cosh", 0.5, 0},        {"log_sinh", 0.5, 0}};
  const auto specs = six_families();
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& c = cases[i];
    const long double n1 = oracle::raw_family(c.name, c.a, c.b, 1.0L);
    for (double l : log_grid(1e-3, 1e6, 4)) {
      const double want = double(oracle::raw_family(c.name, c.a, c.b, l) / n1);
      INFO(c.name << " lambda=" << l);
      CHECK(rel_err(specs[i](l), want) < 1e-12);
    }
  }
}

TEST_CASE("positive, increasing, normalized") {
  for (const auto& s : six_families()) {
    CHECK(s(1.0) == doctest::Approx(1).epsilon(1e-14));
    double prev = 0;
    for (double l : log_grid(1e-8, 1e8, 16)) {
      const double v = s(l);
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("domain errors") {
  const auto s = BernsteinSpec::pure_power(1);
  CHECK_THROWS_AS(eval_phi(s, 0.0), DomainError);
  CHECK_THROWS_AS(eval_phi(s, -1.0), DomainError);
  CHECK_THROWS_AS(capital_phi(s, 0), DomainError);
  CHECK_THROWS_AS(BernsteinSpec::sum_of_powers(0.7, 0.3), DomainError);
  CHECK_THROWS_AS(BernsteinSpec::pure_power(2.5), DomainError);
  CHECK_THROWS_AS(BernsteinSpec::log_cosh(1.5), DomainError);
}

TEST_CASE("json round trip and registry errors") {
  for (const auto& s : six_families()) {
    const auto back = BernsteinSpec::from_json(s.to_json());
    CHECK(back.id() == s.id());
    CHECK(back(3.7) == s(3.7));
  }
  try {
    BernsteinSpec::from_json({{"family", "nope"}});
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    const std::string m = e.what();
    for (auto& n : family_names()) CHECK(m.find(n) != std::string::npos);
  }
  const auto l1p = BernsteinSpec::from_json({{"family", "custom"}, {"evaluator", "log1p"}});
  CHECK(l1p(std::exp(1.0) - 1) == doctest::Approx(1 / std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("derivative") {
  CHECK(BernsteinSpec::pure_power(1).derivative(1.0) == doctest::Approx(0.5).epsilon(1e-15));
  // d/dl (l^0.3 + l^0.7)/2 at 1
  CHECK(BernsteinSpec::sum_of_powers(0.3, 0.7).derivative(1.0) ==
        doctest::Approx((0.3 + 0.7) / 2).epsilon(1e-14));
  for (const auto& s : six_families()) {
    for (double l : log_grid(1e-6, 1e6, 4)) {
      const double d = s.derivative(l);
      CHECK(d > 0);
      CHECK(l * d <= s(l) * (1 + 1e-12));
      const double h = 1e-5 * l;
      const double fd = (s(l + h) - s(l - h)) / (2 * h);
      CHECK(rel_err(d, fd) < 1e-6);
    }
  }
}

TEST_CASE("phi(l)/l is non-increasing") {
  for (const auto& s : six_families()) {
    double prev = INFINITY;
    for (double l : log_grid(1e-6, 1e6, 8)) {
      const double q = s(l) / l;
      CHECK(q <= prev);
      prev = q;
    }
  }
}

TEST_CASE("conjugate") {
  const auto c = conjugate(BernsteinSpec::pure_power(1));
  for (double l : {0.01, 1.0, 7.0}) CHECK(rel_err(c(l), std::sqrt(l)) < 1e-14);
  const auto cs = conjugate(BernsteinSpec::sum_of_powers(0.3, 0.7));
  for (double l : {0.01, 1.0, 7.0, 1e4})
    CHECK(rel_err(cs(l), 2 * l / (std::pow(l, 0.3) + std::pow(l, 0.7))) < 1e-13);
  for (const auto& s : six_families()) {
    CHECK(conjugate(s)(1.0) == doctest::Approx(1).epsilon(1e-14));
    const auto cc = conjugate(conjugate(s));
    for (double l : log_grid(1e-4, 1e4, 4)) CHECK(rel_err(cc(l), s(l)) < 1e-12);
  }
}

TEST_CASE("rescale") {
  const auto s = BernsteinSpec::sum_of_powers(0.3, 0.7);
  const auto one = rescale(s, 1);
  for (double l : log_grid(1e-3, 1e3, 2)) CHECK(rel_err(one(l), s(l)) < 1e-14);
  CHECK(rescale(s, 10)(1.0) == doctest::Approx(1).epsilon(1e-14));
  const auto r10 = rescale(s, 10);
  for (double l : {0.1, 5.0, 300.0}) CHECK(rel_err(r10(l), s(l / 100) / s(0.01)) < 1e-13);
  const auto p = BernsteinSpec::pure_power(1.4);
  for (double a : {0.01, 3.0, 50.0})
    for (double l : {0.2, 9.0}) CHECK(rel_err(rescale(p, a)(l), p(l)) < 1e-13);
}

TEST_CASE("capital phi and its inverse") {
  const auto p = BernsteinSpec::pure_power(1);
  CHECK(capital_phi(p, 2) == doctest::Approx(2).epsilon(1e-15));
  CHECK(capital_phi_inv(p, 4) == doctest::Approx(4).epsilon(1e-12));
  const auto s = BernsteinSpec::sum_of_powers(0.5, 0.9);
  CHECK(rel_err(capital_phi(s, 0.1), 2 / (std::pow(100, 0.5) + std::pow(100, 0.9))) < 1e-14);
  auto all = six_families();
  all.push_back(p);
  for (const auto& f : all) {
    CHECK(capital_phi(f, 1) == doctest::Approx(1).epsilon(1e-14));
    CHECK(capital_phi_inv(f, 1) == doctest::Approx(1).epsilon(1e-10));
    for (double r : log_grid(1e-6, 1e6, 4)) CHECK(rel_err(capital_phi_inv(f, capital_phi(f, r)), r) < 1e-10);
  }
}

TEST_CASE("scaling certificates") {
  const auto cert = certify(BernsteinSpec::pure_power(1));
  for (double d : {cert.delta1(), cert.delta2(), cert.delta3(), cert.delta4()})
    CHECK(d == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(cert.at_infinity->a_lower == doctest::Approx(1).epsilon(1e-9));
  CHECK(cert.at_infinity->a_upper == doctest::Approx(1).epsilon(1e-9));
  CHECK(cert.at_zero->a_lower == doctest::Approx(1).epsilon(1e-9));
  CHECK(cert.at_zero->a_upper == doctest::Approx(1).epsilon(1e-9));

  // sum_of_powers: upper index at infinity climbs to 0.7 as the grid widens,
  // lower index at zero falls to 0.3.
  const auto s = BernsteinSpec::sum_of_powers(0.3, 0.7);
  const auto near = fit_scaling_side(s, 1, 1e3, ScalingSide::at_infinity);
  const auto far = fit_scaling_side(s, 1, 1e8, ScalingSide::at_infinity);
  CHECK(far.delta_upper > near.delta_upper);
  CHECK(far.delta_upper < 0.7);
  CHECK(far.delta_upper > 0.69);
  CHECK(far.asymptotic_index == doctest::Approx(0.7).epsilon(0.02));
  const auto z = fit_scaling_side(s, 1e-8, 1, ScalingSide::at_zero);
  CHECK(z.delta_lower > 0.3);
  CHECK(z.delta_lower < 0.31);
  const auto full = certify(s);
  for (double d : {full.delta1(), full.delta2(), full.delta3(), full.delta4()}) {
    CHECK(d > 0);
    CHECK(d < 1);
  }
  CHECK(full.delta1() <= full.delta2());
  CHECK(full.delta3() <= full.delta4());

  const auto pl = estimate_scaling_indices(BernsteinSpec::power_log(0.5, 0.3), 1e-8, 1,
                                           ScalingSide::at_zero);
  CHECK(pl.delta3() > 0);
  CHECK(pl.delta4() < 1);
}

TEST_CASE("certificate bounds hold on every grid pair") {
  for (const auto& s : six_families()) {
    const auto c = certify(s);
    for (const auto* side : {&*c.at_infinity, &*c.at_zero}) {
      const auto g = log_grid(side->r_min, side->r_max, 8);
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i; j < g.size(); j += 3) {
          const double q = s(g[j]) / s(g[i]), x = g[j] / g[i];
          CHECK(q >= side->a_lower * std::pow(x, side->delta_lower) * (1 - 1e-9));
          CHECK(q <= side->a_upper * std::pow(x, side->delta_upper) * (1 + 1e-9));
        }
    }
  }
}

TEST_CASE("log1p fails certification at infinity") {
  const auto l = BernsteinSpec::from_json({{"family", "custom"}, {"evaluator", "log1p"}});
  try {
    certify(l);
    FAIL("expected CertificationError");
  } catch (const CertificationError& e) {
    CHECK(std::string(e.what()).find("at_infinity") != std::string::npos);
  }
}

TEST_CASE("sanity sandwich") {
  const auto grid = log_grid(1e-4, 1e4, 4);
  for (const auto& s : six_families()) CHECK(check_bernstein_sanity(s, grid, grid).passed);
  const auto p = check_bernstein_sanity(BernsteinSpec::pure_power(1), grid, grid);
  CHECK(p.passed);
  const auto sq = BernsteinSpec::from_json({{"family", "custom"}, {"evaluator", "square"}});
  const auto bad = check_bernstein_sanity(sq, grid, grid);
  CHECK_FALSE(bad.passed);
  REQUIRE(bad.first_violation);
}

}  // TEST_SUITE
