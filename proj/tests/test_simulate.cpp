#include <doctest.h>

#include "oracle.hpp"
#include "sbm/errors.hpp"
#include "sbm/simulate.hpp"
#include "support.hpp"

using namespace sbm;

namespace {

struct Moments {
  double mean = 0, se = 0;
};

template <class F>
Moments sample_mean(std::size_t n, F f) {
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = f();
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, std::sqrt(std::max(s2 / n - m * m, 0.0) / (n - 1))};
}

McConfig mc(std::uint64_t seed, unsigned workers = 1) {
  McConfig c;
  c.seed = seed;
  c.workers = workers;
  return c;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("increment laws match exp(-dt phi)") {
  struct Case {
    BernsteinSpec spec;
    SamplerStrategy strategy;
  };
  const Case cases[] = {
      {BernsteinSpec::pure_power(1), SamplerStrategy::stable_closed_form},
      {BernsteinSpec::pure_power(1.4), SamplerStrategy::stable_closed_form},
      {BernsteinSpec::sum_of_powers(0.3, 0.7), SamplerStrategy::stable_mixture},
      {BernsteinSpec::sum_of_powers(0.3, 0.7), SamplerStrategy::tabulated_inverse_cdf},
      {BernsteinSpec::power_log(0.5, 0.3), SamplerStrategy::tabulated_inverse_cdf},
      {BernsteinSpec::log_cosh(0.5), SamplerStrategy::tabulated_inverse_cdf},
      {BernsteinSpec::power_log(0.5, 0.3), SamplerStrategy::general_decomposition},
  };
  const std::size_t n = 40000;
  std::uint64_t stream = 0;
  for (const auto& c : cases) {
    SamplerOptions opt;
    opt.strategy = c.strategy;
    const auto smp = SubordinatorSampler::make(c.spec, opt);
    CHECK(smp.strategy() == c.strategy);
    for (double dt : {0.1, 1.0}) {
      smp.prepare(dt);
      RandomSource src(7, stream++);
      std::vector<double> xs(n);
      for (auto& x : xs) {
        x = smp.sample(dt, src);
        REQUIRE(x >= 0);
      }
      for (double l : {0.3, 1.0, 5.0}) {
        std::size_t i = 0;
        const auto m = sample_mean(n, [&] { return std::exp(-l * xs[i++]); });
        INFO(c.spec.label() << " " << to_string(c.strategy) << " dt=" << dt << " l=" << l);
        CHECK(std::fabs(m.mean - std::exp(-dt * c.spec(l))) < 5 * m.se + 2e-3);
      }
    }
  }
}

TEST_CASE("tabulated sampler needs a prepared step") {
  SamplerOptions opt;
  opt.strategy = SamplerStrategy::tabulated_inverse_cdf;
  const auto smp = SubordinatorSampler::make(BernsteinSpec::power_log(0.5, 0.3), opt);
  RandomSource src(1, 0);
  CHECK_THROWS_AS(smp.sample(0.37, src), DomainError);
  opt.strategy = SamplerStrategy::stable_mixture;
  CHECK_THROWS_AS(SubordinatorSampler::make(BernsteinSpec::pure_power(1), opt), DomainError);
}

TEST_CASE("subordinate Brownian motion is Cauchy for alpha = 1") {
  const auto s = BernsteinSpec::pure_power(1);
  const auto smp = SubordinatorSampler::make(s);
  const std::size_t n = 40000;
  RandomSource src(11, 0);
  std::vector<Point> xs(n);
  for (auto& x : xs) x = sample_path(s, smp, 2, {0.0, 0.0}, 1, 0.25, src).x_values.back();
  for (double xi : {0.2, 1.0, 3.0})
    for (int k : {0, 1}) {
      std::size_t i = 0;
      const auto m = sample_mean(n, [&] { return std::cos(xi * xs[i++][k]); });
      INFO("xi=" << xi << " coordinate " << k);
      CHECK(std::fabs(m.mean - std::exp(-xi)) < 5 * m.se);
    }
  // isotropy: the law of the projection onto a diagonal is the same
  std::size_t i = 0;
  const auto diag = sample_mean(n, [&] {
    const auto& x = xs[i++];
    return std::cos((x[0] + x[1]) / std::sqrt(2.0));
  });
  CHECK(std::fabs(diag.mean - std::exp(-1.0)) < 5 * diag.se);
}

TEST_CASE("path skeleton") {
  const auto s = BernsteinSpec::sum_of_powers(0.3, 0.7);
  const auto smp = SubordinatorSampler::make(s);
  RandomSource a(3, 1), b(3, 1);
  const auto p = sample_path(s, smp, 3, {0, 0, 1}, 2, 0.1, a);
  const auto q = sample_path(s, smp, 3, {0, 0, 1}, 2, 0.1, b);
  CHECK(p.s_values == q.s_values);
  CHECK(p.times.size() == p.x_values.size());
  CHECK(p.times.back() == doctest::Approx(2));
  for (std::size_t k = 1; k < p.s_values.size(); ++k) CHECK(p.s_values[k] >= p.s_values[k - 1]);
  RandomSource c(3, 1);
  const auto killed =
      sample_path(s, smp, 3, {0, 0, 1e-3}, 50, 0.1, c, [](const Point& x) { return x[2] > 0; });
  REQUIRE(killed.killed_at);
  CHECK(killed.x_values[*killed.killed_at][2] <= 0);
  for (std::size_t k = 0; k < *killed.killed_at; ++k) CHECK(killed.x_values[k][2] > 0);
}

TEST_CASE("default step and adaptive rule") {
  const auto s = BernsteinSpec::sum_of_powers(0.3, 0.7);
  const double dt = default_dt(s, 2, 50);
  CHECK(capital_phi_inv(s, dt) == doctest::Approx(2.0 / 50).epsilon(1e-8));
  StepRule r;
  r.dt = 0.01;
  CHECK(r.step(s, 1e-4) == 0.01);
  r.adaptive = true;
  r.resolution = 10;
  const double h = r.step(s, 1e-4);
  CHECK(h <= capital_phi(s, 1e-5) * (1 + 1e-12));
  const double k = std::log2(0.01 / h);
  CHECK(k == doctest::Approx(std::round(k)).epsilon(1e-12));
  CHECK(r.step(s, 1e3) == 0.01);
}

TEST_CASE("stable exit time from the unit interval") {
  const auto s = BernsteinSpec::pure_power(1);
  const auto smp = SubordinatorSampler::make(s);
  StepRule st;
  st.dt = default_dt(s, 1, 100);
  const auto res = mc_exit_ball(s, smp, 1, {0.0}, 1, {0.0}, 20000, st, mc(5));
  REQUIRE(res.mean_exit_time.bias_note);
  const auto& b = *res.mean_exit_time.bias_note;
  // the skeleton overshoots exit, so coarser steps give longer times
  CHECK(b.means[0] > b.means[1]);
  CHECK(b.means[1] > b.means[2]);
  const double want = oracle::stable_exit_mean(1, 1, 0);
  CHECK(want == doctest::Approx(1).epsilon(1e-12));
  CHECK(std::fabs(b.extrapolated - want) < 5 * res.mean_exit_time.std_error + 0.02);
  CHECK(res.exit_positions.size() == 20000);
  for (const auto& p : res.exit_positions) CHECK(std::fabs(p[0]) >= 1);
}

TEST_CASE("exit positions follow the Poisson kernel") {
  const auto s = BernsteinSpec::pure_power(1);
  const auto smp = SubordinatorSampler::make(s);
  StepRule st;
  st.dt = default_dt(s, 1, 200);
  const std::size_t n = 40000;
  const auto rep = mc_exit_density_check(s, smp, 1, 1, n, st, mc(9), {1.25, 1.6, 2, 3, 5, 10});
  // mass of a shell pair: with y = cosh u the kernel integrates to c du / cosh u
  const double c = oracle::stable_ball_poisson(1, 1, 1, std::cosh(1.0)) * std::sinh(1.0) * std::cosh(1.0);
  for (const auto& row : rep.shells) {
    const double mass = 2 * oracle::legendre([&](double u) { return c / std::cosh(u); },
                                             std::acosh(row.r_lo), std::acosh(row.r_hi), 16);
    const double want = mass / (2 * (row.r_hi - row.r_lo));
    INFO("shell [" << row.r_lo << ", " << row.r_hi << ")");
    CHECK(std::fabs(row.density - want) < 5 * row.density_se + 0.05 * want);
    CHECK(row.ratio_lower > 0);
    CHECK(row.ratio_upper <= row.ratio_lower);
  }
  CHECK(rep.underfilled == 0);
}

TEST_CASE("half-space survival and killed density") {
  const auto s = BernsteinSpec::sum_of_powers(0.3, 0.7);
  const auto smp = SubordinatorSampler::make(s);
  StepRule st;
  st.dt = 0.01;
  st.adaptive = true;
  st.resolution = 10;
  const std::size_t n = 4000;
  const Point x{0.0, 0.5};
  const std::vector<Box> cells{{{-1, 0}, {1, 1}}, {{-1, 1}, {1, 3}}};
  const auto hk = mc_half_space_heat_kernel(s, smp, 2, 1, x, cells, n, st, mc(4));
  const auto surv = mc_survival_half_space(s, smp, 2, x, 1, n, st, mc(4));
  // same seed, same paths
  CHECK(hk.survival.value == surv.value);
  CHECK(surv.value > 0);
  CHECK(surv.value < 1);
  double in_cells = 0;
  for (const auto& c : hk.cells) in_cells += c.p_hat.value * c.cell.volume();
  CHECK(in_cells <= hk.survival.value + 1e-15);
  const auto deeper = mc_survival_half_space(s, smp, 2, {0.0, 2.0}, 1, n, st, mc(4));
  CHECK(deeper.value > surv.value);
  const auto later = mc_survival_half_space(s, smp, 2, x, 4, n, st, mc(4));
  CHECK(later.value < surv.value);
  CHECK_THROWS_AS(mc_survival_half_space(s, smp, 2, {0.0, -1.0}, 1, n, st), DomainError);
}

TEST_CASE("results do not depend on the worker count") {
  const auto s = BernsteinSpec::pure_power(1);
  const auto smp = SubordinatorSampler::make(s);
  StepRule st;
  st.dt = 0.01;
  McConfig a = mc(21, 1), b = mc(21, 3);
  a.chunk = b.chunk = 500;
  const auto x = mc_survival_half_space(s, smp, 1, {0.3}, 1, 3000, st, a);
  const auto y = mc_survival_half_space(s, smp, 1, {0.3}, 1, 3000, st, b);
  CHECK(x.value == y.value);
  CHECK(x.std_error == y.std_error);
  McConfig other = mc(22, 1);
  other.chunk = 500;
  CHECK(mc_survival_half_space(s, smp, 1, {0.3}, 1, 3000, st, other).value != x.value);
}

TEST_CASE("harmonic ratios") {
  const auto s = BernsteinSpec::pure_power(1);
  const auto smp = SubordinatorSampler::make(s);
  StepRule st;
  st.dt = 0.01;
  st.adaptive = true;
  st.resolution = 10;
  const Box window{{-1, 0}, {1, 1}};
  const std::vector<Box> targets{{{1.25, 0}, {2.5, 1}}, {{2.5, 0}, {1e9, 1}}};
  const auto ex = mc_window_exit(s, smp, 2, window, {0.0, 0.1}, targets, 4000, st, mc(2));
  const auto same = harmonic_ratio(s, ex, ex, 10);
  CHECK(same.single_ratio.value == doctest::Approx(1).epsilon(1e-15));
  REQUIRE(same.double_ratio);
  CHECK(same.double_ratio->value == doctest::Approx(1).epsilon(1e-15));
  CHECK(same.comparator == doctest::Approx(1).epsilon(1e-15));
  CHECK_FALSE(same.degenerate);

  const auto ey = mc_window_exit(s, smp, 2, window, {0.0, 0.4}, targets, 4000, st, mc(3));
  const auto r = harmonic_ratio(s, ex, ey, 10);
  CHECK(r.comparator == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.single_ratio.value < 1);
  CHECK(r.single_ratio.value / r.comparator > 0.3);
  CHECK(r.single_ratio.value / r.comparator < 3);
}

TEST_CASE("spearman") {
  CHECK(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1));
  CHECK(spearman_rho({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1));
  CHECK(spearman_rho({1, 2, 3, 4, 5}, {1, 3, 2, 5, 4}) == doctest::Approx(0.8));
}

TEST_CASE("argument checks") {
  const auto s = BernsteinSpec::pure_power(1);
  const auto smp = SubordinatorSampler::make(s);
  StepRule st;
  CHECK_THROWS_AS(mc_exit_ball(s, smp, 2, {0.0, 0.0}, 1, {0.0}, 100, st), DomainError);
  CHECK_THROWS_AS(mc_exit_ball(s, smp, 1, {0.0}, -1, {0.0}, 100, st), DomainError);
  CHECK_THROWS_AS(mc_exit_density_check(s, smp, 1, 1, 100, st, {}, {0.5, 2}), DomainError);
}

}  // TEST_SUITE
