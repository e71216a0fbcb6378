#include "sbm/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

#include <boost/math/tools/roots.hpp>

#include "sbm/io.hpp"
#include "sbm/laplace.hpp"

namespace sbm {

namespace {

constexpr double pi = std::numbers::pi;

// Positive stable variate with E exp(-l S) = exp(-l^p), Kanter's representation.
double stable_unit(double p, RandomSource& src) {
  const double u = pi * src.uniform();
  const double e = src.exponential();
  const double ls = std::log(std::sin(p * u)) - std::log(std::sin(u)) / p +
                    (1 - p) / p * (std::log(std::sin((1 - p) * u)) - std::log(e));
  return std::exp(ls);
}

// exp(z) - 1 without cancellation for small |z|.
cplx expm1c(cplx z) {
  if (std::abs(z) > 1e-2) return std::exp(z) - 1.0;
  cplx term = z, sum = z;
  for (int k = 2; k < 10; ++k) {
    term *= z / double(k);
    sum += term;
  }
  return sum;
}

// Poisson by sequential inversion; means here stay below ~50.
std::size_t poisson(double m, RandomSource& src) {
  double u = src.uniform();
  double p = std::exp(-m), c = p;
  std::size_t k = 0;
  while (u > c && k < 10000) {
    ++k;
    p *= m / k;
    c += p;
  }
  return k;
}

// ------------------------------------------------------------- tables

// Law of S_dt: CDF on the lower part and tail on the upper part, both by
// Talbot inversion, with a Pareto tail past the grid.
struct IncrementTable {
  std::vector<double> ls_lo, F;  // log s, F(s) nondecreasing
  std::vector<double> ls_hi, lT;  // log s, log(1 - F(s)) nonincreasing
  double F_split = 0.5;
  double kappa = 1;  // 1 - F ~ s^{-kappa} past the grid

  double sample(RandomSource& src) const {
    const double u = src.uniform();
    if (u < F_split) {
      // below the first point: mass <= max_unresolved_mass, placed uniformly in log s over a decade
      if (u <= F.front()) return std::exp(ls_lo.front() + std::log(10.0) * (u / F.front() - 1));
      const std::size_t i = std::upper_bound(F.begin(), F.end(), u) - F.begin();
      if (i >= F.size()) return std::exp(ls_lo.back());
      const double w = (u - F[i - 1]) / (F[i] - F[i - 1]);
      return std::exp(ls_lo[i - 1] + w * (ls_lo[i] - ls_lo[i - 1]));
    }
    const double lv = std::log1p(-u);
    if (lv <= lT.back()) return std::exp(ls_hi.back() + (lT.back() - lv) / kappa);
    if (lv >= lT.front()) return std::exp(ls_hi.front());
    // lT is nonincreasing; find the first index with lT[i] < lv
    const std::size_t i =
        std::upper_bound(lT.begin(), lT.end(), lv, [](double a, double b) { return a > b; }) -
        lT.begin();
    const double w = (lv - lT[i - 1]) / (lT[i] - lT[i - 1]);
    return std::exp(ls_hi[i - 1] + w * (ls_hi[i] - ls_hi[i - 1]));
  }
};

IncrementTable build_increment_table(const BernsteinSpec& spec, double dt, const SamplerOptions& opt) {
  if (!spec.has_complex())
    throw DomainError("tabulated_inverse_cdf needs a complex evaluator; use general_decomposition");
  const auto& cfg = opt.cfg;
  const double r = capital_phi_inv(spec, dt, cfg);
  const double s_star = r * r;
  const double ppd = opt.table_points_per_decade;
  auto cdf_tr = [&](cplx l) { return std::exp(-dt * spec(l)) / l; };
  auto tail_tr = [&](cplx l) { return -expm1c(-dt * spec(l)) / l; };
  // Talbot loses the lower tail once e^{-dt phi} grows along the contour;
  // a point is kept only when two node counts agree.
  const int m1 = cfg.talbot_nodes, m2 = cfg.talbot_nodes + 16;
  auto stable_value = [&](const auto& tr, double s, double& v) {
    v = talbot_invert(tr, s, m1);
    const double w = talbot_invert(tr, s, m2);
    return std::isfinite(v) && std::isfinite(w) && v >= 0 && v <= 1 + 1e-9 &&
           std::fabs(v - w) <= 1e-9 + 1e-6 * std::fabs(v);
  };
  IncrementTable t;
  const double step = std::pow(10.0, 1 / ppd);
  for (double s = s_star / step; s > s_star * 1e-30; s /= step) {
    double F;
    if (!stable_value(cdf_tr, s, F) || (!t.F.empty() && F > t.F.back())) break;
    t.ls_lo.push_back(std::log(s));
    t.F.push_back(F);
    if (F < 1e-12) break;
  }
  std::reverse(t.ls_lo.begin(), t.ls_lo.end());
  std::reverse(t.F.begin(), t.F.end());
  if (t.F.empty() || t.F.front() > opt.max_unresolved_mass)
    throw ConvergenceError("lower tail of the increment law at dt=" + fmt_double(dt) +
                           " is not resolved (F=" + fmt_double(t.F.empty() ? 1.0 : t.F.front()) +
                           " at the first reliable point); use general_decomposition");
  for (double s : log_grid(s_star, s_star * 1e10, ppd)) {
    double T;
    if (!stable_value(tail_tr, s, T) || !(T > 0)) break;  // the Pareto tail takes over
    t.ls_hi.push_back(std::log(s));
    t.lT.push_back(std::log(std::min(T, 1.0)));
  }
  if (t.F.size() < 4 || t.lT.size() < 4)
    throw ConvergenceError("increment table for dt=" + fmt_double(dt) + " is degenerate");
  for (std::size_t i = 1; i < t.F.size(); ++i) t.F[i] = std::max(t.F[i], t.F[i - 1]);
  for (std::size_t i = 1; i < t.lT.size(); ++i) t.lT[i] = std::min(t.lT[i], t.lT[i - 1]);
  // the two halves meet at s_star
  t.F_split = std::min(t.F.back(), -std::expm1(t.lT.front()));
  const std::size_t n = t.lT.size(), w = std::min<std::size_t>(8, n - 1);
  t.kappa = -(t.lT[n - 1] - t.lT[n - 1 - w]) / (t.ls_hi[n - 1] - t.ls_hi[n - 1 - w]);
  if (!(t.kappa > 0)) throw ConvergenceError("increment table tail is not decaying");
  return t;
}

// Compound Poisson of jumps above eps plus the mean of the jumps below it.
struct DecompositionTable {
  double eps = 0, rate = 0, drift = 0;
  std::vector<double> ls, lbar;  // log s, log mu(s, inf), decreasing from log rate
  double kappa = 1;

  double jump(RandomSource& src) const {
    const double target = lbar.front() + std::log(src.uniform());
    if (target <= lbar.back()) return std::exp(ls.back() + (lbar.back() - target) / kappa);
    const std::size_t i =
        std::upper_bound(lbar.begin(), lbar.end(), target, [](double a, double b) { return a > b; }) -
        lbar.begin();
    const double w = (target - lbar[i - 1]) / (lbar[i] - lbar[i - 1]);
    return std::exp(ls[i - 1] + w * (ls[i] - ls[i - 1]));
  }

  double sample(double dt, RandomSource& src) const {
    double s = drift;
    for (std::size_t k = poisson(dt * rate, src); k > 0; --k) s += jump(src);
    return s;
  }
};

DecompositionTable build_decomposition(const BernsteinSpec& spec, double dt, const SamplerOptions& opt) {
  const auto& cfg = opt.cfg;
  const double lo = std::pow(10.0, cfg.log10_t_min), hi = std::pow(10.0, cfg.log10_t_max);
  auto tail = [&](double s) { return levy_tail(spec, s, cfg).value; };
  DecompositionTable d;
  if (dt * tail(lo) <= opt.max_poisson_mean) {
    d.eps = lo;
  } else {
    auto f = [&](double ls) { return std::log(dt * tail(std::exp(ls)) / opt.max_poisson_mean); };
    boost::uintmax_t it = 200;
    auto [a, b] = boost::math::tools::toms748_solve(f, std::log(lo), std::log(hi),
                                                    boost::math::tools::eps_tolerance<double>(40), it);
    d.eps = std::exp(b);
  }
  d.rate = tail(d.eps);
  // int_0^eps s mu(ds) = int_0^eps mu(s, inf) ds - eps mu(eps, inf); the
  // first term has transform phi(l)/l^2
  const double integral =
      talbot_invert([&](cplx l) { return spec(l) / (l * l); }, d.eps, cfg.talbot_nodes);
  d.drift = std::max(0.0, dt * (integral - d.eps * d.rate));
  for (double s : log_grid(d.eps, std::max(hi, d.eps * 10), opt.table_points_per_decade)) {
    double v;
    try {
      v = tail(s);
    } catch (const Error&) {
      break;
    }
    if (!(v > 0)) break;
    d.ls.push_back(std::log(s));
    d.lbar.push_back(std::log(v));
  }
  if (d.ls.size() < 4) throw ConvergenceError("jump table above eps is degenerate");
  for (std::size_t i = 1; i < d.lbar.size(); ++i) d.lbar[i] = std::min(d.lbar[i], d.lbar[i - 1]);
  const std::size_t n = d.ls.size(), w = std::min<std::size_t>(8, n - 1);
  d.kappa = -(d.lbar[n - 1] - d.lbar[n - 1 - w]) / (d.ls[n - 1] - d.ls[n - 1 - w]);
  if (!(d.kappa > 0)) throw ConvergenceError("Levy tail is not decaying");
  return d;
}

}  // namespace

// ------------------------------------------------------------- sampler

std::string to_string(SamplerStrategy s) {
  switch (s) {
    case SamplerStrategy::stable_closed_form: return "stable_closed_form";
    case SamplerStrategy::stable_mixture: return "stable_mixture";
    case SamplerStrategy::tabulated_inverse_cdf: return "tabulated_inverse_cdf";
    case SamplerStrategy::general_decomposition: return "general_decomposition";
  }
  return "?";
}

SamplerStrategy sampler_strategy_from_string(const std::string& s) {
  for (auto v : {SamplerStrategy::stable_closed_form, SamplerStrategy::stable_mixture,
                 SamplerStrategy::tabulated_inverse_cdf, SamplerStrategy::general_decomposition})
    if (to_string(v) == s) return v;
  throw DomainError("unknown sampler strategy '" + s +
                    "' (stable_closed_form, stable_mixture, tabulated_inverse_cdf, "
                    "general_decomposition)");
}

struct SubordinatorSampler::State {
  State(const BernsteinSpec& s, const SamplerOptions& o) : spec(s), opt(o) {}
  BernsteinSpec spec;
  SamplerOptions opt;
  SamplerStrategy strategy = SamplerStrategy::tabulated_inverse_cdf;
  double p = 0, c = 1;                   // phi = c l^p
  double a = 0, b = 0, ca = 1, cb = 1;   // phi = ca l^a + cb l^b
  mutable std::mutex m;
  mutable std::map<double, std::shared_ptr<const IncrementTable>> inc;
  mutable std::map<double, std::shared_ptr<const DecompositionTable>> dec;
};

SubordinatorSampler SubordinatorSampler::make(const BernsteinSpec& spec, const SamplerOptions& opt) {
  opt.cfg.validate();
  auto st = std::make_shared<State>(spec, opt);
  const auto power = spec.exact_power();
  const bool mixture = spec.family() == Family::sum_of_powers;
  SamplerStrategy s = opt.strategy.value_or(
      power ? SamplerStrategy::stable_closed_form
            : mixture ? SamplerStrategy::stable_mixture
                      : spec.has_complex() ? SamplerStrategy::tabulated_inverse_cdf
                                           : SamplerStrategy::general_decomposition);
  if (s == SamplerStrategy::stable_closed_form) {
    if (!power) throw DomainError("stable_closed_form needs a pure power, got " + spec.label());
    st->p = *power;
    st->c = spec(1.0);
  } else if (s == SamplerStrategy::stable_mixture) {
    if (!mixture) throw DomainError("stable_mixture needs sum_of_powers, got " + spec.label());
    st->a = spec.param("alpha");
    st->b = spec.param("beta");
    st->ca = st->cb = spec.scale();
  }
  st->strategy = s;
  SubordinatorSampler out;
  out.state_ = st;
  return out;
}

SamplerStrategy SubordinatorSampler::strategy() const { return state_->strategy; }
const BernsteinSpec& SubordinatorSampler::spec() const { return state_->spec; }
bool SubordinatorSampler::needs_tables() const {
  return state_->strategy == SamplerStrategy::tabulated_inverse_cdf ||
         state_->strategy == SamplerStrategy::general_decomposition;
}

void SubordinatorSampler::prepare(double dt) const {
  if (!(dt > 0)) throw DomainError("dt must be positive");
  if (!needs_tables()) return;
  auto& st = *state_;
  std::lock_guard lock(st.m);
  if (st.strategy == SamplerStrategy::tabulated_inverse_cdf) {
    if (!st.inc.count(dt))
      st.inc.emplace(dt, std::make_shared<IncrementTable>(build_increment_table(st.spec, dt, st.opt)));
  } else if (!st.dec.count(dt)) {
    st.dec.emplace(dt, std::make_shared<DecompositionTable>(build_decomposition(st.spec, dt, st.opt)));
  }
}

namespace {

template <class Map>
auto find_table(const Map& m, std::mutex& mu, double dt) {
  std::lock_guard lock(mu);
  auto it = m.lower_bound(dt * (1 - 1e-9));
  if (it == m.end() || std::fabs(it->first / dt - 1) > 1e-9)
    throw DomainError("no increment table at dt=" + fmt_double(dt) +
                      "; tables exist only for prepared step sizes");
  return it->second;
}

}  // namespace

double SubordinatorSampler::sample(double dt, RandomSource& src) const {
  const auto& st = *state_;
  switch (st.strategy) {
    case SamplerStrategy::stable_closed_form:
      return std::pow(st.c * dt, 1 / st.p) * stable_unit(st.p, src);
    case SamplerStrategy::stable_mixture:
      return std::pow(st.ca * dt, 1 / st.a) * stable_unit(st.a, src) +
             std::pow(st.cb * dt, 1 / st.b) * stable_unit(st.b, src);
    case SamplerStrategy::tabulated_inverse_cdf:
      return find_table(st.inc, st.m, dt)->sample(src);
    case SamplerStrategy::general_decomposition:
      return find_table(st.dec, st.m, dt)->sample(dt, src);
  }
  return 0;
}

json SubordinatorSampler::describe() const {
  const auto& st = *state_;
  json j{{"strategy", to_string(st.strategy)}, {"spec", st.spec.to_json()}};
  std::lock_guard lock(st.m);
  if (!st.dec.empty()) {
    json t = json::array();
    for (auto& [dt, d] : st.dec)
      t.push_back({{"dt", dt}, {"eps", d->eps}, {"rate", d->rate}, {"drift", d->drift}});
    j["decomposition"] = t;
  }
  if (!st.inc.empty()) {
    json t = json::array();
    for (auto& [dt, d] : st.inc) t.push_back({{"dt", dt}, {"points", d->F.size() + d->lT.size()}});
    j["tables"] = t;
  }
  return j;
}

double sample_increment(const SubordinatorSampler& sampler, double dt, RandomSource& src) {
  if (!(dt > 0)) throw DomainError("dt must be positive");
  return sampler.sample(dt, src);
}

// ---------------------------------------------------------------- paths

namespace {

void brownian_step(Point& x, double ds, RandomSource& src) {
  const double sd = std::sqrt(2 * ds);
  for (auto& c : x) c += sd * src.normal();
}

void require_point(int d, const Point& x, const char* what) {
  if (d < 1) throw DomainError("dimension d must be >= 1");
  if (x.size() != static_cast<std::size_t>(d))
    throw DomainError(std::string(what) + " must have d=" + std::to_string(d) + " coordinates");
}

}  // namespace

PathSample sample_path(const BernsteinSpec&, const SubordinatorSampler& sampler, int d,
                       const Point& x0, double horizon, double dt, RandomSource& src,
                       const std::function<bool(const Point&)>& inside) {
  require_point(d, x0, "x0");
  if (!(horizon > 0) || !(dt > 0)) throw DomainError("horizon and dt must be positive");
  sampler.prepare(dt);
  PathSample p;
  p.times.push_back(0);
  p.s_values.push_back(0);
  p.x_values.push_back(x0);
  Point x = x0;
  double s = 0;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  for (std::size_t k = 1; k <= steps; ++k) {
    const double ds = sampler.sample(dt, src);
    s += ds;
    brownian_step(x, ds, src);
    p.times.push_back(std::min(k * dt, horizon));
    p.s_values.push_back(s);
    p.x_values.push_back(x);
    if (inside && !p.killed_at && !inside(x)) p.killed_at = k;
  }
  return p;
}

double StepRule::step(const BernsteinSpec& spec, double dist) const {
  if (!adaptive) return dt;
  const double want = capital_phi(spec, std::max(dist, 0.0) / resolution);
  if (!(want < dt)) return dt;
  const int k = std::min(max_halvings, static_cast<int>(std::ceil(std::log2(dt / want))));
  return std::ldexp(dt, -k);
}

double default_dt(const BernsteinSpec& spec, double geometry_scale, double resolution) {
  return capital_phi(spec, geometry_scale / resolution);
}

json BiasNote::to_json() const {
  return {{"steps", steps},       {"means", means},
          {"bias_dt", bias_dt},   {"bias_dt_half", bias_dt_half},
          {"bias_dt_se", bias_dt_se}, {"bias_dt_half_se", bias_dt_half_se},
          {"shrink", shrink},     {"extrapolated", extrapolated}};
}

json McEstimate::to_json() const {
  json j{{"estimate", value}, {"std_error", std_error}, {"n", n}};
  j["bias"] = bias_note ? bias_note->to_json() : json(nullptr);
  return j;
}

namespace {

// Runs fn(i, src, acc) for paths 0..n-1 in chunks; per-chunk sums are merged
// in chunk order, so results do not depend on the worker count.
template <class Fn>
std::vector<double> run_paths(std::size_t n, std::size_t width, const McConfig& mc, Fn&& fn) {
  const std::size_t chunk = std::max<std::size_t>(mc.chunk, 1);
  const std::size_t chunks = (n + chunk - 1) / chunk;
  std::vector<std::vector<double>> acc(chunks, std::vector<double>(width, 0.0));
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex em;
  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
          RandomSource src(mc.seed, i, mc.substream);
          fn(i, src, acc[c].data());
        }
      } catch (...) {
        std::lock_guard lock(em);
        if (!err) err = std::current_exception();
        next = chunks;
        return;
      }
    }
  };
  unsigned w = mc.workers ? mc.workers : std::max(1u, std::thread::hardware_concurrency());
  w = static_cast<unsigned>(std::min<std::size_t>(w, std::max<std::size_t>(chunks, 1)));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < w; ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  std::vector<double> total(width, 0.0);
  for (const auto& a : acc)
    for (std::size_t k = 0; k < width; ++k) total[k] += a[k];
  return total;
}

McEstimate from_sums(double s, double s2, std::size_t n) {
  McEstimate e;
  e.n = n;
  e.value = s / n;
  const double var = n > 1 ? std::max(0.0, (s2 - n * e.value * e.value) / (n - 1)) : 0.0;
  e.std_error = std::sqrt(var / n);
  return e;
}

void require_n(std::size_t n, std::size_t min) {
  if (n < min) throw DomainError("need at least " + std::to_string(min) + " paths");
}

// The dt 2^{-k} levels a rule can produce, prepared ahead of the run.
void prepare_levels(const SubordinatorSampler& sampler, const StepRule& step) {
  if (!(step.dt > 0)) throw DomainError("dt must be positive");
  if (!sampler.needs_tables()) return;
  sampler.prepare(step.dt);
}

// Tables for adaptive levels are built on first use.
double draw(const SubordinatorSampler& sampler, double dt, RandomSource& src) {
  if (sampler.needs_tables()) sampler.prepare(dt);
  return sampler.sample(dt, src);
}

}  // namespace

// ----------------------------------------------------------- exit: ball

json ExitBallResult::to_json() const {
  return {{"mean_exit_time", mean_exit_time.to_json()},
          {"exit_positions", exit_positions.size()},
          {"horizon_exhausted", horizon_exhausted}};
}

ExitBallResult mc_exit_ball(const BernsteinSpec& spec, const SubordinatorSampler& sampler, int d,
                            const Point& center, double radius, const Point& x, std::size_t n,
                            const StepRule& step, const McConfig& mc, bool richardson,
                            double max_time) {
  require_point(d, center, "center");
  require_point(d, x, "x");
  require_n(n, 100);
  if (!(radius > 0)) throw DomainError("radius must be positive");
  auto dist_c = [&](const Point& p) {
    double s = 0;
    for (int k = 0; k < d; ++k) s += (p[k] - center[k]) * (p[k] - center[k]);
    return std::sqrt(s);
  };
  if (!(dist_c(x) < radius)) throw DomainError("start point must lie inside the ball");
  if (max_time <= 0) max_time = 1000 * capital_phi(spec, radius);
  const bool rich = richardson && !step.adaptive;
  const int levels = rich ? 3 : 1;
  const double h = rich ? step.dt / 4 : step.dt;
  prepare_levels(sampler, step);
  if (sampler.needs_tables()) sampler.prepare(h);

  ExitBallResult res;
  res.exit_positions.assign(n, Point());
  // acc: per level sum, sum^2; then (tau_dt - tau_dt/2), (tau_dt/2 - tau_dt/4) sums and squares; exhausted
  const std::size_t W = 2 * 3 + 4 + 1;
  auto acc = run_paths(n, W, mc, [&](std::size_t i, RandomSource& src, double* a) {
    Point p = x;
    double t = 0;
    std::array<double, 3> tau{-1, -1, -1};
    bool exhausted = false;
    for (std::size_t k = 1;; ++k) {
      const double dtk = rich ? h : step.step(spec, radius - dist_c(p));
      const double ds = draw(sampler, dtk, src);
      brownian_step(p, ds, src);
      t += dtk;
      const bool out = !(dist_c(p) < radius);
      if (out) {
        // level 0: every step; level 1: every 2nd; level 2: every 4th
        for (int l = 0; l < levels; ++l)
          if (tau[l] < 0 && k % (std::size_t(1) << l) == 0) {
            tau[l] = t;
            if (l == levels - 1) res.exit_positions[i] = p;
          }
      }
      if (tau[levels - 1] >= 0) break;
      if (t > max_time) {
        exhausted = true;
        for (int l = 0; l < levels; ++l)
          if (tau[l] < 0) tau[l] = t;
        res.exit_positions[i] = p;
        break;
      }
    }
    for (int l = 0; l < levels; ++l) {
      a[2 * l] += tau[l];
      a[2 * l + 1] += tau[l] * tau[l];
    }
    if (rich) {
      const double b1 = tau[2] - tau[1], b2 = tau[1] - tau[0];
      a[6] += b1;
      a[7] += b1 * b1;
      a[8] += b2;
      a[9] += b2 * b2;
    }
    a[10] += exhausted;
  });
  res.horizon_exhausted = static_cast<std::size_t>(acc[10]);
  const int base = levels - 1;
  res.mean_exit_time = from_sums(acc[2 * base], acc[2 * base + 1], n);
  if (rich) {
    BiasNote b;
    b.steps = {step.dt, step.dt / 2, step.dt / 4};
    b.means = {acc[4] / n, acc[2] / n, acc[0] / n};
    const auto e1 = from_sums(acc[6], acc[7], n), e2 = from_sums(acc[8], acc[9], n);
    b.bias_dt = e1.value;
    b.bias_dt_se = e1.std_error;
    b.bias_dt_half = e2.value;
    b.bias_dt_half_se = e2.std_error;
    b.shrink = b.bias_dt_half != 0 ? b.bias_dt / b.bias_dt_half : 0;
    b.extrapolated = 2 * b.means[1] - b.means[0];
    res.mean_exit_time.bias_note = b;
  }
  if (res.horizon_exhausted * 1000 > n)
    throw ConvergenceError(std::to_string(res.horizon_exhausted) + " of " + std::to_string(n) +
                           " paths did not exit the ball by t=" + fmt_double(max_time));
  return res;
}

json ExitDensityReport::to_json() const {
  json rows = json::array();
  for (const auto& s : shells)
    rows.push_back({{"r_lo", s.r_lo},
                    {"r_hi", s.r_hi},
                    {"hits", s.hits},
                    {"density", s.density},
                    {"density_se", s.density_se},
                    {"lower_comparator", s.lower_comparator},
                    {"upper_comparator", s.upper_comparator},
                    {"ratio_lower", s.ratio_lower},
                    {"ratio_upper", s.ratio_upper},
                    {"underfilled", s.underfilled}});
  return {{"shells", rows}, {"c1", c1}, {"c2", c2}, {"underfilled", underfilled},
          {"exit", exit.to_json()}};
}

ExitDensityReport mc_exit_density_check(const BernsteinSpec& spec,
                                        const SubordinatorSampler& sampler, int d, double radius,
                                        std::size_t n, const StepRule& step, const McConfig& mc,
                                        std::vector<double> edges, std::size_t min_hits) {
  if (edges.empty()) edges = log_grid(1, 10, 15);
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (!(edges[i] >= 1) || (i && !(edges[i] > edges[i - 1])))
      throw DomainError("shell edges must be increasing and at least 1 (units of the radius)");
  Point c(d, 0.0);
  ExitDensityReport rep;
  rep.exit = mc_exit_ball(spec, sampler, d, c, radius, c, n, step, mc, false);
  std::vector<std::size_t> hits(edges.size() - 1, 0);
  for (const auto& p : rep.exit.exit_positions) {
    double s = 0;
    for (double v : p) s += v * v;
    const double r = std::sqrt(s) / radius;
    const auto it = std::upper_bound(edges.begin(), edges.end(), r);
    if (it == edges.begin() || it == edges.end()) continue;
    ++hits[it - edges.begin() - 1];
  }
  const double norm = spec(1 / (radius * radius));
  rep.c2 = std::numeric_limits<double>::infinity();
  rep.c1 = 0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    ShellRow row;
    row.r_lo = edges[k] * radius;
    row.r_hi = edges[k + 1] * radius;
    row.hits = hits[k];
    const double vol = sphere_area(d) / d * (std::pow(row.r_hi, d) - std::pow(row.r_lo, d));
    const double p = static_cast<double>(row.hits) / n;
    row.density = p / vol;
    row.density_se = std::sqrt(p * (1 - p) / (n - 1)) / vol;
    // comparators at the geometric shell centre
    const double rm = std::sqrt(row.r_lo * row.r_hi);
    row.lower_comparator = jump_density_j(spec, d, rm) / norm;
    row.upper_comparator = jump_density_j(spec, d, std::max(rm - radius, 1e-12 * radius)) / norm;
    row.ratio_lower = row.density / row.lower_comparator;
    row.ratio_upper = row.density / row.upper_comparator;
    row.underfilled = row.hits < min_hits;
    if (row.underfilled) {
      ++rep.underfilled;
    } else {
      rep.c2 = std::min(rep.c2, row.ratio_lower);
      rep.c1 = std::max(rep.c1, row.ratio_upper);
    }
    rep.shells.push_back(row);
  }
  if (!std::isfinite(rep.c2)) rep.c2 = 0;
  return rep;
}

// ---------------------------------------------------------- half-space

namespace {

// Runs the killed path to time t with adaptive steps; returns whether it
// survived, leaving the final position in p.
bool run_killed(const BernsteinSpec& spec, const SubordinatorSampler& sampler, const StepRule& step,
                double t, Point& p, RandomSource& src) {
  double s = 0;
  while (s < t * (1 - 1e-12)) {
    double dtk = std::min(step.step(spec, p.back()), t - s);
    if (t - s - dtk < 1e-12 * t) dtk = t - s;
    // the last step may be a remainder; sample it exactly when possible
    double ds;
    if (sampler.needs_tables() && std::fabs(dtk - step.step(spec, p.back())) > 1e-12 * dtk) {
      // split the remainder into table levels dt 2^{-k}
      ds = 0;
      double rest = dtk;
      double lvl = step.step(spec, p.back());
      while (rest > 1e-12 * t) {
        while (lvl > rest * (1 + 1e-12)) lvl *= 0.5;
        ds += draw(sampler, lvl, src);
        rest -= lvl;
        if (lvl < std::ldexp(step.dt, -step.max_halvings)) break;
      }
    } else {
      ds = draw(sampler, dtk, src);
    }
    brownian_step(p, ds, src);
    s += dtk;
    if (!(p.back() > 0)) return false;
  }
  return true;
}

}  // namespace

McEstimate mc_survival_half_space(const BernsteinSpec& spec, const SubordinatorSampler& sampler,
                                  int d, const Point& x, double t, std::size_t n,
                                  const StepRule& step, const McConfig& mc) {
  require_point(d, x, "x");
  require_n(n, 2);
  if (!(x.back() > 0)) throw DomainError("start point must satisfy x_d > 0");
  if (!(t > 0)) throw DomainError("t must be positive");
  prepare_levels(sampler, step);
  auto acc = run_paths(n, 1, mc, [&](std::size_t, RandomSource& src, double* a) {
    Point p = x;
    a[0] += run_killed(spec, sampler, step, t, p, src);
  });
  return from_sums(acc[0], acc[0], n);
}

bool Box::contains(const Point& p) const {
  for (std::size_t k = 0; k < p.size(); ++k)
    if (!(p[k] >= lo[k] && p[k] < hi[k])) return false;
  return true;
}

double Box::volume() const {
  double v = 1;
  for (std::size_t k = 0; k < lo.size(); ++k) v *= hi[k] - lo[k];
  return v;
}

Point Box::center() const {
  Point c(lo.size());
  for (std::size_t k = 0; k < lo.size(); ++k) c[k] = 0.5 * (lo[k] + hi[k]);
  return c;
}

json HalfSpaceHkResult::to_json() const {
  json rows = json::array();
  for (const auto& c : cells)
    rows.push_back({{"lo", c.cell.lo},
                    {"hi", c.cell.hi},
                    {"hits", c.hits},
                    {"p_hat", c.p_hat.value},
                    {"p_hat_se", c.p_hat.std_error},
                    {"estimate", c.estimate},
                    {"ratio", c.ratio},
                    {"usable", c.usable}});
  return {{"survival", survival.to_json()}, {"cells", rows}};
}

HalfSpaceHkResult mc_half_space_heat_kernel(const BernsteinSpec& spec,
                                            const SubordinatorSampler& sampler, int d, double t,
                                            const Point& x, const std::vector<Box>& cells,
                                            std::size_t n, const StepRule& step,
                                            const McConfig& mc, std::size_t min_hits) {
  require_point(d, x, "x");
  require_n(n, 2);
  if (!(x.back() > 0)) throw DomainError("start point must satisfy x_d > 0");
  if (!(t > 0)) throw DomainError("t must be positive");
  for (const auto& c : cells) {
    require_point(d, c.lo, "cell corner");
    require_point(d, c.hi, "cell corner");
    if (!(c.lo.back() >= 0) || !(c.volume() > 0))
      throw DomainError("cells must be nonempty boxes inside the half-space");
  }
  prepare_levels(sampler, step);
  const std::size_t m = cells.size();
  auto acc = run_paths(n, 1 + m, mc, [&](std::size_t, RandomSource& src, double* a) {
    Point p = x;
    if (!run_killed(spec, sampler, step, t, p, src)) return;
    a[0] += 1;
    for (std::size_t k = 0; k < m; ++k)
      if (cells[k].contains(p)) {
        a[1 + k] += 1;
        break;
      }
  });
  HalfSpaceHkResult res;
  res.survival = from_sums(acc[0], acc[0], n);
  for (std::size_t k = 0; k < m; ++k) {
    CellEstimate c;
    c.cell = cells[k];
    c.hits = static_cast<std::size_t>(acc[1 + k]);
    const double vol = cells[k].volume();
    auto e = from_sums(acc[1 + k], acc[1 + k], n);
    e.value /= vol;
    e.std_error /= vol;
    c.p_hat = e;
    c.estimate = half_space_hk_estimate(spec, d, t, x, cells[k].center());
    c.ratio = c.p_hat.value / c.estimate;
    c.usable = c.hits >= min_hits;
    res.cells.push_back(c);
  }
  return res;
}

// ------------------------------------------------------------------ BHP

json HarmonicRatioResult::to_json() const {
  json j{{"u_a_x", u_a_x.to_json()},
         {"u_a_y", u_a_y.to_json()},
         {"single_ratio", single_ratio.to_json()},
         {"comparator", comparator},
         {"min_hits", min_hits},
         {"degenerate", degenerate},
         {"horizon_exhausted", horizon_exhausted}};
  if (u_b_x) j["u_b_x"] = u_b_x->to_json();
  if (u_b_y) j["u_b_y"] = u_b_y->to_json();
  j["double_ratio"] = double_ratio ? double_ratio->to_json() : json(nullptr);
  return j;
}

namespace {

double dist_to_complement(const Box& b, const Point& p) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p.size(); ++k) m = std::min({m, p[k] - b.lo[k], b.hi[k] - p[k]});
  return m;
}

double default_window_time(const BernsteinSpec& spec, const Box& window) {
  double diam = 0;
  for (std::size_t k = 0; k < window.lo.size(); ++k)
    diam = std::max(diam, window.hi[k] - window.lo[k]);
  return 1000 * capital_phi(spec, diam);
}

}  // namespace

json WindowExit::to_json() const {
  json t = json::array();
  for (const auto& e : targets) t.push_back(e.to_json());
  return {{"start", start}, {"hits", hits}, {"targets", t}, {"horizon_exhausted", horizon_exhausted}};
}

WindowExit mc_window_exit(const BernsteinSpec& spec, const SubordinatorSampler& sampler, int d,
                          const Box& window, const Point& z, const std::vector<Box>& targets,
                          std::size_t n, const StepRule& step, const McConfig& mc,
                          double max_time) {
  require_point(d, z, "start point");
  require_point(d, window.lo, "window corner");
  require_point(d, window.hi, "window corner");
  require_n(n, 2);
  if (!window.contains(z)) throw DomainError("start point must lie in the window");
  for (const auto& t : targets) {
    require_point(d, t.lo, "target corner");
    require_point(d, t.hi, "target corner");
    bool disjoint = false;
    for (int k = 0; k < d; ++k)
      if (t.hi[k] <= window.lo[k] || t.lo[k] >= window.hi[k]) disjoint = true;
    if (!disjoint) throw DomainError("target sets must lie outside the window");
  }
  if (max_time <= 0) max_time = default_window_time(spec, window);
  prepare_levels(sampler, step);
  const std::size_t m = targets.size();
  auto acc = run_paths(n, m + 1, mc, [&](std::size_t, RandomSource& src, double* a) {
    Point p = z;
    double t = 0;
    for (;;) {
      const double dtk = step.step(spec, dist_to_complement(window, p));
      brownian_step(p, draw(sampler, dtk, src), src);
      t += dtk;
      if (!window.contains(p)) break;
      if (t > max_time) {
        a[m] += 1;
        return;
      }
    }
    for (std::size_t k = 0; k < m; ++k)
      if (targets[k].contains(p)) a[k] += 1;
  });
  WindowExit w;
  w.start = z;
  w.n = n;
  for (std::size_t k = 0; k < m; ++k) {
    w.hits.push_back(static_cast<std::size_t>(acc[k]));
    w.targets.push_back(from_sums(acc[k], acc[k], n));
  }
  w.horizon_exhausted = static_cast<std::size_t>(acc[m]);
  if (w.horizon_exhausted * 1000 > n)
    throw ConvergenceError(std::to_string(w.horizon_exhausted) + " of " + std::to_string(n) +
                           " paths did not leave the window by t=" + fmt_double(max_time));
  return w;
}

HarmonicRatioResult harmonic_ratio(const BernsteinSpec& spec, const WindowExit& ex_x,
                                   const WindowExit& ex_y, std::size_t min_hits) {
  const std::size_t m = ex_x.targets.size();
  if (m < 1 || m > 2 || ex_y.targets.size() != m)
    throw DomainError("harmonic ratio needs one or two targets, the same for x and y");
  HarmonicRatioResult res;
  res.horizon_exhausted = ex_x.horizon_exhausted + ex_y.horizon_exhausted;
  res.u_a_x = ex_x.targets[0];
  res.u_a_y = ex_y.targets[0];
  std::vector<std::size_t> counts{ex_x.hits[0], ex_y.hits[0]};
  if (m == 2) {
    res.u_b_x = ex_x.targets[1];
    res.u_b_y = ex_y.targets[1];
    counts.push_back(ex_x.hits[1]);
    counts.push_back(ex_y.hits[1]);
  }
  res.min_hits = *std::min_element(counts.begin(), counts.end());
  res.degenerate = res.min_hits < min_hits;
  res.comparator = bhp_decay_comparator(spec, ex_x.start.back(), ex_y.start.back());

  auto rel2 = [](const McEstimate& e) {
    return e.value > 0 ? std::pow(e.std_error / e.value, 2) : std::numeric_limits<double>::infinity();
  };
  res.single_ratio.n = std::min(ex_x.n, ex_y.n);
  res.single_ratio.value = res.u_a_y.value > 0 ? res.u_a_x.value / res.u_a_y.value : 0;
  res.single_ratio.std_error = res.single_ratio.value * std::sqrt(rel2(res.u_a_x) + rel2(res.u_a_y));
  if (m == 2) {
    McEstimate dr;
    dr.n = res.single_ratio.n;
    const double num = res.u_a_x.value * res.u_b_y->value;
    const double den = res.u_a_y.value * res.u_b_x->value;
    dr.value = den > 0 ? num / den : 0;
    // A and B counts from one start are multinomial: var log(pA/pB) = (1/pA + 1/pB)/n
    auto term = [](std::size_t ca, std::size_t cb) {
      return ca > 0 && cb > 0 ? 1.0 / ca + 1.0 / cb : std::numeric_limits<double>::infinity();
    };
    dr.std_error = dr.value * std::sqrt(term(ex_x.hits[0], ex_x.hits[1]) + term(ex_y.hits[0], ex_y.hits[1]));
    res.double_ratio = dr;
  }
  return res;
}

HarmonicRatioResult mc_harmonic_ratio_bhp(const BernsteinSpec& spec,
                                          const SubordinatorSampler& sampler, int d,
                                          const Box& window, const Point& x, const Point& y,
                                          const Box& target_a, const std::optional<Box>& target_b,
                                          std::size_t n, const StepRule& step, const McConfig& mc,
                                          double max_time, std::size_t min_hits) {
  if (!(x.back() > 0) || !(y.back() > 0))
    throw DomainError("x and y must lie inside the half-space");
  std::vector<Box> targets{target_a};
  if (target_b) targets.push_back(*target_b);
  McConfig cx = mc, cy = mc;
  cx.substream = 2 * mc.substream;
  cy.substream = 2 * mc.substream + 1;
  const auto ex = mc_window_exit(spec, sampler, d, window, x, targets, n, step, cx, max_time);
  const auto ey = mc_window_exit(spec, sampler, d, window, y, targets, n, step, cy, max_time);
  return harmonic_ratio(spec, ex, ey, min_hits);
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw DomainError("spearman needs two equal samples");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * (i + j) + 1;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = a.size(), mean = (n + 1) / 2;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0;
}

}  // namespace sbm
