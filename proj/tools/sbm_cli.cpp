#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sbm/bernstein.hpp"
#include "sbm/errors.hpp"
#include "sbm/io.hpp"
#include "sbm/kernels.hpp"
#include "sbm/laplace.hpp"
#include "sbm/renewal.hpp"
#include "sbm/simulate.hpp"
#include "sbm/verify.hpp"

namespace fs = std::filesystem;
using namespace sbm;

namespace {

struct Global {
  std::string spec_file;
  std::string family;
  std::vector<std::string> params;
  bool no_normalize = false;
  int d = 1;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::string output_dir;
  // quadrature overrides
  std::string inversion = "talbot";
  int talbot_nodes = 32;
  int gs_order = 32;
  double rel_tol = 1e-8;
  bool exact_densities = false;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_grid(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3) throw UsageError("grid must be lo:hi:points_per_decade, got '" + s + "'");
  double lo, hi, ppd;
  try {
    lo = std::stod(parts[0]);
    hi = std::stod(parts[1]);
    ppd = std::stod(parts[2]);
  } catch (const std::exception&) {
    throw UsageError("grid must be lo:hi:points_per_decade, got '" + s + "'");
  }
  if (!(lo > 0) || !(hi >= lo) || !(ppd > 0))
    throw UsageError("grid needs 0 < lo <= hi and points_per_decade > 0");
  return log_grid(lo, hi, ppd);
}

json spec_json(const Global& g) {
  if (!g.spec_file.empty()) {
    auto text = read_file(g.spec_file);
    if (!text) throw UsageError("cannot read spec file '" + g.spec_file + "'");
    try {
      return json::parse(*text);
    } catch (const json::parse_error& e) {
      throw UsageError("spec file '" + g.spec_file + "' is not valid JSON: " + e.what());
    }
  }
  if (g.family.empty()) return BernsteinSpec::pure_power(1).to_json();
  json j = {{"family", g.family}, {"params", json::object()}};
  if (g.no_normalize) j["normalize"] = false;
  for (const auto& kv : g.params) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--param expects name=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (g.family == "custom" && key == "evaluator") {
      j["evaluator"] = val;
      continue;
    }
    try {
      j["params"][key] = std::stod(val);
    } catch (const std::exception&) {
      throw UsageError("parameter '" + key + "' must be numeric");
    }
  }
  return j;
}

QuadratureConfig quad_config(const Global& g) {
  QuadratureConfig c;
  c.inversion_method = inversion_method_from_string(g.inversion);
  c.talbot_nodes = g.talbot_nodes;
  c.gaver_stehfest_order = g.gs_order;
  c.rel_tol = g.rel_tol;
  c.exact_densities = g.exact_densities;
  c.validate();
  return c;
}

json quad_json(const QuadratureConfig& c) {
  return {{"inversion_method", to_string(c.inversion_method)},
          {"talbot_nodes", c.talbot_nodes},
          {"gaver_stehfest_order", c.gaver_stehfest_order},
          {"rel_tol", c.rel_tol},
          {"exact_densities", c.exact_densities}};
}

// Output sink: a file under --output-dir, else stdout.
void emit(const Global& g, const std::string& name, const std::string& content) {
  if (g.output_dir.empty()) {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << '\n';
    return;
  }
  fs::create_directories(g.output_dir);
  write_file_atomic(fs::path(g.output_dir) / name, content);
}

void write_run_config(const Global& g, const std::string& command, const json& spec,
                      const QuadratureConfig& qc, const json& params) {
  if (g.output_dir.empty()) return;
  json rc = {{"command", command}, {"spec", spec},         {"d", g.d},
             {"seed", g.seed},     {"output_dir", g.output_dir}, {"quadrature", quad_json(qc)},
             {"params", params}};
  fs::create_directories(g.output_dir);
  write_file_atomic(fs::path(g.output_dir) / "run_config.json", rc.dump(2) + "\n");
}

json run_config_schema() {
  json num = {{"type", "number"}};
  json integer = {{"type", "integer"}};
  json spec = {
      {"type", "object"},
      {"required", {"family"}},
      {"properties",
       {{"family", {{"type", "string"}, {"enum", family_names()}}},
        {"params", {{"type", "object"}, {"additionalProperties", num}}},
        {"normalize", {{"type", "boolean"}}},
        {"evaluator", {{"type", "string"}, {"enum", builtin_custom_names()}}},
        {"derived", {{"type", "string"}, {"enum", {"conjugate", "rescale"}}}},
        {"of", {{"type", "object"}}},
        {"a", num}}}};
  json quad = {{"type", "object"},
               {"properties",
                {{"inversion_method", {{"type", "string"}, {"enum", {"talbot", "gaver_stehfest"}}}},
                 {"talbot_nodes", integer},
                 {"gaver_stehfest_order", integer},
                 {"rel_tol", num},
                 {"exact_densities", {{"type", "boolean"}}}}}};
  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"title", "RunConfig"},
          {"type", "object"},
          {"required", {"command", "spec", "d", "seed"}},
          {"properties",
           {{"command",
             {{"type", "string"},
              {"enum",
               {"eval", "certify", "simulate exit-ball", "simulate exit-density",
                "simulate survival", "simulate half-space-hk", "simulate bhp", "verify"}}}},
            {"spec", spec},
            {"d", {{"type", "integer"}, {"minimum", 1}}},
            {"seed", {{"type", "integer"}, {"minimum", 0}}},
            {"output_dir", {{"type", "string"}}},
            {"quadrature", quad},
            {"params", {{"type", "object"}}}}}};
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  std::string fn;
  std::string grid = "1e-3:1e3:8";
  double t = 1;
};

void cmd_eval(const Global& g, const EvalOpts& o) {
  const json sj = spec_json(g);
  const BernsteinSpec spec = BernsteinSpec::from_json(sj);
  const QuadratureConfig qc = quad_config(g);
  const auto grid = parse_grid(o.grid);
  const std::string& fn = o.fn;
  if (g.d < 1) throw UsageError("--d must be at least 1");

  std::optional<CsvWriter> csv;
  auto value_rows = [&](const std::string& x, auto f) {
    csv.emplace(std::vector<std::string>{x, "value"});
    for (double v : grid) csv->row_numbers({v, f(v)});
  };
  auto ratio_rows = [&](const std::string& x, auto f, auto est) {
    csv.emplace(std::vector<std::string>{x, "value", "estimate", "ratio"});
    for (double v : grid) {
      const double a = f(v), b = est(v);
      csv->row_numbers({v, a, b, a / b});
    }
  };
  auto renewal = [&] { return renewal_table(spec, RenewalOptions{}, qc); };
  auto v_estimate = [&](double r) { return 1 / std::sqrt(spec(1 / (r * r))); };

  if (fn == "phi") {
    value_rows("lambda", [&](double l) { return spec(l); });
  } else if (fn == "phi_prime") {
    value_rows("lambda", [&](double l) { return spec.derivative(l); });
  } else if (fn == "capital_phi") {
    value_rows("r", [&](double r) { return capital_phi(spec, r); });
  } else if (fn == "capital_phi_inv") {
    value_rows("t", [&](double t) { return capital_phi_inv(spec, t, qc); });
  } else if (fn == "chi") {
    value_rows("lambda", [&](double l) { return ladder_exponent_chi(spec, l, qc); });
  } else if (fn == "V") {
    auto tab = renewal();
    ratio_rows("r", [&](double r) { return tab(r); }, v_estimate);
  } else if (fn == "mu") {
    ratio_rows("t", [&](double t) { return levy_density_mu(spec, t, qc).value; },
               [&](double t) { return spec(1 / t) / t; });
  } else if (fn == "u") {
    ratio_rows("t", [&](double t) { return potential_density_u(spec, t, qc).value; },
               [&](double t) { return 1 / (t * spec(1 / t)); });
  } else if (fn == "j") {
    ratio_rows("r", [&](double r) { return jump_density_j(spec, g.d, r, qc); },
               [&](double r) { return j_estimate(spec, g.d, r); });
  } else if (fn == "g") {
    auto tr = check_transience(spec, g.d);
    if (!tr.transient()) throw DomainError("g is undefined: " + tr.reason);
    ratio_rows("r", [&](double r) { return green_radial_g(spec, g.d, r, qc); },
               [&](double r) { return g_estimate(spec, g.d, r); });
  } else if (fn == "p") {
    if (!(o.t > 0)) throw UsageError("--t must be positive");
    csv.emplace(std::vector<std::string>{"t", "r", "value", "estimate", "ratio"});
    for (double r : grid) {
      const double a = free_heat_kernel(spec, g.d, o.t, r, qc).value;
      const double b = p_estimate(spec, g.d, o.t, r);
      csv->row_numbers({o.t, r, a, b, a / b});
    }
  } else if (fn == "estimates") {
    const bool transient = check_transience(spec, g.d).transient();
    auto tab = renewal();
    std::vector<std::string> head = {"r", "j", "j_estimate", "j_ratio", "V", "V_estimate", "V_ratio"};
    if (transient) head.insert(head.end(), {"g", "g_estimate", "g_ratio"});
    csv.emplace(head);
    for (double r : grid) {
      const double j = jump_density_j(spec, g.d, r, qc), je = j_estimate(spec, g.d, r);
      const double v = tab(r), ve = v_estimate(r);
      std::vector<double> row = {r, j, je, j / je, v, ve, v / ve};
      if (transient) {
        const double gv = green_radial_g(spec, g.d, r, qc), ge = g_estimate(spec, g.d, r);
        row.insert(row.end(), {gv, ge, gv / ge});
      }
      csv->row_numbers(row);
    }
  } else {
    throw UsageError("unknown --fn '" + fn + "'");
  }
  write_run_config(g, "eval", sj, qc, {{"fn", fn}, {"grid", o.grid}, {"t", o.t}});
  emit(g, fn + ".csv", csv->str());
}

// ---------------------------------------------------------------- certify

void cmd_certify(const Global& g, double decades, double ppd) {
  const json sj = spec_json(g);
  const BernsteinSpec spec = BernsteinSpec::from_json(sj);
  const QuadratureConfig qc = quad_config(g);
  ScalingOptions so;
  so.points_per_decade = ppd;
  const ScalingCertificate cert = certify(spec, decades, so);
  json out = cert.to_json();
  out["spec"] = sj;
  write_run_config(g, "certify", sj, qc, {{"decades", decades}, {"points_per_decade", ppd}});
  emit(g, "certificate.json", out.dump(2) + "\n");
}

// ---------------------------------------------------------------- simulate

struct SimOpts {
  std::size_t n = 10000;
  double dt = 0;  // 0: from resolution
  double resolution = 200;
  bool adaptive = false;
  bool richardson = true;
  double radius = 1;
  double t = 1;
  std::vector<double> xd = {0.05, 0.2, 1, 5};
  std::size_t cells = 40;
  double x = 1e-3, y = 4e-3;
  std::string sampler;
};

void check_n(std::size_t n) {
  if (n < 100) throw UsageError("--n must be at least 100, got " + std::to_string(n));
}

void cmd_simulate(const Global& g, const std::string& what, const SimOpts& o) {
  check_n(o.n);
  const json sj = spec_json(g);
  const BernsteinSpec spec = BernsteinSpec::from_json(sj);
  const QuadratureConfig qc = quad_config(g);
  if (g.d < 1) throw UsageError("--d must be at least 1");
  SamplerOptions so;
  so.cfg = qc;
  if (!o.sampler.empty()) so.strategy = sampler_strategy_from_string(o.sampler);
  const auto sampler = SubordinatorSampler::make(spec, so);
  McConfig mc;
  mc.seed = g.seed;
  mc.workers = g.workers;

  auto step_for = [&](double scale, bool adaptive) {
    StepRule s;
    s.dt = o.dt > 0 ? o.dt : default_dt(spec, scale, o.resolution);
    s.adaptive = adaptive;
    s.resolution = std::min(o.resolution, 50.0);
    return s;
  };
  json params = {{"what", what},         {"n", o.n},          {"dt", o.dt},
                 {"resolution", o.resolution}, {"sampler", sampler.describe()}};
  json summary;
  std::optional<CsvWriter> csv;
  Point origin(g.d, 0.0);
  auto start = [&](double xd) {
    Point p(g.d, 0.0);
    p.back() = xd;
    return p;
  };

  if (what == "exit-ball") {
    if (!(o.radius > 0)) throw UsageError("--radius must be positive");
    params["radius"] = o.radius;
    params["richardson"] = o.richardson;
    auto res = mc_exit_ball(spec, sampler, g.d, origin, o.radius, origin, o.n,
                            step_for(o.radius, false), mc, o.richardson);
    summary = res.to_json();
  } else if (what == "exit-density") {
    params["radius"] = o.radius;
    auto rep = mc_exit_density_check(spec, sampler, g.d, o.radius, o.n, step_for(o.radius, false), mc);
    summary = rep.to_json();
    csv.emplace(std::vector<std::string>{"r_lo", "r_hi", "hits", "density", "density_se",
                                         "lower_comparator", "upper_comparator"});
    for (const auto& s : rep.shells)
      csv->row_numbers({s.r_lo, s.r_hi, double(s.hits), s.density, s.density_se,
                        s.lower_comparator, s.upper_comparator});
  } else if (what == "survival") {
    params["t"] = o.t;
    params["xd"] = o.xd;
    summary = json::array();
    csv.emplace(std::vector<std::string>{"x_d", "survival", "std_error", "boundary_factor"});
    for (double xd : o.xd) {
      auto est = mc_survival_half_space(spec, sampler, g.d, start(xd), o.t, o.n,
                                        step_for(capital_phi_inv(spec, o.t, qc), true), mc);
      summary.push_back({{"x_d", xd}, {"survival", est.to_json()}});
      csv->row_numbers({xd, est.value, est.std_error, boundary_factor(spec, o.t, xd)});
    }
  } else if (what == "half-space-hk") {
    if (o.cells < 1) throw UsageError("--cells must be positive");
    params["t"] = o.t;
    params["xd"] = o.xd;
    params["cells"] = o.cells;
    const double s = capital_phi_inv(spec, o.t, qc);
    const auto edges = log_grid(0.02 * s, 20 * s, (o.cells) / 3.0);
    std::vector<Box> boxes;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      Box b{Point(g.d, -0.25 * s), Point(g.d, 0.25 * s)};
      b.lo.back() = edges[i];
      b.hi.back() = edges[i + 1];
      boxes.push_back(b);
    }
    summary = json::array();
    csv.emplace(std::vector<std::string>{"x_d", "y_lo", "y_hi", "hits", "p_hat", "p_hat_se",
                                         "estimate", "ratio", "usable"});
    for (double xd : o.xd) {
      auto res = mc_half_space_heat_kernel(spec, sampler, g.d, o.t, start(xd), boxes, o.n,
                                           step_for(s, true), mc);
      summary.push_back({{"x_d", xd}, {"result", res.to_json()}});
      for (const auto& c : res.cells)
        csv->row_numbers({xd, c.cell.lo.back(), c.cell.hi.back(), double(c.hits), c.p_hat.value,
                          c.p_hat.std_error, c.estimate, c.ratio, c.usable ? 1.0 : 0.0});
    }
  } else if (what == "bhp") {
    if (!(o.x > 0 && o.y > 0 && o.x < o.radius && o.y < o.radius))
      throw UsageError("bhp needs 0 < x, y < radius");
    params["x"] = o.x;
    params["y"] = o.y;
    params["radius"] = o.radius;
    Box window{Point(g.d, -o.radius), Point(g.d, o.radius)};
    window.lo.back() = 0;
    Box target{Point(g.d, -INFINITY), Point(g.d, INFINITY)};
    target.lo.back() = o.radius;
    StepRule step = step_for(o.radius, true);
    step.resolution = std::min(o.resolution, 10.0);
    auto res = mc_harmonic_ratio_bhp(spec, sampler, g.d, window, start(o.x), start(o.y), target,
                                     std::nullopt, o.n, step, mc);
    summary = res.to_json();
  } else {
    throw UsageError("unknown simulation '" + what + "'");
  }
  write_run_config(g, "simulate " + what, sj, qc, params);
  json out = {{"spec", sj}, {"d", g.d}, {"seed", g.seed}, {"params", params}, {"result", summary}};
  emit(g, what + ".json", out.dump(2) + "\n");
  if (csv && !g.output_dir.empty()) emit(g, what + ".csv", csv->str());
}

// ---------------------------------------------------------------- verify

struct VerifyOpts {
  std::string stage = "all";
  bool inject = false;
  double r_min = 1e-3, r_max = 1e3, ppd = 8;
  std::size_t n_exit = 20000, n_half_space = 100000, n_bhp = 20000;
};

int cmd_verify(const Global& g, const VerifyOpts& o) {
  const json sj = spec_json(g);
  const BernsteinSpec spec = BernsteinSpec::from_json(sj);
  SuiteConfig c;
  c.cfg = quad_config(g);
  if (o.stage == "quadrature") {
    c.monte_carlo = false;
  } else if (o.stage == "monte-carlo") {
    c.quadrature = false;
  } else if (o.stage != "all") {
    throw UsageError("--stage must be quadrature, monte-carlo or all");
  }
  if (!(o.r_min > 0 && o.r_max > o.r_min && o.ppd > 0)) throw UsageError("bad r grid");
  check_n(o.n_exit);
  check_n(o.n_half_space);
  check_n(o.n_bhp);
  c.r_min = o.r_min;
  c.r_max = o.r_max;
  c.points_per_decade = o.ppd;
  c.n_exit = o.n_exit;
  c.n_half_space = o.n_half_space;
  c.n_bhp = o.n_bhp;
  c.seed = g.seed;
  c.workers = g.workers;
  c.inject_wrong_exponent = o.inject;
  if (g.d < 1) throw UsageError("--d must be at least 1");

  const SuiteBundle b = run_suite(spec, g.d, c);
  write_run_config(g, "verify", sj, c.cfg, c.to_json());
  if (!g.output_dir.empty()) b.write(g.output_dir);
  for (const auto& k : b.checks)
    std::cerr << to_string(k.status) << "  " << k.name << ": " << k.message << "\n";
  if (g.output_dir.empty()) std::cout << b.summary().dump(2) << "\n";
  if (!b.passed()) {
    std::string names;
    for (const auto& n : b.failed_checks()) names += (names.empty() ? "" : ", ") + n;
    std::cerr << "verification failed: " << names << "\n";
    return exit_verification_failed;
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subordinate Brownian motion numerics: evaluate, certify, simulate, verify"};
  app.require_subcommand(0, 1);
  Global g;
  bool schema = false;

  app.add_flag("--schema", schema, "Print the RunConfig JSON schema and exit");
  app.add_option("--spec", g.spec_file, "BernsteinSpec JSON file");
  app.add_option("--family", g.family, "Family name, instead of --spec");
  app.add_option("--param", g.params, "Family parameter name=value (repeatable)");
  app.add_flag("--no-normalize", g.no_normalize, "Keep the raw family scale");
  app.add_option("--d", g.d, "Dimension")->capture_default_str();
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--workers", g.workers, "Worker threads (0: available parallelism)")
      ->capture_default_str();
  app.add_option("--output-dir", g.output_dir, "Write outputs here instead of stdout");
  app.add_option("--inversion", g.inversion, "talbot or gaver_stehfest")->capture_default_str();
  app.add_option("--talbot-nodes", g.talbot_nodes)->capture_default_str();
  app.add_option("--gs-order", g.gs_order)->capture_default_str();
  app.add_option("--rel-tol", g.rel_tol)->capture_default_str();
  app.add_flag("--exact-densities", g.exact_densities,
               "Invert at every quadrature node instead of interpolating");
  app.fallthrough();

  EvalOpts eo;
  auto* eval = app.add_subcommand("eval", "Evaluate a function over a log grid (CSV)");
  eval->add_option("--fn", eo.fn,
                   "phi, phi_prime, capital_phi, capital_phi_inv, chi, V, mu, u, j, g, p, estimates")
      ->required();
  eval->add_option("--grid", eo.grid, "lo:hi:points_per_decade")->capture_default_str();
  eval->add_option("--t", eo.t, "Time for fn=p")->capture_default_str();

  double decades = 8, cert_ppd = 64;
  auto* cert = app.add_subcommand("certify", "Fit the scaling indices at zero and infinity (JSON)");
  cert->add_option("--decades", decades)->capture_default_str();
  cert->add_option("--points-per-decade", cert_ppd)->capture_default_str();

  SimOpts so;
  std::string what;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo estimators (JSON + CSV)");
  sim->add_option("what", what, "exit-ball, exit-density, survival, half-space-hk, bhp")
      ->required()
      ->check(CLI::IsMember({"exit-ball", "exit-density", "survival", "half-space-hk", "bhp"}));
  sim->add_option("--n", so.n, "Paths (at least 100)")->capture_default_str();
  sim->add_option("--dt", so.dt, "Base step (0: from --resolution)")->capture_default_str();
  sim->add_option("--resolution", so.resolution, "Geometry scale over Phi^{-1}(dt)")
      ->capture_default_str();
  sim->add_flag("!--no-richardson", so.richardson, "exit-ball: skip the dt/2, dt/4 levels");
  sim->add_option("--radius", so.radius, "Ball radius, or window half-width for bhp")
      ->capture_default_str();
  sim->add_option("--t", so.t)->capture_default_str();
  sim->add_option("--xd", so.xd, "Start heights")->capture_default_str();
  sim->add_option("--cells", so.cells)->capture_default_str();
  sim->add_option("--x", so.x, "bhp: first start height")->capture_default_str();
  sim->add_option("--y", so.y, "bhp: second start height")->capture_default_str();
  sim->add_option("--sampler", so.sampler,
                  "stable_closed_form, stable_mixture, tabulated_inverse_cdf, general_decomposition");

  VerifyOpts vo;
  auto* ver = app.add_subcommand("verify", "Run the check suite and write a bundle");
  ver->add_option("--stage", vo.stage, "quadrature, monte-carlo or all")->capture_default_str();
  ver->add_flag("--inject-wrong-exponent,--negative-control", vo.inject,
                "Compare j against r^{-d} phi(1/r)");
  ver->add_option("--r-min", vo.r_min)->capture_default_str();
  ver->add_option("--r-max", vo.r_max)->capture_default_str();
  ver->add_option("--points-per-decade", vo.ppd)->capture_default_str();
  ver->add_option("--n-exit", vo.n_exit)->capture_default_str();
  ver->add_option("--n-half-space", vo.n_half_space)->capture_default_str();
  ver->add_option("--n-bhp", vo.n_bhp)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_usage;
  }

  try {
    if (schema) {
      std::cout << run_config_schema().dump(2) << "\n";
      return exit_ok;
    }
    if (*eval) {
      cmd_eval(g, eo);
    } else if (*cert) {
      cmd_certify(g, decades, cert_ppd);
    } else if (*sim) {
      cmd_simulate(g, what, so);
    } else if (*ver) {
      return cmd_verify(g, vo);
    } else {
      std::cout << app.help();
      return exit_usage;
    }
    return exit_ok;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const CertificationError& e) {
    std::cerr << e.what() << "\n";
    return exit_certification_failed;
  } catch (const ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return exit_nonconvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_nonconvergence;
  }
}
