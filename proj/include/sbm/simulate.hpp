#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sbm/bernstein.hpp"
#include "sbm/config.hpp"
#include "sbm/kernels.hpp"
#include "sbm/random.hpp"
#include "sbm/renewal.hpp"

namespace sbm {

enum class SamplerStrategy {
  stable_closed_form,     // pure_power
  stable_mixture,         // sum_of_powers
  tabulated_inverse_cdf,  // law of S_dt by transform inversion
  general_decomposition,  // compound Poisson above eps plus mean drift below
};
std::string to_string(SamplerStrategy s);
SamplerStrategy sampler_strategy_from_string(const std::string& s);

struct SamplerOptions {
  std::optional<SamplerStrategy> strategy;  // chosen from the family when absent
  double table_points_per_decade = 32;
  double max_poisson_mean = 50;  // general_decomposition: dt * mu(eps, inf)
  double max_unresolved_mass = 1e-6;  // tabulated: CDF below the first reliable point
  QuadratureConfig cfg;
};

// Draws increments S_{t+dt} - S_t. Tabulated strategies hold one table per
// prepared dt; prepare() is idempotent and thread-safe.
class SubordinatorSampler {
 public:
  static SubordinatorSampler make(const BernsteinSpec& spec, const SamplerOptions& opt = {});

  SamplerStrategy strategy() const;
  const BernsteinSpec& spec() const;
  bool needs_tables() const;
  void prepare(double dt) const;
  // Throws DomainError for a tabulated strategy when dt was not prepared.
  double sample(double dt, RandomSource& src) const;
  json describe() const;

 private:
  struct State;
  std::shared_ptr<State> state_;
};

double sample_increment(const SubordinatorSampler& sampler, double dt, RandomSource& src);

struct PathSample {
  std::vector<double> times, s_values;
  std::vector<Point> x_values;
  std::optional<std::size_t> killed_at;
};

// Skeleton of X = W(S) on a fixed dt grid; `inside`, when given, marks the
// first skeleton point outside the domain.
PathSample sample_path(const BernsteinSpec& spec, const SubordinatorSampler& sampler, int d,
                       const Point& x0, double horizon, double dt, RandomSource& src,
                       const std::function<bool(const Point&)>& inside = {});

struct BiasNote {
  std::vector<double> steps;   // dt, dt/2, dt/4
  std::vector<double> means;   // estimate at each step
  double bias_dt = 0;          // mean(dt) - mean(dt/2)
  double bias_dt_half = 0;     // mean(dt/2) - mean(dt/4)
  double bias_dt_se = 0, bias_dt_half_se = 0;
  double shrink = 0;           // bias_dt / bias_dt_half
  double extrapolated = 0;     // 2 mean(dt/2) - mean(dt)
  json to_json() const;
};

struct McEstimate {
  double value = 0;
  double std_error = 0;
  std::size_t n = 0;
  std::optional<BiasNote> bias_note;
  json to_json() const;
};

struct McConfig {
  std::uint64_t seed = 1;
  std::uint32_t substream = 0;
  unsigned workers = 0;      // 0: hardware concurrency
  std::size_t chunk = 4096;  // paths per reduction chunk
};

// dt for each step: fixed, or min(dt, Phi(dist / resolution)) rounded down
// to dt 2^{-k}, where dist is the distance to the domain complement.
struct StepRule {
  double dt = 0.01;
  bool adaptive = false;
  double resolution = 50;
  int max_halvings = 40;
  double step(const BernsteinSpec& spec, double dist) const;
};

// dt with Phi^{-1}(dt) = scale / resolution.
double default_dt(const BernsteinSpec& spec, double geometry_scale, double resolution = 50);

struct ExitBallResult {
  McEstimate mean_exit_time;
  std::vector<Point> exit_positions;  // at the base step
  std::size_t horizon_exhausted = 0;
  json to_json() const;
};

// Exit from B(center, radius). With `richardson` the base path runs at dt/4
// and exit is detected on the dt, dt/2 and dt/4 skeletons of the same path.
ExitBallResult mc_exit_ball(const BernsteinSpec& spec, const SubordinatorSampler& sampler, int d,
                            const Point& center, double radius, const Point& x, std::size_t n,
                            const StepRule& step, const McConfig& mc = {}, bool richardson = true,
                            double max_time = 0);

struct ShellRow {
  double r_lo = 0, r_hi = 0;
  std::size_t hits = 0;
  double density = 0, density_se = 0;
  double lower_comparator = 0;  // j(|y - x0|) / phi(r^{-2})
  double upper_comparator = 0;  // j(|y - x0| - r) / phi(r^{-2})
  double ratio_lower = 0, ratio_upper = 0;
  bool underfilled = false;
};

struct ExitDensityReport {
  std::vector<ShellRow> shells;
  double c2 = 0;  // min density / lower comparator over filled shells
  double c1 = 0;  // max density / upper comparator over filled shells
  std::size_t underfilled = 0;
  ExitBallResult exit;
  json to_json() const;
};

// Radial shells of exit positions from the ball centre, edges in units of
// the radius (default: 16 log-spaced edges on [1, 10]).
ExitDensityReport mc_exit_density_check(const BernsteinSpec& spec,
                                        const SubordinatorSampler& sampler, int d, double radius,
                                        std::size_t n, const StepRule& step, const McConfig& mc = {},
                                        std::vector<double> shell_edges = {},
                                        std::size_t min_hits = 50);

// Fraction of paths whose skeleton stays in {x_d > 0} up to t.
McEstimate mc_survival_half_space(const BernsteinSpec& spec, const SubordinatorSampler& sampler,
                                  int d, const Point& x, double t, std::size_t n,
                                  const StepRule& step, const McConfig& mc = {});

struct Box {
  Point lo, hi;
  bool contains(const Point& p) const;
  double volume() const;
  Point center() const;
};

struct CellEstimate {
  Box cell;
  std::size_t hits = 0;
  McEstimate p_hat;     // killed density averaged over the cell
  double estimate = 0;  // half_space_hk_estimate at the centre
  double ratio = 0;
  bool usable = false;
};

struct HalfSpaceHkResult {
  McEstimate survival;
  std::vector<CellEstimate> cells;
  json to_json() const;
};

HalfSpaceHkResult mc_half_space_heat_kernel(const BernsteinSpec& spec,
                                            const SubordinatorSampler& sampler, int d, double t,
                                            const Point& x, const std::vector<Box>& cells,
                                            std::size_t n, const StepRule& step,
                                            const McConfig& mc = {}, std::size_t min_hits = 20);

struct HarmonicRatioResult {
  McEstimate u_a_x, u_a_y;
  std::optional<McEstimate> u_b_x, u_b_y;
  McEstimate single_ratio;                 // u_A(x) / u_A(y)
  std::optional<McEstimate> double_ratio;  // (u_A(x)/u_A(y)) / (u_B(x)/u_B(y))
  double comparator = 0;                   // bhp_decay_comparator(x_d, y_d)
  std::size_t min_hits = 0;
  bool degenerate = false;
  std::size_t horizon_exhausted = 0;
  json to_json() const;
};

// Exit of the window from one start: hit probability of each target.
struct WindowExit {
  Point start;
  std::size_t n = 0;
  std::vector<std::size_t> hits;
  std::vector<McEstimate> targets;
  std::size_t horizon_exhausted = 0;
  json to_json() const;
};

WindowExit mc_window_exit(const BernsteinSpec& spec, const SubordinatorSampler& sampler, int d,
                          const Box& window, const Point& z, const std::vector<Box>& targets,
                          std::size_t n, const StepRule& step, const McConfig& mc = {},
                          double max_time = 0);

// Ratios from two window exits with targets {A} or {A, B}.
HarmonicRatioResult harmonic_ratio(const BernsteinSpec& spec, const WindowExit& ex_x,
                                   const WindowExit& ex_y, std::size_t min_hits = 100);

// Exit distribution of the window started from x and from y. Target B is
// optional; without it only the single ratio is formed.
HarmonicRatioResult mc_harmonic_ratio_bhp(const BernsteinSpec& spec,
                                          const SubordinatorSampler& sampler, int d,
                                          const Box& window, const Point& x, const Point& y,
                                          const Box& target_a, const std::optional<Box>& target_b,
                                          std::size_t n, const StepRule& step,
                                          const McConfig& mc = {}, double max_time = 0,
                                          std::size_t min_hits = 100);

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace sbm
