#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "floydwalk/floyd_function.hpp"
#include "floydwalk/graph.hpp"
#include "floydwalk/green.hpp"
#include "floydwalk/kernel.hpp"

namespace floydwalk {

/// Floyd function scaled from Green ball masses: f(n) = 1/(n^3 g(e, B_{n+M}))
/// for n >= 1 and f(0) := f(1), with M the kernel range. Its contraction
/// constant is lambda_star = eps0^2 / (8 (K + 1 + eps0^2)); the observed table
/// ratios must dominate it, and a violation is a hard error.
struct GreenScaledBuild {
  explicit GreenScaledBuild(FloydFunction ff) : f(std::move(ff)) {}

  FloydFunction f;  // family GreenScaledTable, tail-controlled by f(n) n^3 decreasing
  int M = 1;
  double eps0 = 0.0;
  int K = 1;
  double lambda_star = 0.0;
  int n_max = 0;
  bool radial_profile = false;
  int profile_radius = 0;
  double min_observed_ratio = 1.0;  // min over the table of f(n+1)/f(n)
  std::string g_source;             // how the Green masses were produced
  FloydAxiomReport axioms;
};

GreenScaledBuild build_green_scaled_function(const Kernel& k, const GraphOracle& g, int n_max,
                                             const BallProfileOptions& opt = {},
                                             const Limits& lim = {});

/// Two-column table file "n f(n)" for n = 1..n_max, with the header line
/// "# n f(n) M=.. eps0=.. K=.. lambda_star=..". Reading reconstructs the
/// function (f(0) := f(1)) including its tail control.
void write_floyd_table(const std::string& path, const GreenScaledBuild& build);
GreenScaledBuild read_floyd_table(const std::string& path);

/// X_k = max(|Z_k| - M, 0), elementwise over the trajectory.
std::vector<std::uint32_t> excess_level_sequence(const Trajectory& t, int M);

struct GromovBoundReport {
  std::uint32_t steps = 0;
  std::uint32_t violations = 0;
  // min over k of 2 (Z_k ^ Z_{k+1}) - 2 X_k, in integer half-units
  std::int64_t worst_doubled_slack = 0;
  bool ok = false;
};

/// Exact integer check that every step satisfies Z_k ^ Z_{k+1} >= X_k (the
/// Gromov product computed from levels and step lengths). A violation means
/// the declared kernel range is wrong, so it throws unless `statistical`
/// (the user-supplied-M mode, where violations are only counted).
GromovBoundReport gromov_lower_bound_check(const Trajectory& t, int M, bool statistical = false);

struct CauchyExperimentOptions {
  std::uint32_t trials = 200;
  std::uint32_t steps = 2000;
  std::uint64_t seed = 0;
  int threads = 0;
  int tail_grid_points = 9;  // m-grid: i * steps / (points - 1)
  double tail_tol = 0.05;    // verdict: majorant tail at m = steps/2 below this
  // exact Floyd Cauchy tails are an O(steps^2) sweep, so only this many
  // trajectories get them (0 = all); families without exact path sums skip
  // them entirely
  std::uint32_t measured_tail_trajectories = 24;
};

struct TrajectoryDiagnostics {
  std::uint64_t stream = 0;
  double series_sum = 0.0;       // sum_k X_k f(X_k)
  double majorant_total = 0.0;   // sum_k (4 X_k f(X_k) + 2 (M+1) f(X_k))
  std::vector<double> majorant_tail;  // at the m-grid, suffix sums of the above
  std::vector<double> measured_tail;  // sup_{m<=j<k<=N} d_f(Z_j, Z_k); empty when skipped
  bool measured_available = false;
  bool majorant_dominates = true;  // measured <= majorant at every grid point
};

struct CauchyExperimentResult {
  std::uint32_t trials = 0;
  std::uint32_t steps = 0;
  int M = 1;
  std::uint32_t start_level = 0;
  double series_mean = 0.0;  // mean over trials of sum_k X_k f(X_k)
  double series_std_error = 0.0;
  double series_bound = 0.0;  // eps0^{-|Z_0|} pi^2/6
  bool series_within_bound = false;
  std::vector<std::uint32_t> m_grid;
  std::vector<double> mean_majorant_tail;  // per grid point, averaged over trials
  double verdict_fraction = 0.0;  // trajectories with majorant tail < tol at m = N/2
  std::uint32_t gromov_violations = 0;
  std::uint32_t measured_trajectories = 0;
  std::uint32_t domination_failures = 0;
  std::uint32_t table_extension_steps = 0;  // X_k past the table, tail bound used
  std::string measured_method;
  std::vector<TrajectoryDiagnostics> per_trajectory;
};

/// Convergence-to-boundary experiment: samples trajectories, checks the exact
/// Gromov lower bound on every step, accumulates the X_k f(X_k) series against
/// its closed bound, and forms per-trajectory Cauchy tail majorants
/// (suffix sums of 4 X_k f(X_k) + 2 (M+1) f(X_k)), compared where possible
/// against exactly measured sup d_f tails.
CauchyExperimentResult floyd_cauchy_experiment(const Kernel& k, const GraphOracle& g,
                                               const GreenScaledBuild& fb,
                                               const CauchyExperimentOptions& opt = {},
                                               const Limits& lim = {});

struct SpeedTailOptions {
  std::uint32_t trials = 50;
  std::uint32_t steps = 2000;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct SpeedTailTrajectory {
  double c0 = 0.0;  // 0.9 * min over n in [N/4, N] of (Z_n ^ Z_{n+1}) / n
  std::uint32_t n0 = 0;
  bool positive = false;
  double tau_partial = 0.0;   // sum_{k<N} tau(floor(Z_k ^ Z_{k+1}))
  double tail_majorant = 0.0;  // ceil(1/c0) * sum_{n >= floor(c0 n0)} tau(n)
};

struct SpeedTailResult {
  std::uint32_t trials = 0;
  std::uint32_t steps = 0;
  std::uint32_t positive_c0_count = 0;
  double min_c0 = 0.0;
  double median_c0 = 0.0;
  double max_tau_partial = 0.0;
  double max_tail_majorant = 0.0;
  bool verdict_ok = false;  // every trajectory produced a positive c0
  std::vector<SpeedTailTrajectory> per_trajectory;
};

/// Linear-speed route to convergence: extracts per-trajectory speed constants
/// c0 with Z_n ^ Z_{n+1} > c0 n past n0 = N/4, measures the tau partial sums
/// along the path, and certifies their finiteness by the tau tail series.
/// Requires sum n f(n) < infinity (the summability flag on f).
SpeedTailResult speed_tail_experiment(const Kernel& k, const GraphOracle& g,
                                      const FloydFunction& f, const SpeedTailOptions& opt = {});

}  // namespace floydwalk
