#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floydwalk/floyd_function.hpp"
#include "floydwalk/graph.hpp"
#include "floydwalk/kernel.hpp"

namespace floydwalk {

/// Parameters of the event A_v(alpha, eps), with the step-statistics constants
/// they are calibrated against. Defaults: alpha = 1/(2 m_bar), eps = m_lower/4
/// (admissible since eps < m_lower/3).
struct EventSpec {
  double alpha = 0.0;
  double eps = 0.0;
  std::uint32_t horizon = 1000;
  double m_bar = 0.0;
  double m_lower = 0.0;
};

EventSpec default_event_spec(const StepStats& stats, std::uint32_t horizon);

/// Per-condition outcome of A_v on one trajectory, indexed as in the defining
/// list: (2) d(Z_0,Z_n) <= (m_bar+eps) n for n >= alpha|v|; (3) d(Z_n,Z_{n+1})
/// <= eps n for n > alpha|v|; (4) |Z_n| >= (m_lower-eps) n for n >= alpha|v|;
/// (5) |Z_n| > eps |v| for all n >= 0 (n >= 1 when v is the base point).
struct EventCheck {
  bool cond2 = false;
  bool cond3 = false;
  bool cond4 = false;
  bool cond5 = false;
  bool all = false;
};

EventCheck check_event_Av(const Trajectory& t, const EventSpec& spec);

/// Quantitative skeleton behind the Dirichlet argument, evaluated on one
/// trajectory: at k = ceil(alpha |v|) the start bound 2(Z_0 ^ Z_k) >= |v|/3,
/// and for n > alpha |v| the running bound 2(Z_n ^ Z_{n+1}) >= (2 m_lower -
/// 3 eps) n. Both are implied by A_v, so violations among A_v-passing
/// trajectories indicate a bookkeeping bug rather than randomness.
struct SkeletonCheck {
  std::uint32_t k = 0;
  bool start_ok = false;
  std::uint32_t step_violations = 0;
  double worst_start_slack = 0.0;  // 2(Z_0 ^ Z_k) - |v|/3
};

SkeletonCheck evaluate_skeleton(const Trajectory& t, const EventSpec& spec);

double wilson_lower(std::uint64_t successes, std::uint64_t trials, double z = 1.96);
double wilson_upper(std::uint64_t successes, std::uint64_t trials, double z = 1.96);

struct EventScanOptions {
  std::uint32_t trials = 2000;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct EventScanRow {
  VertexId v{};
  std::uint32_t level = 0;
  std::uint32_t trials = 0;
  std::uint32_t passes = 0;  // all four conditions
  double p_hat = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  double cond_pass_rate[4] = {0, 0, 0, 0};  // conditions 2..5 individually
  bool skeleton_applicable = false;         // |v| > (m_bar + eps)/eps
  std::uint32_t skeleton_start_violations = 0;  // among A_v-passing trajectories
  std::uint32_t skeleton_step_violations = 0;
};

struct EventScanResult {
  double alpha = 0.0;
  double eps = 0.0;
  double m_bar = 0.0;
  double m_lower = 0.0;
  std::uint32_t horizon = 0;
  std::vector<EventScanRow> rows;
  double min_consecutive_delta = 0.0;  // min over i of p_hat[i+1] - p_hat[i]
  bool monotone = false;               // p_hat non-decreasing in |v|
  std::uint32_t skeleton_violations_applicable = 0;
};

/// Monte Carlo estimates of P_v(A_v) along vertices of strictly increasing
/// level, with Wilson intervals and the monotone-trend statistic.
EventScanResult event_probability_scan(const Kernel& k, const GraphOracle& g,
                                       const EventSpec& spec, const std::vector<VertexId>& v_list,
                                       const EventScanOptions& opt = {});

enum class PartitionRule { TreeSubtree, LatticeSector, SingleCell, FloydCluster };

const char* partition_rule_name(PartitionRule r);

struct BoundaryCell {
  std::uint32_t id = 0;
  std::string label;
  VertexId representative{};
  std::uint64_t size = 0;  // members on the exit sphere; 0 = not materialized
  double df_diameter = 0.0;
  bool diameter_exact = false;
};

/// Partition of the exit sphere S_{R_exit} used as the finite boundary proxy.
/// Trees and the free product split by the depth-1 ancestor, lattices by the
/// dominant coordinate axis (ties to the lowest axis), the half line is a
/// single cell, and explicit graphs are clustered greedily under d_f with a
/// diameter cap.
struct BoundaryCellPartition {
  std::uint32_t R_exit = 0;
  PartitionRule rule = PartitionRule::SingleCell;
  std::vector<BoundaryCell> cells;
  double diameter_cap = 0.0;  // FloydCluster only

  // FloydCluster: materialized members, sorted by vertex id
  std::vector<VertexId> member_vertex;
  std::vector<std::uint32_t> member_cell;

  // dense cell-to-cell d_f distance matrix (row-major, diagonal 0); exact on
  // trees/half line, candidate-pair estimates elsewhere
  std::vector<double> intercell;
  bool distances_exact = false;
  bool distances_converged = false;

  double cell_distance(std::uint32_t i, std::uint32_t j) const {
    return intercell[i * cells.size() + j];
  }
  /// Cell of a vertex at level >= 1 under a rule-based partition, or a
  /// materialized member under FloydCluster. Range error otherwise.
  std::uint32_t cell_of(const GraphOracle& g, VertexId v) const;
};

BoundaryCellPartition make_boundary_partition(const GraphOracle& g, const FloydFunction& f,
                                              std::uint32_t R_exit, double cluster_diameter_cap = 0.0,
                                              const Limits& lim = {});

struct HarmonicMeasureOptions {
  std::uint32_t paths = 2000;
  std::uint32_t horizon = 4000;
  std::uint64_t seed = 0;
  int threads = 0;
  // continue coupled paths to S_{R_exit + stability_extra} and report the cell
  // disagreement rate (rule-based partitions only; 0 disables)
  std::uint32_t stability_extra = 5;
};

struct HarmonicMeasureEstimate {
  VertexId start{};
  std::uint32_t paths = 0;
  std::vector<std::uint64_t> hits;  // per cell
  std::vector<double> weights;      // hits/paths; sums to 1 - unhit_mass
  std::vector<double> std_error;
  double unhit_mass = 0.0;
  bool horizon_warning = false;  // unhit mass above 10%
  bool stability_checked = false;
  double stability_disagreement = 0.0;
  std::uint32_t stability_pairs = 0;
};

/// First-hit distribution on the exit-sphere cells: the computable proxy for
/// the harmonic measure mu_start.
HarmonicMeasureEstimate harmonic_measure(const Kernel& k, const GraphOracle& g, VertexId start,
                                         const BoundaryCellPartition& part,
                                         const HarmonicMeasureOptions& opt = {});

struct DirichletScanOptions {
  std::uint32_t paths = 2000;
  std::uint32_t horizon = 4000;
  std::uint32_t skeleton_trials = 400;
  std::uint64_t seed = 0;
  int threads = 0;
  std::uint32_t R_exit = 0;  // 0: deepest ray level + 8
  std::uint32_t stability_extra = 5;
  StatsConfig stats;  // calibration run for m_bar / m_lower
};

struct DirichletScanRow {
  VertexId v{};
  std::uint32_t level = 0;
  double r = 0.0;
  std::uint32_t region_cells = 0;
  double region_weight = 0.0;  // conditional on exiting within the horizon
  double std_error = 0.0;
  double unhit_mass = 0.0;
};

struct DirichletSkeletonRow {
  VertexId v{};
  std::uint32_t level = 0;
  std::uint32_t k = 0;  // ceil(alpha |v|)
  bool applicable = false;
  std::uint32_t trials = 0;
  std::uint32_t av_passes = 0;
  std::uint32_t start_violations = 0;  // among A_v passes
  std::uint32_t step_violations = 0;
  double tau_bound = 0.0;  // tau(floor(|v|/6)) + (1/c) sum_{i >= floor(c k)} tau(i)
};

struct DirichletScanResult {
  std::uint32_t R_exit = 0;
  std::uint32_t exit_cell = 0;
  double m_bar = 0.0;
  double m_lower = 0.0;
  double alpha = 0.0;
  double eps = 0.0;
  double c = 0.0;  // min(m_lower - 3 eps / 2, 1)
  std::vector<double> r_list;
  std::vector<DirichletScanRow> rows;  // ray-major, then r
  std::vector<DirichletSkeletonRow> skeleton;
  bool monotone_within_tol = false;  // per r, weight non-decreasing along the ray (3 sigma slack)
  double stability_disagreement = 0.0;  // worst over ray starts
  bool cells_converged = false;
  std::uint32_t skeleton_violations_applicable = 0;
};

/// Weak-convergence scan toward the end fixed by `ray`: estimates the measure
/// of the target region (cells within d_f distance r of the ray's exit cell)
/// for each ray vertex, plus the proof-skeleton tallies and tau tail bound.
/// Requires sum n f(n) < infinity.
DirichletScanResult dirichlet_convergence_scan(const Kernel& k, const GraphOracle& g,
                                               const FloydFunction& f,
                                               const std::vector<VertexId>& ray,
                                               const std::vector<double>& r_list,
                                               const DirichletScanOptions& opt = {},
                                               const Limits& lim = {});

}  // namespace floydwalk
