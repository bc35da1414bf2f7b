#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floydwalk/floyd_function.hpp"
#include "floydwalk/graph.hpp"
#include "floydwalk/kernel.hpp"

namespace floydwalk {

struct GraphSpec {
  GraphFamily family = GraphFamily::RegularTree;
  int q = 2;    // tree branching
  int dim = 2;  // lattice dimension
  std::vector<std::vector<std::uint32_t>> adjacency;  // explicit family only
  std::uint64_t base = 0;                             // explicit family base vertex

  GraphOracle build() const;
};

struct KernelSpec {
  KernelRule rule = KernelRule::SimpleRw;
  double hold = 0.5;     // lazy
  double outward = 0.7;  // tree drift
  std::vector<double> step_weights;  // mixture

  Kernel build() const;
};

struct FloydSpec {
  FloydFamily family = FloydFamily::Geometric;
  double a = 0.5;   // geometric ratio
  double s = 3.0;   // polynomial exponent
  std::vector<double> table;  // custom table values
  double lambda = 0.0;        // custom table contraction witness
  std::string table_file;     // green-scaled table source ("lemma1" family)
  int n_max = 40;             // green-scaled build size

  // Builds the analytic families and file-backed tables. The green-scaled
  // family without a table_file needs the kernel and graph; that path lives in
  // the runner.
  FloydFunction build() const;
};

struct OpParams {
  int radius = 20;
  std::uint32_t trials = 200;
  std::uint32_t steps = 2000;
  std::uint32_t paths = 2000;
  std::uint32_t horizon = 4000;
  int n_max = 40;
  std::uint32_t pairs = 0;  // metric-inequality spot checks in the floyd verb
  std::vector<int> rho_radii;  // empty: family default ladder
  std::vector<std::uint32_t> ray_levels{2, 4, 8, 16};
  std::vector<double> r_list;  // empty: 0.5 f(0)
  std::uint32_t skeleton_trials = 400;
  std::uint32_t event_trials = 2000;
  std::vector<std::uint32_t> event_levels{2, 4, 8};
  std::uint32_t event_horizon = 1000;
  std::uint32_t mc_paths = 0;  // Monte Carlo cross-checks of Green masses
  std::uint32_t mc_horizon = 4000;
  std::uint32_t measured_tails = 24;
  bool speed_tail = false;
  std::uint32_t speed_trials = 50;
  std::string table_file;  // table artifact path override / experiment input
};

struct ExperimentConfig {
  GraphSpec graph;
  KernelSpec kernel;
  FloydSpec floyd;
  std::string operation;  // informational; the CLI verb drives dispatch
  OpParams params;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 0;  // 0 = hardware
};

/// Strict parse: unknown fields are rejected at every level, range errors name
/// the offending field, absent fields take the documented defaults.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// Canonical serialization: every field echoed (defaults filled), keys sorted.
/// parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const ExperimentConfig& c);

std::uint64_t config_hash(const ExperimentConfig& c);  // FNV-1a of the canonical form
std::string config_hash_hex(const ExperimentConfig& c);

const char* graph_family_string(GraphFamily f);
const char* kernel_rule_string(KernelRule r);
const char* floyd_family_string(FloydFamily f);

}  // namespace floydwalk
