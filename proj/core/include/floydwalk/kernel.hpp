#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "floydwalk/graph.hpp"
#include "floydwalk/rng.hpp"

namespace floydwalk {

enum class KernelRule { SimpleRw, LazyRw, TreeDrift, BoundedRangeMixture };

const char* kernel_rule_name(KernelRule r);

struct KernelCertificates {
  int range = 1;       // M: p(v,w) > 0 implies d(v,w) <= M
  double eps0 = 0.0;   // uniform irreducibility: adjacent v,w reach in <= K steps with prob >= eps0
  int K = 1;
  bool has_reversing_measure = false;
  double rev_lower = 1.0;  // bounds for m(v) = deg(v)
  double rev_upper = 1.0;
};

// Transition rule p(v, .). Immutable; probabilities are exact rationals of the
// local degree, evaluated in double.
class Kernel {
 public:
  static Kernel simple_rw();
  static Kernel lazy_rw(double hold);
  static Kernel tree_drift(double outward);  // regular trees only; outward mass split over children
  // weights[j-1] = probability of taking j simple sub-steps; range M = weights.size()
  static Kernel bounded_range_mixture(std::vector<double> step_weights);

  KernelRule rule() const { return rule_; }
  double param() const { return param_; }
  const std::vector<double>& step_weights() const { return weights_; }
  std::string describe() const;

  KernelCertificates certificates(const GraphOracle& g) const;
  bool has_reversing(const GraphOracle& g) const;
  double reversing_measure(const GraphOracle& g, VertexId v) const;  // m(v) = deg(v)

  // exact row of the transition matrix, ascending vertex id
  std::vector<std::pair<VertexId, double>> row(const GraphOracle& g, VertexId v) const;
  double prob(const GraphOracle& g, VertexId v, VertexId w) const;
  // exact kappa-step probability by bounded forward expansion
  double kstep_prob(const GraphOracle& g, VertexId v, VertexId w, int kappa) const;

  // whether |Z_k| is itself Markov for this kernel/graph (sphere-transitive
  // family with a radially symmetric rule)
  bool radial(const GraphOracle& g) const;
  // level-chain transition matrix on {0..R}, mass past R absorbed; banded with
  // half bandwidth = range
  struct RadialMatrix {
    int R = 0;
    int band = 1;
    std::vector<double> p;  // (R+1) x (2*band+1), column j-i+band
    double at(int i, int j) const;
  };
  RadialMatrix radial_matrix(const GraphOracle& g, int R) const;

 private:
  Kernel() = default;
  KernelRule rule_ = KernelRule::SimpleRw;
  double param_ = 0.0;
  std::vector<double> weights_;
};

// Depth-unbounded walk state. Maintains the exact vertex word/coordinates per
// family, so trees can be walked far past the 64-bit-encodable depth; levels,
// step lengths and distance-from-start are updated incrementally.
class Walker {
 public:
  Walker(const Kernel& k, const GraphOracle& g, VertexId start);
  ~Walker();
  Walker(Walker&&) noexcept;
  Walker& operator=(Walker&&) noexcept;

  void step(RngStream& rng);
  std::uint32_t level() const;
  std::uint32_t dist_from_start() const;
  std::uint16_t last_step_length() const;
  // sub-moves of the last step, appended to `out` (one entry for range-1 rules)
  void last_moves(std::vector<std::uint8_t>& out) const;
  const std::vector<std::uint8_t>& word() const;  // tree / free product; empty otherwise
  std::optional<VertexId> vertex() const;         // empty past the encodable range
  std::string label() const;
  // first letter of the current word (subtree / sector cell of the position);
  // level-0 positions return nullopt
  std::optional<std::uint8_t> cell() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct Trajectory {
  explicit Trajectory(GraphOracle g) : graph(std::move(g)) {}

  GraphOracle graph;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  VertexId start{};
  int kernel_range = 1;
  std::vector<std::uint32_t> levels;           // |Z_k|, size N+1
  std::vector<std::uint16_t> step_lengths;     // d(Z_k, Z_{k+1}), size N
  std::vector<std::uint32_t> dist_from_start;  // d(Z_0, Z_k), size N+1
  std::vector<std::uint8_t> moves;             // flattened sub-moves for replay
  std::vector<std::uint32_t> move_offsets;     // size N+1 iff kernel_range > 1

  std::uint32_t steps() const {
    return levels.empty() ? 0 : static_cast<std::uint32_t>(levels.size()) - 1;
  }
};

Trajectory sample_trajectory(const Kernel& k, const GraphOracle& g, VertexId start,
                             std::uint32_t steps, std::uint64_t seed, std::uint64_t stream = 0);

// Replays a trajectory's positions from its move log.
class ReplayCursor {
 public:
  explicit ReplayCursor(const Trajectory& t);
  ~ReplayCursor();
  ReplayCursor(ReplayCursor&&) noexcept;

  std::uint32_t k() const;
  std::uint32_t level() const;
  void advance();  // moves to step k+1; k must be < steps()
  const std::vector<std::uint8_t>& word() const;
  std::optional<VertexId> vertex() const;
  std::string label() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Powers p^{(k)} of the kernel restricted to a ball (absorbing outside), k = 0..n.
struct NStepMatrices {
  std::size_t dim = 0;
  bool radius_warning = false;  // ball radius < n * range: powers are strict lower bounds
  std::vector<std::vector<double>> p;  // p[k] is dim x dim row-major

  double at(int k, std::size_t i, std::size_t j) const { return p[static_cast<std::size_t>(k)][i * dim + j]; }
};

NStepMatrices n_step_matrix(const Kernel& k, const GraphOracle& g, const BallGraph& ball, int n,
                            const Limits& lim = {});

struct StatsConfig {
  std::uint32_t trials = 200;
  std::uint32_t horizon = 2000;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware
};

struct StepStats {
  // exact per-orbit step-length distributions sigma_v(l), l = 0..range
  std::vector<std::pair<std::string, std::vector<double>>> sigma;
  std::vector<double> phi;  // phi[l] = sup_v sigma_v([l, inf)), l = 0..range+1
  double m_bar = 0.0;       // sum_{l>=1} phi(l)
  double speed_mean = 0.0;  // |Z_N|/N across trials
  double speed_ci_half = 0.0;
  double speed_lower = 0.0;  // 1st percentile of |Z_n|/n, final-quarter samples
  double speed_upper = 0.0;  // 99th percentile of d(Z_0,Z_n)/n, final-quarter samples
  std::uint32_t trials = 0;
  std::uint32_t horizon = 0;
};

StepStats step_stats(const Kernel& k, const GraphOracle& g, const StatsConfig& cfg);

struct CertificateCheck {
  double row_sum_max_err = 0.0;
  bool irreducibility_ok = true;   // exhaustive kappa <= K search on sampled adjacent pairs
  double irreducibility_min = 0.0; // min over pairs of max_{kappa<=K} p^{(kappa)}(v,w)
  double reversibility_max_residual = 0.0;
  bool reversing_bounds_ok = true;
  bool range_ok = true;  // no sampled step exceeded the declared range
  bool ok() const {
    return irreducibility_ok && reversing_bounds_ok && range_ok && row_sum_max_err <= 1e-12 &&
           reversibility_max_residual <= 1e-12;
  }
};

CertificateCheck verify_certificates(const Kernel& k, const GraphOracle& g, int sample_pairs,
                                     std::uint64_t seed);

}  // namespace floydwalk
