#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "floydwalk/graph.hpp"
#include "floydwalk/kernel.hpp"

namespace floydwalk {

enum class GreenMethod { ExactTruncated, MonteCarlo, ClosedFormTree };

const char* green_method_name(GreenMethod m);

// Green values use the convention g(v,w) = sum_{k>=0} p^{(k)}(v,w): expected
// number of visits counting time 0. The diagonal then satisfies
// g(v,v) = 1/(1 - F(v,v)) >= 1; off-diagonal values equal the sum from k = 1.
// Reports print the convention string below.
inline constexpr const char* kGreenConvention = "g(v,w) = sum_{k>=0} p^k(v,w), diagonal includes time 0";

struct GreenEstimate {
  VertexId source{};
  std::string target;       // vertex label, "S_n" or "B_n"
  double value = 0.0;
  GreenMethod method = GreenMethod::ExactTruncated;
  int radius = 0;           // truncation radius (exact method)
  std::uint64_t paths = 0;  // Monte Carlo sample count
  std::uint32_t horizon = 0;
  bool lower_bound = true;  // truncation/horizon only lose mass
  std::optional<double> std_error;
};

struct GreenTarget {
  enum class Kind { Vertex, Sphere, Ball };
  Kind kind = Kind::Vertex;
  VertexId w{};
  int n = 0;

  static GreenTarget vertex(VertexId w) { return {Kind::Vertex, w, 0}; }
  static GreenTarget sphere(int n) { return {Kind::Sphere, {}, n}; }
  static GreenTarget ball(int n) { return {Kind::Ball, {}, n}; }
  std::string label(const GraphOracle& g) const;
};

/// Expected visits to w before leaving B_R(base), started at v: solves
/// (I - P_R) on the truncated ball. Monotone non-decreasing in R and a lower
/// bound of the untruncated value. Sphere-transitive families with a radially
/// symmetric kernel and v or w equal to the base vertex go through the exact
/// level-chain solve, so R is not limited by ball materialization.
GreenEstimate green_exact_truncated(const Kernel& k, const GraphOracle& g, int R, VertexId v,
                                    VertexId w, const Limits& lim = {});

/// Full truncated row g_ball(source, .) in ball-local indexing, by one sparse
/// solve of (I - P^T) y = delta_source.
std::vector<double> green_row_exact(const Kernel& k, const GraphOracle& g, const BallGraph& ball,
                                    VertexId source, const Limits& lim = {});

/// Sample-mean visit count over `paths` horizon-truncated walks (a lower bound
/// in expectation), with its standard error.
GreenEstimate green_monte_carlo(const Kernel& k, const GraphOracle& g, VertexId v,
                                const GreenTarget& target, std::uint64_t paths,
                                std::uint32_t horizon, std::uint64_t seed, int threads = 0);

/// First-step closed form for the simple walk on the (q+1)-regular tree:
/// F = 1/q, g(e,e) = q/(q-1), g(e,w) = q^{-|w|} g(e,e).
GreenEstimate green_closed_form_tree(const Kernel& k, const GraphOracle& g, VertexId w);

enum class Transience { Transient, Recurrent, Unknown };

const char* transience_name(Transience t);

/// What the kernel/family pair is known to be: trees and the Z3*Z3 preset are
/// transient (outward drift needs bias > 1/2), lattices are transient iff
/// d >= 3, the half line and finite graphs are recurrent.
Transience declared_transience(const Kernel& k, const GraphOracle& g);

struct TransienceCheck {
  Transience declared = Transience::Unknown;
  std::vector<std::pair<int, double>> gee_by_radius;  // (R, g_R(e,e)) ladder
  double increment_ratio = 0.0;  // (g_3-g_2)/(g_2-g_1) on a doubling ladder
  bool numeric_transient_evidence = false;
  bool transient = false;  // declared transient and the ladder agrees
};

/// Numeric guard behind the declaration: g_R(e,e) on a doubling radius ladder
/// has geometrically shrinking increments iff the walk escapes.
TransienceCheck transience_check(const Kernel& k, const GraphOracle& g, const Limits& lim = {});

/// Throws a Hypothesis error ("transience required") unless transience_check
/// passes.
TransienceCheck require_transient(const Kernel& k, const GraphOracle& g, const Limits& lim = {});

struct BallProfileOptions {
  int margin = 60;               // extra truncation radius past n_max + M
  std::uint64_t mc_paths = 0;    // 0 disables the Monte Carlo cross-check
  std::uint32_t mc_horizon = 4000;
  int mc_sample_count = 3;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct BallProfile {
  int M = 1;
  int n_max = 0;
  int radius_used = 0;
  bool radial_path = false;
  std::vector<double> sphere_mass;  // g(e, S_k), k = 0 .. n_max + M
  std::vector<double> ball_mass;    // g(e, B_{n+M}), n = 0 .. n_max

  struct CrossCheck {
    int n = 0;
    double exact = 0.0;
    double mc = 0.0;
    double mc_std_error = 0.0;
    bool within_3_sigma = false;
  };
  std::vector<CrossCheck> cross_checks;
};

/// g(e, B_{n+M}) for n = 0..n_max as certified lower bounds sharpened well
/// past machine precision by the margin. Requires a transient pair; throws
/// "transience required" otherwise.
BallProfile green_ball_profile(const Kernel& k, const GraphOracle& g, int n_max, int M,
                               const BallProfileOptions& opt = {}, const Limits& lim = {});

struct GreenInequalityReport {
  double eps0 = 0.0;
  int K = 1;
  double sphere_growth_bound = 0.0;  // (K+1)/eps0^2
  int checked_pairs = 0;
  int neighbor_violations = 0;
  double worst_neighbor_slack = 0.0;  // min of g(e,v) - eps0 g(e,w) over v~w
  int checked_spheres = 0;
  int sphere_violations = 0;
  double worst_sphere_slack = 0.0;  // min of bound*g(e,S_n) - g(e,S_{n+1})
  bool ok = false;
};

/// Checks eps0 g(e,w) <= g(e,v) on all adjacent pairs of B_radius and
/// g(e,S_{n+1}) <= ((K+1)/eps0^2) g(e,S_n) for n < radius, against a
/// truncation sharp enough that the comparison reflects the untruncated g.
GreenInequalityReport green_inequality_checks(const Kernel& k, const GraphOracle& g, int radius,
                                              const Limits& lim = {});

}  // namespace floydwalk
