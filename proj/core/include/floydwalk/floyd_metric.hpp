#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "floydwalk/floyd_function.hpp"
#include "floydwalk/graph.hpp"

namespace floydwalk {

struct FloydDistance {
  double value = 0.0;
  bool converged = false;
  bool exact = false;  // unique-path families (tree, half line): value is d_f itself
  int radius_used = 0;
};

struct Inequality1Report {
  FloydDistance df;
  VertexId m{};                // nearest-to-base point of the witness geodesic
  std::uint32_t m_level = 0;
  double gromov = 0.0;         // v ^ w
  double nu_at_m = 0.0;        // nu(|m|), tail upper bound inside
  double tau_at_gromov = 0.0;  // tau(floor(v ^ w))
  bool pass_nu = false;
  bool pass_tau = false;

  bool pass() const { return pass_nu && pass_tau; }
};

// F[L] = sum_{i<L} f(i); exact path sums on trees are F(|v|)+F(|w|)-2F(|lca|)
std::vector<double> floyd_prefix_sums(const FloydFunction& f, std::uint32_t max_level);

// Shortest rescaled-path engine. Edge [x,y] costs f(min(|x|,|y|)). Trees and
// the half line use exact unique-path sums; other families run Dijkstra on
// increasing ball truncations and report monotone upper bounds with a
// convergence flag (two consecutive radii within rel_tol).
class FloydMetricEngine {
 public:
  FloydMetricEngine(GraphOracle g, FloydFunction f, Limits lim = {});

  FloydDistance distance(VertexId v, VertexId w, int radius) const;
  // widens the truncation radius to cover the witness geodesic so the
  // reported upper bound is comparable against nu(|m|)
  Inequality1Report check_inequality1(VertexId v, VertexId w, int radius) const;

  const GraphOracle& graph() const { return g_; }
  const FloydFunction& floyd() const { return f_; }

  static constexpr double rel_tol = 1e-9;

 private:
  std::shared_ptr<const BallGraph> ball_at(int radius) const;
  double dijkstra(const BallGraph& ball, VertexId v, VertexId w) const;

  GraphOracle g_;
  FloydFunction f_;
  Limits lim_;
  bool exact_family_ = false;
  mutable std::mutex mu_;
  mutable std::map<int, std::shared_ptr<const BallGraph>> balls_;
};

FloydDistance floyd_distance(const GraphOracle& g, const FloydFunction& f, VertexId v, VertexId w,
                             int radius, Limits lim = {});
Inequality1Report check_inequality1(const GraphOracle& g, const FloydFunction& f, VertexId v,
                                    VertexId w, int radius, Limits lim = {});

}  // namespace floydwalk
