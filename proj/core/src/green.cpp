#include "floydwalk/green.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "floydwalk/error.hpp"
#include "floydwalk/parallel.hpp"

namespace floydwalk {

const char* green_method_name(GreenMethod m) {
  switch (m) {
    case GreenMethod::ExactTruncated: return "exact_truncated";
    case GreenMethod::MonteCarlo: return "monte_carlo";
    case GreenMethod::ClosedFormTree: return "closed_form_tree";
  }
  return "?";
}

const char* transience_name(Transience t) {
  switch (t) {
    case Transience::Transient: return "transient";
    case Transience::Recurrent: return "recurrent";
    case Transience::Unknown: return "unknown";
  }
  return "?";
}

std::string GreenTarget::label(const GraphOracle& g) const {
  switch (kind) {
    case Kind::Vertex: return g.label(w);
    case Kind::Sphere: return "S_" + std::to_string(n);
    case Kind::Ball: return "B_" + std::to_string(n);
  }
  return "?";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

Eigen::VectorXd solve_green_system(const SpMat& A, const Eigen::VectorXd& rhs,
                                   std::uint64_t direct_cutoff) {
  if (static_cast<std::uint64_t>(A.rows()) <= direct_cutoff) {
    Eigen::SparseLU<SpMat> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw_numeric("Green solve: sparse factorization failed");
    Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw_numeric("Green solve: back substitution failed");
    return x;
  }
  Eigen::BiCGSTAB<SpMat> it;
  it.setTolerance(1e-12);
  it.setMaxIterations(4 * A.rows());
  it.compute(A);
  Eigen::VectorXd x = it.solve(rhs);
  if (it.info() != Eigen::Success || it.error() > 1e-10)
    throw_numeric("Green solve: iterative solver did not reach the residual target");
  return x;
}

// expected visits per level before leaving {0..R}, started at level 0, for a
// kernel whose level process is Markov
std::vector<double> radial_sphere_visits(const Kernel& k, const GraphOracle& g, int R) {
  auto A = k.radial_matrix(g, R);
  int n = R + 1;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) * (2 * A.band + 2));
  for (int i = 0; i < n; ++i) {
    trips.emplace_back(i, i, 1.0);
    for (int j = std::max(0, i - A.band); j <= std::min(R, i + A.band); ++j) {
      double p = A.at(i, j);
      if (p != 0.0) trips.emplace_back(j, i, -p);  // (I - A^T)
    }
  }
  SpMat M(n, n);
  M.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[0] = 1.0;
  Eigen::VectorXd u = solve_green_system(M, rhs, 1u << 20);
  return {u.data(), u.data() + n};
}

std::uint64_t sphere_size(const GraphOracle& g, int l) {
  if (l == 0) return 1;
  std::uint64_t outer = g.ball_size_hint(l), inner = g.ball_size_hint(l - 1);
  if (outer == std::numeric_limits<std::uint64_t>::max())
    throw_cap("sphere size overflows the vertex budget");
  return outer - inner;
}

bool radial_source_usable(const Kernel& k, const GraphOracle& g, VertexId v, VertexId w,
                          bool& swapped) {
  if (!k.radial(g)) return false;
  if (v == g.base()) {
    swapped = false;
    return true;
  }
  // reversibility moves the base to the source slot: m(v) g(v,w) = m(w) g(w,v)
  if (w == g.base() && k.has_reversing(g)) {
    swapped = true;
    return true;
  }
  return false;
}

}  // namespace

std::vector<double> green_row_exact(const Kernel& k, const GraphOracle& g, const BallGraph& ball,
                                    VertexId source, const Limits& lim) {
  auto src = ball.index_of(source);
  auto n = static_cast<Eigen::Index>(ball.size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) * (g.max_degree() + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    trips.emplace_back(i, i, 1.0);
    for (auto& [w, p] : k.row(g, ball.vertices[static_cast<std::size_t>(i)]))
      if (auto j = ball.find(w))
        trips.emplace_back(static_cast<Eigen::Index>(*j), i, -p);  // (I - P^T)
  }
  SpMat M(n, n);
  M.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[src] = 1.0;
  Eigen::VectorXd y = solve_green_system(M, rhs, lim.max_dense_dim);
  return {y.data(), y.data() + n};
}

GreenEstimate green_exact_truncated(const Kernel& k, const GraphOracle& g, int R, VertexId v,
                                    VertexId w, const Limits& lim) {
  if (R < 0) throw_config("green_exact_truncated: negative radius");
  std::uint32_t lv = g.level(v), lw = g.level(w);
  if (lv > static_cast<std::uint32_t>(R) || lw > static_cast<std::uint32_t>(R))
    throw_range("green_exact_truncated: endpoint outside the truncation ball");

  GreenEstimate est;
  est.source = v;
  est.target = g.label(w);
  est.method = GreenMethod::ExactTruncated;
  est.radius = R;
  est.lower_bound = true;

  bool swapped = false;
  if (radial_source_usable(k, g, v, w, swapped)) {
    auto u = radial_sphere_visits(k, g, R);
    std::uint32_t lt = swapped ? lv : lw;
    double value = u[lt] / static_cast<double>(sphere_size(g, static_cast<int>(lt)));
    if (swapped) {
      // solved g_R(e, v); move the base back with the reversing measure
      value *= k.reversing_measure(g, g.base()) / k.reversing_measure(g, v);
    }
    est.value = value;
    return est;
  }

  auto ball = build_ball(g, g.base(), R, lim);
  auto row = green_row_exact(k, g, ball, v, lim);
  est.value = row[ball.index_of(w)];
  return est;
}

GreenEstimate green_monte_carlo(const Kernel& k, const GraphOracle& g, VertexId v,
                                const GreenTarget& target, std::uint64_t paths,
                                std::uint32_t horizon, std::uint64_t seed, int threads) {
  if (paths < 1) throw_config("green_monte_carlo: need at least one path");
  GreenEstimate est;
  est.source = v;
  est.target = target.label(g);
  est.method = GreenMethod::MonteCarlo;
  est.paths = paths;
  est.horizon = horizon;
  est.lower_bound = true;  // horizon truncation can only miss visits

  std::uint32_t target_level = 0;
  std::string target_label;
  if (target.kind == GreenTarget::Kind::Vertex) {
    target_level = g.level(target.w);
    target_label = g.label(target.w);
  }

  std::vector<double> counts(paths, 0.0);
  parallel_for(paths, threads, [&](std::size_t i) {
    RngStream rng(seed, i);
    Walker wk(k, g, v);
    double c = 0.0;
    for (std::uint32_t step = 0;; ++step) {
      switch (target.kind) {
        case GreenTarget::Kind::Vertex:
          if (wk.level() == target_level && wk.label() == target_label) c += 1.0;
          break;
        case GreenTarget::Kind::Sphere:
          if (wk.level() == static_cast<std::uint32_t>(target.n)) c += 1.0;
          break;
        case GreenTarget::Kind::Ball:
          if (wk.level() <= static_cast<std::uint32_t>(target.n)) c += 1.0;
          break;
      }
      if (step == horizon) break;
      wk.step(rng);
    }
    counts[i] = c;
  });

  double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(paths);
  double var = 0.0;
  for (double c : counts) var += (c - mean) * (c - mean);
  var = paths > 1 ? var / static_cast<double>(paths - 1) : 0.0;
  est.value = mean;
  est.std_error = std::sqrt(var / static_cast<double>(paths));
  return est;
}

GreenEstimate green_closed_form_tree(const Kernel& k, const GraphOracle& g, VertexId w) {
  if (g.family() != GraphFamily::RegularTree || k.rule() != KernelRule::SimpleRw)
    throw_config("closed-form Green values exist only for the simple walk on regular trees");
  int q = g.tree_branching();
  GreenEstimate est;
  est.source = g.base();
  est.target = g.label(w);
  est.method = GreenMethod::ClosedFormTree;
  est.lower_bound = false;
  double gee = static_cast<double>(q) / (q - 1);
  est.value = gee * std::pow(1.0 / q, static_cast<double>(g.level(w)));
  return est;
}

Transience declared_transience(const Kernel& k, const GraphOracle& g) {
  if (k.rule() == KernelRule::TreeDrift) {
    if (k.param() > 0.5) return Transience::Transient;
    if (k.param() < 0.5) return Transience::Recurrent;
    return Transience::Unknown;
  }
  switch (g.family()) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3: return Transience::Transient;
    case GraphFamily::Lattice:
      return g.lattice_dim() >= 3 ? Transience::Transient : Transience::Recurrent;
    case GraphFamily::HalfLine:
    case GraphFamily::ExplicitFinite: return Transience::Recurrent;
  }
  return Transience::Unknown;
}

TransienceCheck transience_check(const Kernel& k, const GraphOracle& g, const Limits& lim) {
  TransienceCheck out;
  out.declared = declared_transience(k, g);
  if (g.family() == GraphFamily::ExplicitFinite) return out;  // no absorption at any radius

  std::vector<int> ladder{12, 24, 48};
  if (g.family() == GraphFamily::Lattice && g.lattice_dim() >= 4) ladder = {8, 16, 32};

  for (int R : ladder) {
    double gee;
    if (k.radial(g)) {
      gee = radial_sphere_visits(k, g, R)[0];
    } else {
      auto ball = build_ball(g, g.base(), R, lim);
      gee = green_row_exact(k, g, ball, g.base(), lim)[0];
    }
    out.gee_by_radius.emplace_back(R, gee);
  }

  double d1 = out.gee_by_radius[1].second - out.gee_by_radius[0].second;
  double d2 = out.gee_by_radius[2].second - out.gee_by_radius[1].second;
  double g3 = out.gee_by_radius[2].second;
  out.increment_ratio = d1 > 0.0 ? d2 / d1 : 0.0;
  // escaping walks gain geometrically less mass per doubling; recurrent ones
  // gain the same or more (log / linear growth)
  out.numeric_transient_evidence = d2 <= 1e-9 * g3 || out.increment_ratio <= 0.8;
  out.transient = out.numeric_transient_evidence && out.declared != Transience::Recurrent;
  return out;
}

TransienceCheck require_transient(const Kernel& k, const GraphOracle& g, const Limits& lim) {
  auto check = transience_check(k, g, lim);
  if (!check.transient) throw_hypothesis("transience required");
  return check;
}

BallProfile green_ball_profile(const Kernel& k, const GraphOracle& g, int n_max, int M,
                               const BallProfileOptions& opt, const Limits& lim) {
  if (n_max < 0 || M < 0) throw_config("green_ball_profile: n_max and M must be non-negative");
  require_transient(k, g, lim);

  BallProfile prof;
  prof.M = M;
  prof.n_max = n_max;
  prof.radial_path = k.radial(g);

  int levels = n_max + M;
  if (prof.radial_path) {
    prof.radius_used = levels + std::max(opt.margin, 8);
    auto u = radial_sphere_visits(k, g, prof.radius_used);
    prof.sphere_mass.assign(u.begin(), u.begin() + levels + 1);
  } else {
    // ball truncation converges polynomially here, so a large margin buys
    // little; keep the ball materializable instead
    prof.radius_used = levels + std::min(opt.margin, 12);
    auto ball = build_ball(g, g.base(), prof.radius_used, lim);
    auto row = green_row_exact(k, g, ball, g.base(), lim);
    prof.sphere_mass.assign(static_cast<std::size_t>(levels) + 1, 0.0);
    for (int l = 0; l <= levels; ++l)
      for (auto idx : ball.sphere[static_cast<std::size_t>(l)]) prof.sphere_mass[static_cast<std::size_t>(l)] += row[idx];
  }

  prof.ball_mass.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  double acc = 0.0;
  int l = 0;
  for (int n = 0; n <= n_max; ++n) {
    for (; l <= n + M; ++l) acc += prof.sphere_mass[static_cast<std::size_t>(l)];
    prof.ball_mass[static_cast<std::size_t>(n)] = acc;
  }

  if (opt.mc_paths > 0) {
    int count = std::max(1, opt.mc_sample_count);
    for (int i = 0; i < count; ++i) {
      int n = n_max * (i + 1) / count;
      auto mc = green_monte_carlo(k, g, g.base(), GreenTarget::ball(n + M), opt.mc_paths,
                                  opt.mc_horizon, opt.seed + static_cast<std::uint64_t>(i) + 1,
                                  opt.threads);
      BallProfile::CrossCheck cc;
      cc.n = n;
      cc.exact = prof.ball_mass[static_cast<std::size_t>(n)];
      cc.mc = mc.value;
      cc.mc_std_error = mc.std_error.value_or(0.0);
      cc.within_3_sigma = std::abs(cc.mc - cc.exact) <= 3.0 * cc.mc_std_error + 1e-9;
      prof.cross_checks.push_back(cc);
    }
  }
  return prof;
}

GreenInequalityReport green_inequality_checks(const Kernel& k, const GraphOracle& g, int radius,
                                              const Limits& lim) {
  if (radius < 1) throw_config("green_inequality_checks: radius must be >= 1");
  auto cert = k.certificates(g);
  GreenInequalityReport rep;
  rep.eps0 = cert.eps0;
  rep.K = cert.K;
  rep.sphere_growth_bound = (cert.K + 1) / (cert.eps0 * cert.eps0);
  rep.worst_neighbor_slack = std::numeric_limits<double>::infinity();
  rep.worst_sphere_slack = std::numeric_limits<double>::infinity();

  // evaluate g(e, .) with enough truncation slack that the comparisons below
  // reflect the untruncated function
  std::vector<double> by_level;       // radial families: g(e,w) for |w| = l
  std::vector<double> sphere_masses;  // g(e, S_l)
  auto ball = build_ball(g, g.base(), radius, lim);
  std::vector<double> by_vertex;

  if (k.radial(g)) {
    int R_big = radius + 40;
    auto u = radial_sphere_visits(k, g, R_big);
    by_level.resize(static_cast<std::size_t>(radius) + 2);
    sphere_masses.resize(static_cast<std::size_t>(radius) + 2);
    for (int l = 0; l <= radius + 1; ++l) {
      sphere_masses[static_cast<std::size_t>(l)] = u[l];
      by_level[static_cast<std::size_t>(l)] = u[l] / static_cast<double>(sphere_size(g, l));
    }
    by_vertex.resize(ball.size());
    for (std::size_t i = 0; i < ball.size(); ++i) by_vertex[i] = by_level[ball.level[i]];
  } else {
    int R_big = radius + 15;
    auto big = build_ball(g, g.base(), R_big, lim);
    auto row = green_row_exact(k, g, big, g.base(), lim);
    by_vertex.resize(ball.size());
    for (std::size_t i = 0; i < ball.size(); ++i) by_vertex[i] = row[big.index_of(ball.vertices[i])];
    sphere_masses.assign(static_cast<std::size_t>(radius) + 2, 0.0);
    for (int l = 0; l <= radius + 1; ++l)
      for (auto idx : big.sphere[static_cast<std::size_t>(l)])
        sphere_masses[static_cast<std::size_t>(l)] += row[idx];
  }

  for (std::size_t i = 0; i < ball.size(); ++i) {
    for (std::uint32_t e = ball.row_ptr[i]; e < ball.row_ptr[i + 1]; ++e) {
      std::size_t j = ball.col[e];
      double slack = by_vertex[i] - rep.eps0 * by_vertex[j];
      rep.checked_pairs += 1;
      rep.worst_neighbor_slack = std::min(rep.worst_neighbor_slack, slack);
      if (slack < -1e-12 * by_vertex[j]) rep.neighbor_violations += 1;
    }
  }

  for (int n = 0; n < radius; ++n) {
    double lhs = sphere_masses[static_cast<std::size_t>(n) + 1];
    double rhs = rep.sphere_growth_bound * sphere_masses[static_cast<std::size_t>(n)];
    rep.checked_spheres += 1;
    rep.worst_sphere_slack = std::min(rep.worst_sphere_slack, rhs - lhs);
    if (lhs > rhs * (1.0 + 1e-12)) rep.sphere_violations += 1;
  }

  rep.ok = rep.neighbor_violations == 0 && rep.sphere_violations == 0;
  return rep;
}

}  // namespace floydwalk
