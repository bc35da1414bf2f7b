#include "floydwalk/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <unordered_set>

#include <Eigen/SparseCore>

#include "floydwalk/error.hpp"
#include "floydwalk/green.hpp"

namespace floydwalk {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fails: return "fails";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// iterate x -> P x (twice when squared) until the growth factor stabilizes
double power_iteration(const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
                       Eigen::Index dim, const SpectralOptions& opt, bool squared) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  Eigen::VectorXd y(dim), z(dim);
  double lambda = 0.0;
  for (std::uint64_t it = 0; it < opt.max_iterations; ++it) {
    apply(x, y);
    if (squared) {
      apply(y, z);
      y.swap(z);
    }
    double nrm = y.norm();
    if (nrm == 0.0) return 0.0;  // kernel vanished on the ball
    x = y / nrm;
    double next = squared ? std::sqrt(nrm) : nrm;
    if (std::abs(next - lambda) <= opt.tol * std::max(1.0, next)) return next;
    lambda = next;
  }
  throw_numeric("power iteration did not converge within the iteration budget");
}

bool needs_squared_operator(const Kernel& k, const GraphOracle& g) {
  if (!g.bipartite()) return false;
  switch (k.rule()) {
    case KernelRule::LazyRw: return false;  // positive diagonal, aperiodic
    case KernelRule::BoundedRangeMixture: {
      const auto& w = k.step_weights();
      for (std::size_t j = 1; j < w.size(); j += 2)
        if (w[j] > 0.0) return false;  // an even sub-step count gives P(v,v) > 0
      return true;
    }
    default: return true;
  }
}

double leading_truncated(const Kernel& k, const GraphOracle& g, int R, const SpectralOptions& opt,
                         const Limits& lim, bool squared) {
  if (k.radial(g)) {
    auto A = k.radial_matrix(g, R);
    auto dim = static_cast<Eigen::Index>(R + 1);
    auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
      y.setZero();
      for (int i = 0; i <= R; ++i) {
        double acc = 0.0;
        for (int j = std::max(0, i - A.band); j <= std::min(R, i + A.band); ++j)
          acc += A.at(i, j) * x[j];
        y[i] = acc;
      }
    };
    return power_iteration(apply, dim, opt, squared);
  }

  auto ball = build_ball(g, g.base(), R, lim);
  auto n = static_cast<Eigen::Index>(ball.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index i = 0; i < n; ++i)
    for (auto& [w, p] : k.row(g, ball.vertices[static_cast<std::size_t>(i)]))
      if (auto j = ball.find(w)) trips.emplace_back(i, static_cast<Eigen::Index>(*j), p);
  SpMat P(n, n);
  P.setFromTriplets(trips.begin(), trips.end());
  auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y.noalias() = P * x; };
  return power_iteration(apply, n, opt, squared);
}

// max over the (n, w) grid of p-hat^{(n)}(e,w) / rho^n
std::pair<double, int> decay_constant(const Kernel& k, const GraphOracle& g, double rho,
                                      const SpectralOptions& opt, const Limits& lim) {
  double c_hat = 0.0;
  int points = 0;
  int n_max = opt.c_hat_n_max, l_max = opt.c_hat_level_max;
  int range = k.certificates(g).range;

  if (k.radial(g)) {
    int R = n_max * range + l_max + 8;
    auto A = k.radial_matrix(g, R);
    std::vector<double> u(static_cast<std::size_t>(R) + 1, 0.0), v(u);
    u[0] = 1.0;
    for (int n = 1; n <= n_max; ++n) {
      std::fill(v.begin(), v.end(), 0.0);
      for (int i = 0; i <= R; ++i) {
        if (u[static_cast<std::size_t>(i)] == 0.0) continue;
        for (int j = std::max(0, i - A.band); j <= std::min(R, i + A.band); ++j)
          v[static_cast<std::size_t>(j)] += u[static_cast<std::size_t>(i)] * A.at(i, j);
      }
      u.swap(v);
      double rho_n = std::pow(rho, n);
      for (int l = 0; l <= l_max; ++l) {
        double p = u[static_cast<std::size_t>(l)] / static_cast<double>(g.ball_size_hint(l) -
                                                                        (l ? g.ball_size_hint(l - 1) : 0));
        ++points;
        c_hat = std::max(c_hat, p / rho_n);
      }
    }
    return {c_hat, points};
  }

  int R = n_max * range + 2;
  auto ball = build_ball(g, g.base(), R, lim);
  auto dim = static_cast<Eigen::Index>(ball.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index i = 0; i < dim; ++i)
    for (auto& [w, p] : k.row(g, ball.vertices[static_cast<std::size_t>(i)]))
      if (auto j = ball.find(w)) trips.emplace_back(static_cast<Eigen::Index>(*j), i, p);
  SpMat PT(dim, dim);  // transpose: u_{n+1} = P^T u_n evolves the e-row
  PT.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);
  u[ball.index_of(g.base())] = 1.0;
  std::vector<std::uint32_t> grid;
  for (std::uint32_t i = 0; i < ball.size(); ++i)
    if (ball.level[i] <= static_cast<std::uint32_t>(l_max)) grid.push_back(i);

  for (int n = 1; n <= n_max; ++n) {
    u = PT * u;
    double rho_n = std::pow(rho, n);
    for (auto i : grid) {
      ++points;
      c_hat = std::max(c_hat, u[static_cast<Eigen::Index>(i)] / rho_n);
    }
  }
  return {c_hat, points};
}

}  // namespace

SpectralEstimate spectral_radius_estimate(const Kernel& k, const GraphOracle& g,
                                          const std::vector<int>& R_list,
                                          const SpectralOptions& opt, const Limits& lim) {
  if (R_list.empty()) throw_config("spectral_radius_estimate: empty radius list");
  for (std::size_t i = 1; i < R_list.size(); ++i)
    if (R_list[i] <= R_list[i - 1]) throw_config("spectral_radius_estimate: radii must increase");

  SpectralEstimate est;
  est.used_squared_operator = needs_squared_operator(k, g);
  for (int R : R_list) {
    double lambda = leading_truncated(k, g, R, opt, lim, est.used_squared_operator);
    est.radius_sequence.emplace_back(R, lambda);
  }
  est.rho_hat = est.radius_sequence.back().second;
  if (est.radius_sequence.size() >= 2) {
    double prev = est.radius_sequence[est.radius_sequence.size() - 2].second;
    est.converged = std::abs(est.rho_hat - prev) < opt.converged_tol;
  }

  auto [c_hat, points] = decay_constant(k, g, est.rho_hat, opt, lim);
  est.c_hat = c_hat;
  est.c_hat_grid_points = points;
  return est;
}

namespace {

struct RatioResult {
  double ratio = std::numeric_limits<double>::infinity();
  std::vector<VertexId> set;
};

double inner_boundary_ratio(const GraphOracle& g, const std::vector<VertexId>& set,
                            const std::unordered_set<std::uint64_t>& members) {
  std::size_t boundary = 0;
  for (VertexId v : set) {
    for (VertexId w : g.neighbors(v)) {
      if (!members.count(w.v)) {
        ++boundary;
        break;
      }
    }
  }
  return static_cast<double>(boundary) / static_cast<double>(set.size());
}

void consider(RatioResult& best, const GraphOracle& g, const std::vector<VertexId>& set,
              const std::unordered_set<std::uint64_t>& members) {
  if (set.empty()) return;
  double r = inner_boundary_ratio(g, set, members);
  if (r == 0.0) return;  // whole finite graph: boundary degenerates
  if (r < best.ratio) {
    best.ratio = r;
    best.set = set;
  }
}

// binary-partition enumeration of connected supersets of `set`: each frontier
// vertex is either taken (recurse) or excluded for the rest of this branch
void enumerate_connected(const GraphOracle& g, std::vector<VertexId>& set,
                         std::unordered_set<std::uint64_t>& members,
                         std::unordered_set<std::uint64_t>& excluded, std::uint64_t min_id,
                         int max_size, std::uint64_t& visits, std::uint64_t visit_cap,
                         RatioResult& best) {
  if (++visits > visit_cap) throw_cap("isoperimetric enumeration exceeded the subset budget");
  consider(best, g, set, members);
  if (static_cast<int>(set.size()) >= max_size) return;

  std::vector<VertexId> frontier;
  for (VertexId v : set)
    for (VertexId w : g.neighbors(v))
      if (w.v >= min_id && !members.count(w.v) && !excluded.count(w.v)) {
        frontier.push_back(w);
        excluded.insert(w.v);  // dedup within this frontier; re-decided below
      }
  for (VertexId w : frontier) excluded.erase(w.v);
  std::sort(frontier.begin(), frontier.end());

  for (std::size_t i = 0; i < frontier.size(); ++i) {
    VertexId w = frontier[i];
    set.push_back(w);
    members.insert(w.v);
    enumerate_connected(g, set, members, excluded, min_id, max_size, visits, visit_cap, best);
    members.erase(w.v);
    set.pop_back();
    excluded.insert(w.v);
  }
  for (VertexId w : frontier) excluded.erase(w.v);
}

std::vector<int> default_ball_radii(const GraphOracle& g, const Limits& lim) {
  switch (g.family()) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3: {
      std::vector<int> out;
      for (int R : {2, 4, 8, 12, 16, 19})
        if (g.ball_size_hint(R) <= lim.max_ball_vertices) out.push_back(R);
      return out;
    }
    case GraphFamily::Lattice:
    case GraphFamily::HalfLine: {
      int d = g.family() == GraphFamily::Lattice ? g.lattice_dim() : 1;
      return {15 * d, 25 * d, 35 * d, 45 * d};
    }
    case GraphFamily::ExplicitFinite: return {1, 2, 4, 8};
  }
  return {2, 4, 8};
}

}  // namespace

IsoperimetricReport isoperimetric_constant(const GraphOracle& g, IsoMode mode,
                                           const IsoOptions& opt, const Limits& lim) {
  IsoperimetricReport rep;
  rep.mode = mode;
  RatioResult best;

  int exact_cap = mode == IsoMode::ExactSmall ? opt.exact_max_size
                                              : std::min(opt.exact_max_size, 6);
  if (exact_cap >= 1) {
    std::vector<std::uint64_t> roots;
    if (g.family() == GraphFamily::ExplicitFinite) {
      for (std::uint64_t r = 0; r < g.vertex_count(); ++r) roots.push_back(r);
    } else {
      roots.push_back(g.base().v);  // transitive families: every set translates here
    }
    std::uint64_t visits = 0;
    for (std::uint64_t r : roots) {
      std::vector<VertexId> set{VertexId{r}};
      std::unordered_set<std::uint64_t> members{r}, excluded;
      // ids below the root are handled by that smaller root's pass
      std::uint64_t min_id = g.family() == GraphFamily::ExplicitFinite ? r : 0;
      enumerate_connected(g, set, members, excluded, min_id, exact_cap, visits,
                          lim.max_subset_visits, best);
    }
    rep.sets_enumerated = visits;
  }

  if (mode == IsoMode::Heuristic) {
    auto radii = opt.ball_radii.empty() ? default_ball_radii(g, lim) : opt.ball_radii;
    std::sort(radii.begin(), radii.end());
    int best_ball = -1;
    double best_ball_ratio = std::numeric_limits<double>::infinity();
    for (int R : radii) {
      double ratio;
      if (g.family() == GraphFamily::ExplicitFinite) {
        auto ball = build_ball(g, g.base(), R, lim);
        if (ball.size() == g.vertex_count()) continue;  // boundary degenerates
        std::unordered_set<std::uint64_t> members;
        for (VertexId v : ball.vertices) members.insert(v.v);
        ratio = inner_boundary_ratio(g, ball.vertices, members);
      } else {
        // dB_R = S_R on the infinite families; sizes are closed-form
        std::uint64_t bR = g.ball_size_hint(R);
        if (bR == std::numeric_limits<std::uint64_t>::max()) continue;
        std::uint64_t sR = bR - g.ball_size_hint(R - 1);
        ratio = static_cast<double>(sR) / static_cast<double>(bR);
      }
      rep.ball_ratios.emplace_back(R, ratio);
      if (ratio < best_ball_ratio && g.ball_size_hint(R) <= lim.max_ball_vertices) {
        best_ball_ratio = ratio;
        best_ball = R;
      }
    }
    if (best_ball >= 0 && best_ball_ratio < best.ratio) {
      auto ball = build_ball(g, g.base(), best_ball, lim);
      std::unordered_set<std::uint64_t> members;
      for (VertexId v : ball.vertices) members.insert(v.v);
      consider(best, g, ball.vertices, members);
    }

    for (int s = 0; s < opt.random_sets; ++s) {
      RngStream rng(opt.seed, static_cast<std::uint64_t>(s) + 101);
      std::vector<VertexId> set{g.base()};
      std::unordered_set<std::uint64_t> members{g.base().v};
      std::vector<VertexId> frontier = g.neighbors(g.base());
      while (static_cast<int>(set.size()) < opt.random_set_size && !frontier.empty()) {
        std::size_t pick = rng.below(frontier.size());
        VertexId v = frontier[pick];
        frontier[pick] = frontier.back();
        frontier.pop_back();
        if (members.count(v.v)) continue;
        members.insert(v.v);
        set.push_back(v);
        for (VertexId w : g.neighbors(v))
          if (!members.count(w.v)) frontier.push_back(w);
      }
      consider(best, g, set, members);
    }
  }

  if (best.set.empty()) throw_numeric("isoperimetric search produced no candidate set");
  rep.eta_hat = best.ratio;
  rep.witness_set = std::move(best.set);
  rep.witness_ratio = best.ratio;

  int small_ball_radii = 0;
  for (auto& [R, ratio] : rep.ball_ratios)
    if (ratio < 0.05) ++small_ball_radii;
  if (small_ball_radii >= 3)
    rep.verdict = Verdict::Fails;
  else if (rep.eta_hat >= 0.05)
    rep.verdict = Verdict::Pass;
  else
    rep.verdict = Verdict::Inconclusive;
  return rep;
}

HypothesisReport spectral_hypothesis_check(const Kernel& k, const GraphOracle& g,
                                           const HypothesisOptions& opt, const Limits& lim) {
  HypothesisReport rep;
  auto cert = k.certificates(g);
  auto vc = verify_certificates(k, g, opt.certificate_samples, opt.seed);

  rep.reversibility_declared = cert.has_reversing_measure;
  rep.reversibility_residual = vc.reversibility_max_residual;
  rep.strong_reversibility_ok = cert.has_reversing_measure && vc.reversing_bounds_ok &&
                                vc.reversibility_max_residual <= 1e-12;
  if (!cert.has_reversing_measure) rep.notes.push_back("reversing measure not declared");

  rep.eps0 = cert.eps0;
  rep.K = cert.K;
  rep.uniform_irreducibility_ok = cert.eps0 > 0.0 && vc.irreducibility_ok;
  if (vc.row_sum_max_err > 1e-12) rep.notes.push_back("row sums off by more than 1e-12");

  IsoOptions iso_opt;
  iso_opt.seed = opt.seed;
  auto iso = isoperimetric_constant(g, IsoMode::Heuristic, iso_opt, lim);
  rep.eta_hat = iso.eta_hat;
  rep.isoperimetric = iso.verdict;
  if (iso.verdict == Verdict::Fails)
    rep.notes.push_back("strong isoperimetric inequality fails (ball ratios below 0.05)");

  std::vector<int> radii = opt.rho_radii;
  if (radii.empty()) {
    if (k.radial(g))
      radii = {10, 15, 20, 25, 30, 35, 40, 45};
    else if (g.family() == GraphFamily::ExplicitFinite)
      radii = {2, 4};
    else
      radii = {10, 20, 30, 40};
  }
  SpectralOptions sopt;
  auto spec = spectral_radius_estimate(k, g, radii, sopt, lim);
  rep.rho_hat = spec.rho_hat;
  rep.rho_converged = spec.converged;
  rep.rho_below_one = spec.converged && spec.rho_hat < 1.0 - 2.0 * sopt.converged_tol;
  rep.c_hat = spec.c_hat;
  if (!spec.converged) rep.notes.push_back("spectral radius sequence not converged");

  rep.all_pass = rep.strong_reversibility_ok && rep.uniform_irreducibility_ok &&
                 rep.isoperimetric == Verdict::Pass && rep.rho_below_one &&
                 std::isfinite(rep.c_hat);
  return rep;
}

}  // namespace floydwalk
