#include "floydwalk/floyd_metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "floydwalk/error.hpp"

namespace floydwalk {

std::vector<double> floyd_prefix_sums(const FloydFunction& f, std::uint32_t max_level) {
  std::vector<double> F(static_cast<std::size_t>(max_level) + 1);
  long double acc = 0.0L;
  F[0] = 0.0;
  for (std::uint32_t i = 0; i < max_level; ++i) {
    acc += f.eval(i);
    F[i + 1] = static_cast<double>(acc);
  }
  return F;
}

FloydMetricEngine::FloydMetricEngine(GraphOracle g, FloydFunction f, Limits lim)
    : g_(std::move(g)), f_(std::move(f)), lim_(lim) {
  exact_family_ =
      g_.family() == GraphFamily::RegularTree || g_.family() == GraphFamily::HalfLine;
}

std::shared_ptr<const BallGraph> FloydMetricEngine::ball_at(int radius) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = balls_.find(radius);
  if (it != balls_.end()) return it->second;
  auto b = std::make_shared<const BallGraph>(build_ball(g_, g_.base(), radius, lim_));
  balls_.emplace(radius, b);
  return b;
}

double FloydMetricEngine::dijkstra(const BallGraph& ball, VertexId v, VertexId w) const {
  // fixed source order keeps d_f(v,w) == d_f(w,v) bit-exact
  if (w.v < v.v) std::swap(v, w);
  std::uint32_t src = ball.index_of(v);
  std::uint32_t dst = ball.index_of(w);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(ball.size(), inf);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.emplace(0.0, src);
  while (!pq.empty()) {
    auto [d, x] = pq.top();
    pq.pop();
    if (d > dist[x]) continue;
    if (x == dst) return d;
    for (std::uint32_t k = ball.row_ptr[x]; k < ball.row_ptr[x + 1]; ++k) {
      std::uint32_t y = ball.col[k];
      double wgt = f_.eval(std::min(ball.level[x], ball.level[y]));
      if (dist[x] + wgt < dist[y]) {
        dist[y] = dist[x] + wgt;
        pq.emplace(dist[y], y);
      }
    }
  }
  throw_cap("floyd distance: target unreachable inside truncation ball");
}

FloydDistance FloydMetricEngine::distance(VertexId v, VertexId w, int radius) const {
  std::uint32_t lv = g_.level(v), lw = g_.level(w);
  std::uint32_t lmax = std::max(lv, lw);
  if (radius < static_cast<int>(lmax))
    throw_range("floyd distance: radius below max(|v|,|w|)");
  if (f_.support_end() <= lmax)
    throw_range("floyd distance: Floyd table shorter than the query levels");

  FloydDistance out;
  if (exact_family_) {
    auto rep = g_.geodesic_nearest_point(v, w, lim_);
    auto F = floyd_prefix_sums(f_, lmax);
    out.value = F[lv] + F[lw] - 2.0 * F[rep.m_level];
    out.converged = true;
    out.exact = true;
    out.radius_used = static_cast<int>(lmax);
    return out;
  }

  int r0 = std::min(radius, static_cast<int>(lmax) + 2);
  double prev = std::numeric_limits<double>::infinity();
  for (int r = r0;; r = std::min(radius, r + 4)) {
    double val = dijkstra(*ball_at(r), v, w);
    out.value = val;
    out.radius_used = r;
    if (std::isfinite(prev) && std::abs(prev - val) <= rel_tol * std::max(val, 1e-300)) {
      out.converged = true;
      return out;
    }
    prev = val;
    if (r >= radius) return out;
  }
}

Inequality1Report FloydMetricEngine::check_inequality1(VertexId v, VertexId w, int radius) const {
  Inequality1Report rep;
  auto near = g_.geodesic_nearest_point(v, w, lim_);
  rep.m = near.m;
  rep.m_level = near.m_level;
  rep.gromov = near.gromov;

  int r_eff = std::max(radius, static_cast<int>(near.max_level_on_path) + 2);
  rep.df = distance(v, w, r_eff);
  rep.nu_at_m = f_.nu(rep.m_level);
  rep.tau_at_gromov = f_.tau(static_cast<std::uint32_t>(std::floor(rep.gromov)));
  const double slack = 1e-12;
  rep.pass_nu = rep.df.value <= rep.nu_at_m * (1.0 + slack) + 1e-300;
  rep.pass_tau = rep.df.value <= rep.tau_at_gromov * (1.0 + slack) + 1e-300;
  return rep;
}

FloydDistance floyd_distance(const GraphOracle& g, const FloydFunction& f, VertexId v, VertexId w,
                             int radius, Limits lim) {
  return FloydMetricEngine(g, f, lim).distance(v, w, radius);
}

Inequality1Report check_inequality1(const GraphOracle& g, const FloydFunction& f, VertexId v,
                                    VertexId w, int radius, Limits lim) {
  return FloydMetricEngine(g, f, lim).check_inequality1(v, w, radius);
}

}  // namespace floydwalk
