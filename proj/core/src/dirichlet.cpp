#include "floydwalk/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "floydwalk/error.hpp"
#include "floydwalk/floyd_metric.hpp"
#include "floydwalk/parallel.hpp"
#include "floydwalk/rng.hpp"

namespace floydwalk {

namespace {

// first integer n with n >= x
std::uint32_t first_at_least(double x) {
  double c = std::ceil(x - 1e-12);
  return c <= 0.0 ? 0u : static_cast<std::uint32_t>(c);
}

// first integer n with n > x
std::uint32_t first_above(double x) {
  double f = std::floor(x + 1e-12);
  return f < 0.0 ? 0u : static_cast<std::uint32_t>(f) + 1u;
}

std::uint64_t saturating_pow(std::uint64_t b, std::uint32_t e) {
  std::uint64_t r = 1;
  for (std::uint32_t i = 0; i < e; ++i) {
    if (r > std::numeric_limits<std::uint64_t>::max() / b) return std::numeric_limits<std::uint64_t>::max();
    r *= b;
  }
  return r;
}

// prefix sums that fall back to the tail upper bound past table support
std::vector<double> prefix_sums_with_tail(const FloydFunction& f, std::uint32_t max_level) {
  std::vector<double> F(static_cast<std::size_t>(max_level) + 1, 0.0);
  long double acc = 0.0L;
  std::uint32_t support = f.support_end();
  for (std::uint32_t i = 0; i < max_level; ++i) {
    acc += i < support ? f.eval(i) : f.eval_upper(i);
    F[i + 1] = static_cast<double>(acc);
  }
  return F;
}

VertexId step_outward(const GraphOracle& g, VertexId v) {
  for (auto nb : g.neighbors(v))
    if (g.level(nb) == g.level(v) + 1) return nb;
  throw_range("no outward neighbour found");
}

VertexId lattice_vertex_at(const GraphOracle& g, const std::vector<std::int64_t>& coords) {
  VertexId v = g.base();
  for (std::size_t i = 0; i < coords.size(); ++i) {
    std::size_t nb = 2 * i + (coords[i] < 0 ? 1 : 0);
    for (std::int64_t s = 0; s < std::llabs(coords[i]); ++s) v = g.neighbors(v)[nb];
  }
  return v;
}

}  // namespace

EventSpec default_event_spec(const StepStats& stats, std::uint32_t horizon) {
  if (!(stats.m_bar > 0.0)) throw_config("event spec needs m_bar > 0");
  if (!(stats.speed_lower > 0.0))
    throw_hypothesis("event calibration needs a positive lower speed; this walk shows no linear escape");
  EventSpec spec;
  spec.alpha = 1.0 / (2.0 * stats.m_bar);
  spec.eps = stats.speed_lower / 4.0;
  spec.horizon = horizon;
  spec.m_bar = stats.m_bar;
  spec.m_lower = stats.speed_lower;
  return spec;
}

EventCheck check_event_Av(const Trajectory& t, const EventSpec& spec) {
  if (!(spec.alpha > 0.0) || !(spec.eps > 0.0)) throw_config("event spec needs alpha > 0 and eps > 0");
  if (t.steps() < spec.horizon) throw_config("trajectory shorter than the event horizon");
  const std::uint32_t H = spec.horizon;
  const std::uint32_t v0 = t.levels[0];
  const double a = spec.alpha * v0;
  if (static_cast<double>(H) < a) throw_config("event horizon below alpha |v|");

  EventCheck ec;
  ec.cond2 = ec.cond3 = ec.cond4 = ec.cond5 = true;

  const std::uint32_t n_from = first_at_least(a);   // n >= alpha |v|
  const std::uint32_t n_strict = first_above(a);    // n > alpha |v|
  const double up = spec.m_bar + spec.eps;
  const double lo = spec.m_lower - spec.eps;
  for (std::uint32_t n = n_from; n <= H; ++n) {
    if (t.dist_from_start[n] > up * n) ec.cond2 = false;
    if (t.levels[n] < lo * n) ec.cond4 = false;
  }
  for (std::uint32_t n = std::max(n_strict, 1u); n + 1 <= H; ++n)
    if (t.step_lengths[n] > spec.eps * n) {
      ec.cond3 = false;
      break;
    }
  const double floor5 = spec.eps * v0;
  for (std::uint32_t n = v0 == 0 ? 1u : 0u; n <= H; ++n)
    if (!(t.levels[n] > floor5)) {
      ec.cond5 = false;
      break;
    }
  ec.all = ec.cond2 && ec.cond3 && ec.cond4 && ec.cond5;
  return ec;
}

SkeletonCheck evaluate_skeleton(const Trajectory& t, const EventSpec& spec) {
  const std::uint32_t H = spec.horizon;
  const std::uint32_t v0 = t.levels[0];
  const double a = spec.alpha * v0;
  SkeletonCheck sk;
  sk.k = first_at_least(a);
  if (sk.k > t.steps()) throw_config("skeleton index past the trajectory");

  double doubled_start = static_cast<double>(t.levels[0]) + t.levels[sk.k] - t.dist_from_start[sk.k];
  sk.worst_start_slack = doubled_start - v0 / 3.0;
  sk.start_ok = doubled_start >= v0 / 3.0 - 1e-12;

  const double rate = 2.0 * spec.m_lower - 3.0 * spec.eps;
  for (std::uint32_t n = std::max(first_above(a), 1u); n + 1 <= H; ++n) {
    double doubled = static_cast<double>(t.levels[n]) + t.levels[n + 1] - t.step_lengths[n];
    if (doubled < rate * n - 1e-12) ++sk.step_violations;
  }
  return sk;
}

double wilson_lower(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) throw_config("Wilson interval needs trials > 0");
  double n = static_cast<double>(trials), p = static_cast<double>(successes) / n;
  double z2 = z * z, denom = 1.0 + z2 / n;
  double center = (p + z2 / (2 * n)) / denom;
  double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
  return std::max(0.0, center - half);
}

double wilson_upper(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) throw_config("Wilson interval needs trials > 0");
  double n = static_cast<double>(trials), p = static_cast<double>(successes) / n;
  double z2 = z * z, denom = 1.0 + z2 / n;
  double center = (p + z2 / (2 * n)) / denom;
  double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
  return std::min(1.0, center + half);
}

EventScanResult event_probability_scan(const Kernel& k, const GraphOracle& g,
                                       const EventSpec& spec, const std::vector<VertexId>& v_list,
                                       const EventScanOptions& opt) {
  if (opt.trials == 0) throw_config("event scan needs trials > 0");
  if (v_list.empty()) throw_config("event scan needs at least one start vertex");
  for (std::size_t i = 0; i + 1 < v_list.size(); ++i)
    if (g.level(v_list[i]) >= g.level(v_list[i + 1]))
      throw_config("event scan starts must have strictly increasing level");

  EventScanResult res;
  res.alpha = spec.alpha;
  res.eps = spec.eps;
  res.m_bar = spec.m_bar;
  res.m_lower = spec.m_lower;
  res.horizon = spec.horizon;
  const double applicable_above = (spec.m_bar + spec.eps) / spec.eps;

  for (std::size_t vi = 0; vi < v_list.size(); ++vi) {
    EventScanRow row;
    row.v = v_list[vi];
    row.level = g.level(v_list[vi]);
    row.trials = opt.trials;
    row.skeleton_applicable = row.level > applicable_above;

    std::vector<std::uint8_t> pass(opt.trials, 0), conds(opt.trials, 0), sviol(opt.trials, 0);
    std::vector<std::uint16_t> stepviol(opt.trials, 0);
    parallel_for(opt.trials, opt.threads, [&](std::size_t trial) {
      auto t = sample_trajectory(k, g, row.v, spec.horizon, opt.seed,
                                 static_cast<std::uint64_t>(vi) * opt.trials + trial);
      auto ec = check_event_Av(t, spec);
      conds[trial] = static_cast<std::uint8_t>(ec.cond2 | (ec.cond3 << 1) | (ec.cond4 << 2) |
                                               (ec.cond5 << 3));
      pass[trial] = ec.all;
      if (ec.all) {
        auto sk = evaluate_skeleton(t, spec);
        sviol[trial] = !sk.start_ok;
        stepviol[trial] = static_cast<std::uint16_t>(std::min<std::uint32_t>(sk.step_violations, 65535));
      }
    });

    std::uint32_t cond_counts[4] = {0, 0, 0, 0};
    for (std::uint32_t t = 0; t < opt.trials; ++t) {
      row.passes += pass[t];
      for (int b = 0; b < 4; ++b) cond_counts[b] += (conds[t] >> b) & 1;
      row.skeleton_start_violations += sviol[t];
      row.skeleton_step_violations += stepviol[t];
    }
    row.p_hat = static_cast<double>(row.passes) / opt.trials;
    row.wilson_lo = wilson_lower(row.passes, opt.trials);
    row.wilson_hi = wilson_upper(row.passes, opt.trials);
    for (int b = 0; b < 4; ++b) row.cond_pass_rate[b] = static_cast<double>(cond_counts[b]) / opt.trials;
    if (row.skeleton_applicable)
      res.skeleton_violations_applicable +=
          row.skeleton_start_violations + row.skeleton_step_violations;
    res.rows.push_back(std::move(row));
  }

  res.min_consecutive_delta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < res.rows.size(); ++i)
    res.min_consecutive_delta =
        std::min(res.min_consecutive_delta, res.rows[i + 1].p_hat - res.rows[i].p_hat);
  if (res.rows.size() < 2) res.min_consecutive_delta = 0.0;
  res.monotone = res.min_consecutive_delta >= 0.0;
  return res;
}

const char* partition_rule_name(PartitionRule r) {
  switch (r) {
    case PartitionRule::TreeSubtree: return "tree_subtree";
    case PartitionRule::LatticeSector: return "lattice_sector";
    case PartitionRule::SingleCell: return "single_cell";
    case PartitionRule::FloydCluster: return "floyd_cluster";
  }
  return "?";
}

std::uint32_t BoundaryCellPartition::cell_of(const GraphOracle& g, VertexId v) const {
  switch (rule) {
    case PartitionRule::SingleCell: return 0;
    case PartitionRule::TreeSubtree: {
      auto w = g.word_of(v);
      if (w.empty()) throw_range("base point belongs to no boundary cell");
      return w[0];
    }
    case PartitionRule::LatticeSector: {
      int d = g.lattice_dim();
      int best = -1;
      std::int64_t best_abs = 0;
      for (int i = 0; i < d; ++i) {
        std::int64_t c = g.lattice_coordinate(v, i);
        if (std::llabs(c) > best_abs) {
          best_abs = std::llabs(c);
          best = i;
        }
      }
      if (best < 0) throw_range("base point belongs to no boundary cell");
      return static_cast<std::uint32_t>(2 * best) + (g.lattice_coordinate(v, best) < 0 ? 1u : 0u);
    }
    case PartitionRule::FloydCluster: {
      auto it = std::lower_bound(member_vertex.begin(), member_vertex.end(), v,
                                 [](VertexId a, VertexId b) { return a.v < b.v; });
      if (it == member_vertex.end() || it->v != v.v)
        throw_range("vertex is not on the partitioned exit sphere");
      return member_cell[static_cast<std::size_t>(it - member_vertex.begin())];
    }
  }
  throw_range("unknown partition rule");
}

BoundaryCellPartition make_boundary_partition(const GraphOracle& g, const FloydFunction& f,
                                              std::uint32_t R_exit, double cluster_diameter_cap,
                                              const Limits& lim) {
  if (R_exit < 1) throw_config("exit sphere radius must be >= 1");
  BoundaryCellPartition part;
  part.R_exit = R_exit;
  auto F = prefix_sums_with_tail(f, R_exit + 1);

  auto fill_uniform_distance = [&](double offdiag) {
    std::size_t C = part.cells.size();
    part.intercell.assign(C * C, 0.0);
    for (std::size_t i = 0; i < C; ++i)
      for (std::size_t j = 0; j < C; ++j)
        if (i != j) part.intercell[i * C + j] = offdiag;
  };

  switch (g.family()) {
    case GraphFamily::HalfLine: {
      part.rule = PartitionRule::SingleCell;
      BoundaryCell c;
      c.id = 0;
      c.label = "cell:0";
      VertexId v = g.base();
      for (std::uint32_t i = 0; i < R_exit; ++i) v = step_outward(g, v);
      c.representative = v;
      c.size = 1;
      c.diameter_exact = true;
      part.cells.push_back(std::move(c));
      part.intercell.assign(1, 0.0);
      part.distances_exact = true;
      part.distances_converged = true;
      return part;
    }

    case GraphFamily::RegularTree: {
      part.rule = PartitionRule::TreeSubtree;
      int q = g.tree_branching();
      bool encodable = static_cast<int>(R_exit) <= g.max_encodable_level();
      for (int c = 0; c <= q; ++c) {
        BoundaryCell cell;
        cell.id = static_cast<std::uint32_t>(c);
        cell.label = "subtree:" + std::to_string(c);
        std::vector<std::uint8_t> w(encodable ? R_exit : 1, 0);
        w[0] = static_cast<std::uint8_t>(c);
        cell.representative = g.encode_word(w);
        cell.size = saturating_pow(static_cast<std::uint64_t>(q), R_exit - 1);
        cell.df_diameter = R_exit >= 2 ? 2.0 * (F[R_exit] - F[1]) : 0.0;
        cell.diameter_exact = R_exit < f.support_end();
        part.cells.push_back(std::move(cell));
      }
      fill_uniform_distance(2.0 * F[R_exit]);
      part.distances_exact = R_exit < f.support_end();
      part.distances_converged = true;
      return part;
    }

    case GraphFamily::FreeProductZ3Z3: {
      part.rule = PartitionRule::TreeSubtree;
      static const char* names[4] = {"a", "a2", "b", "b2"};
      bool encodable = static_cast<int>(R_exit) <= g.max_encodable_level();
      for (int c = 0; c < 4; ++c) {
        BoundaryCell cell;
        cell.id = static_cast<std::uint32_t>(c);
        cell.label = std::string("subtree:") + names[c];
        std::vector<std::uint8_t> w;
        w.push_back(static_cast<std::uint8_t>(c));
        if (encodable)
          while (w.size() < R_exit) w.push_back(w.size() % 2 == 0 ? w[0] : (w[0] < 2 ? 2 : 0));
        cell.representative = g.encode_word(w);
        cell.size = saturating_pow(2, R_exit - 1);
        cell.df_diameter = R_exit >= 2 ? 2.0 * (F[R_exit] - F[1]) : 0.0;
        cell.diameter_exact = false;
        part.cells.push_back(std::move(cell));
      }
      // same-letter-class subtrees can be bridged at level 1 without passing
      // the base, different classes cannot
      std::size_t C = 4;
      part.intercell.assign(C * C, 0.0);
      for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = 0; j < C; ++j) {
          if (i == j) continue;
          bool same_class = (i / 2) == (j / 2);
          part.intercell[i * C + j] =
              same_class ? 2.0 * (F[R_exit] - F[1]) + f.eval(1) : 2.0 * F[R_exit];
        }
      part.distances_exact = false;
      part.distances_converged = true;
      return part;
    }

    case GraphFamily::Lattice: {
      part.rule = PartitionRule::LatticeSector;
      int d = g.lattice_dim();
      std::int64_t R = R_exit;
      for (int i = 0; i < d; ++i)
        for (int s = 0; s < 2; ++s) {
          BoundaryCell cell;
          cell.id = static_cast<std::uint32_t>(2 * i + s);
          cell.label = (s == 0 ? "+x" : "-x") + std::to_string(i + 1);
          std::vector<std::int64_t> coords(static_cast<std::size_t>(d), 0);
          coords[static_cast<std::size_t>(i)] = s == 0 ? R : -R;
          cell.representative = lattice_vertex_at(g, coords);
          part.cells.push_back(std::move(cell));
        }

      // candidate extreme members per sector: the apex and near-tie corners
      auto corners = [&](int axis, int sign) {
        std::vector<VertexId> out;
        std::vector<std::int64_t> coords(static_cast<std::size_t>(d), 0);
        coords[static_cast<std::size_t>(axis)] = sign * R;
        out.push_back(lattice_vertex_at(g, coords));
        for (int j = 0; j < d; ++j) {
          if (j == axis) continue;
          std::int64_t h = R / 2, a = R - h;
          if (a == h && j < axis) {
            --h;
            a = R - h;
          }
          for (int sj = -1; sj <= 1; sj += 2) {
            std::vector<std::int64_t> cc(static_cast<std::size_t>(d), 0);
            cc[static_cast<std::size_t>(axis)] = sign * a;
            cc[static_cast<std::size_t>(j)] = sj * h;
            out.push_back(lattice_vertex_at(g, cc));
          }
        }
        return out;
      };

      std::size_t C = part.cells.size();
      part.intercell.assign(C * C, 0.0);
      if (d <= 3) {
        FloydMetricEngine eng(g, f, lim);
        int radius = static_cast<int>(R_exit) + 10;
        bool all_conv = true;
        std::vector<std::vector<VertexId>> reps(C);
        for (int i = 0; i < d; ++i)
          for (int s = 0; s < 2; ++s) reps[static_cast<std::size_t>(2 * i + s)] = corners(i, s == 0 ? 1 : -1);
        for (std::size_t ci = 0; ci < C; ++ci) {
          double diam = 0.0;
          for (std::size_t a = 0; a < reps[ci].size(); ++a)
            for (std::size_t b = a + 1; b < reps[ci].size(); ++b) {
              auto fd = eng.distance(reps[ci][a], reps[ci][b], radius);
              diam = std::max(diam, fd.value);
              all_conv = all_conv && (fd.converged || fd.exact);
            }
          part.cells[ci].df_diameter = diam;
          part.cells[ci].diameter_exact = false;
          for (std::size_t cj = ci + 1; cj < C; ++cj) {
            double best = std::numeric_limits<double>::infinity();
            for (auto va : reps[ci])
              for (auto vb : reps[cj]) {
                auto fd = eng.distance(va, vb, radius);
                best = std::min(best, fd.value);
                all_conv = all_conv && (fd.converged || fd.exact);
              }
            part.intercell[ci * C + cj] = part.intercell[cj * C + ci] = best;
          }
        }
        part.distances_converged = all_conv;
      } else {
        // dimension too high to run the metric engine cheaply: record the
        // generic 2 F(R) upper bound and flag non-convergence
        for (auto& cell : part.cells) {
          cell.df_diameter = 2.0 * F[R_exit];
          cell.diameter_exact = false;
        }
        fill_uniform_distance(2.0 * F[R_exit]);
        part.distances_converged = false;
      }
      part.distances_exact = false;
      return part;
    }

    case GraphFamily::ExplicitFinite: {
      part.rule = PartitionRule::FloydCluster;
      if (!(cluster_diameter_cap > 0.0))
        throw_config("explicit graphs need a positive cluster diameter cap");
      part.diameter_cap = cluster_diameter_cap;

      auto ball = build_ball(g, g.base(), static_cast<int>(R_exit), lim);
      if (part.R_exit >= ball.sphere.size() || ball.sphere[R_exit].empty())
        throw_config("exit sphere is empty at this radius");
      std::vector<VertexId> members;
      for (auto li : ball.sphere[R_exit]) members.push_back(ball.vertices[li]);
      std::sort(members.begin(), members.end(), [](VertexId a, VertexId b) { return a.v < b.v; });
      if (members.size() > 1024) throw_cap("exit sphere too large to cluster");

      FloydMetricEngine eng(g, f, lim);
      int radius = static_cast<int>(R_exit) + 8;
      bool all_conv = true;
      std::vector<std::uint32_t> cell_of_member(members.size());
      std::vector<std::vector<std::uint32_t>> cell_members;
      for (std::size_t mi = 0; mi < members.size(); ++mi) {
        bool assigned = false;
        for (std::size_t ci = 0; ci < part.cells.size() && !assigned; ++ci) {
          auto fd = eng.distance(members[mi], part.cells[ci].representative, radius);
          all_conv = all_conv && (fd.converged || fd.exact);
          if (fd.value < cluster_diameter_cap / 2.0) {
            cell_of_member[mi] = static_cast<std::uint32_t>(ci);
            cell_members[ci].push_back(static_cast<std::uint32_t>(mi));
            assigned = true;
          }
        }
        if (!assigned) {
          BoundaryCell cell;
          cell.id = static_cast<std::uint32_t>(part.cells.size());
          cell.label = "cluster:" + std::to_string(cell.id);
          cell.representative = members[mi];
          cell_of_member[mi] = cell.id;
          cell_members.push_back({static_cast<std::uint32_t>(mi)});
          part.cells.push_back(std::move(cell));
        }
      }
      part.member_vertex = members;
      part.member_cell = cell_of_member;

      bool exact = true;
      std::size_t C = part.cells.size();
      for (std::size_t ci = 0; ci < C; ++ci) {
        auto& mem = cell_members[ci];
        part.cells[ci].size = mem.size();
        double diam = 0.0;
        if (mem.size() * mem.size() <= 4096) {
          for (std::size_t a = 0; a < mem.size(); ++a)
            for (std::size_t b = a + 1; b < mem.size(); ++b) {
              auto fd = eng.distance(members[mem[a]], members[mem[b]], radius);
              diam = std::max(diam, fd.value);
              all_conv = all_conv && (fd.converged || fd.exact);
            }
          part.cells[ci].diameter_exact = true;
        } else {
          for (auto mi : mem) {
            auto fd = eng.distance(members[mi], part.cells[ci].representative, radius);
            diam = std::max(diam, 2.0 * fd.value);
            all_conv = all_conv && (fd.converged || fd.exact);
          }
          part.cells[ci].diameter_exact = false;
          exact = false;
        }
        part.cells[ci].df_diameter = diam;
      }

      part.intercell.assign(C * C, 0.0);
      for (std::size_t ci = 0; ci < C; ++ci)
        for (std::size_t cj = ci + 1; cj < C; ++cj) {
          double best = std::numeric_limits<double>::infinity();
          if (cell_members[ci].size() * cell_members[cj].size() <= 4096) {
            for (auto a : cell_members[ci])
              for (auto b : cell_members[cj]) {
                auto fd = eng.distance(members[a], members[b], radius);
                best = std::min(best, fd.value);
                all_conv = all_conv && (fd.converged || fd.exact);
              }
          } else {
            for (auto a : cell_members[ci]) {
              auto fd = eng.distance(members[a], part.cells[cj].representative, radius);
              best = std::min(best, fd.value);
            }
            for (auto b : cell_members[cj]) {
              auto fd = eng.distance(part.cells[ci].representative, members[b], radius);
              best = std::min(best, fd.value);
            }
            exact = false;
          }
          part.intercell[ci * C + cj] = part.intercell[cj * C + ci] = best;
        }
      part.distances_exact = exact;
      part.distances_converged = all_conv;
      return part;
    }
  }
  throw_config("unsupported family for boundary partitions");
}

namespace {

// cell id of the walker's current position under a rule-based partition
std::uint32_t cell_of_walker(const BoundaryCellPartition& part, const GraphOracle& g,
                             const Walker& w) {
  switch (part.rule) {
    case PartitionRule::SingleCell: return 0;
    case PartitionRule::TreeSubtree: return *w.cell();
    case PartitionRule::LatticeSector:
    case PartitionRule::FloydCluster: return part.cell_of(g, *w.vertex());
  }
  throw_range("unknown partition rule");
}

}  // namespace

HarmonicMeasureEstimate harmonic_measure(const Kernel& k, const GraphOracle& g, VertexId start,
                                         const BoundaryCellPartition& part,
                                         const HarmonicMeasureOptions& opt) {
  if (opt.paths == 0) throw_config("harmonic measure needs paths > 0");
  if (g.level(start) > part.R_exit) throw_config("start must lie inside the exit ball");

  HarmonicMeasureEstimate est;
  est.start = start;
  est.paths = opt.paths;
  const std::uint32_t R = part.R_exit;
  const bool rule_based = part.rule != PartitionRule::FloydCluster;
  const std::uint32_t R_ext = R + opt.stability_extra;
  const bool track_stability = opt.stability_extra > 0 && rule_based;

  std::vector<std::int32_t> hit_cell(opt.paths, -1), ext_cell(opt.paths, -1);
  parallel_for(opt.paths, opt.threads, [&](std::size_t path) {
    RngStream rng(opt.seed, path);
    Walker w(k, g, start);
    std::int32_t c1 = -1;
    if (w.level() == R) {
      c1 = static_cast<std::int32_t>(part.cell_of(g, start));
    } else {
      for (std::uint32_t n = 0; n < opt.horizon; ++n) {
        w.step(rng);
        if (w.level() == R) {
          c1 = static_cast<std::int32_t>(cell_of_walker(part, g, w));
          break;
        }
      }
    }
    hit_cell[path] = c1;
    if (c1 >= 0 && track_stability) {
      for (std::uint32_t n = 0; n < opt.horizon && w.level() != R_ext; ++n) w.step(rng);
      if (w.level() == R_ext) ext_cell[path] = static_cast<std::int32_t>(cell_of_walker(part, g, w));
    }
  });

  est.hits.assign(part.cells.size(), 0);
  std::uint64_t unhit = 0, pairs = 0, disagree = 0;
  for (std::uint32_t p = 0; p < opt.paths; ++p) {
    if (hit_cell[p] < 0) {
      ++unhit;
      continue;
    }
    ++est.hits[static_cast<std::size_t>(hit_cell[p])];
    if (track_stability && ext_cell[p] >= 0) {
      ++pairs;
      disagree += ext_cell[p] != hit_cell[p];
    }
  }
  est.unhit_mass = static_cast<double>(unhit) / opt.paths;
  est.horizon_warning = est.unhit_mass > 0.10;
  for (auto h : est.hits) {
    double w = static_cast<double>(h) / opt.paths;
    est.weights.push_back(w);
    est.std_error.push_back(std::sqrt(w * (1.0 - w) / opt.paths));
  }
  est.stability_checked = track_stability && pairs > 0;
  est.stability_pairs = static_cast<std::uint32_t>(pairs);
  est.stability_disagreement = pairs > 0 ? static_cast<double>(disagree) / pairs : 0.0;
  return est;
}

DirichletScanResult dirichlet_convergence_scan(const Kernel& k, const GraphOracle& g,
                                               const FloydFunction& f,
                                               const std::vector<VertexId>& ray,
                                               const std::vector<double>& r_list,
                                               const DirichletScanOptions& opt, const Limits& lim) {
  if (ray.empty()) throw_config("scan needs a non-empty ray");
  if (r_list.empty()) throw_config("scan needs at least one radius r");
  for (double r : r_list)
    if (!(r > 0.0)) throw_config("scan radii must be positive");
  for (std::size_t i = 0; i + 1 < ray.size(); ++i)
    if (g.level(ray[i]) >= g.level(ray[i + 1]))
      throw_config("ray vertices must have strictly increasing level");
  if (!f.n_f_summable()) throw_config("scan requires sum n f(n) < infinity");

  DirichletScanResult res;
  auto stats = step_stats(k, g, opt.stats);
  auto spec = default_event_spec(stats, opt.horizon);
  res.m_bar = spec.m_bar;
  res.m_lower = spec.m_lower;
  res.alpha = spec.alpha;
  res.eps = spec.eps;
  res.c = std::min(spec.m_lower - 1.5 * spec.eps, 1.0);
  res.r_list = r_list;

  std::uint32_t deepest = g.level(ray.back());
  res.R_exit = opt.R_exit != 0 ? opt.R_exit : deepest + 8;
  if (res.R_exit <= deepest) throw_config("exit radius must exceed the deepest ray vertex");
  if (static_cast<double>(opt.horizon) < spec.alpha * deepest)
    throw_config("horizon below alpha |v| for the deepest ray vertex");

  double cap = *std::min_element(r_list.begin(), r_list.end()) / 2.0;
  auto part = make_boundary_partition(g, f, res.R_exit, cap, lim);
  res.cells_converged = part.distances_converged;

  if (part.rule == PartitionRule::FloydCluster) {
    FloydMetricEngine eng(g, f, lim);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mi = 0; mi < part.member_vertex.size(); ++mi) {
      auto fd = eng.distance(part.member_vertex[mi], ray.back(), static_cast<int>(res.R_exit) + 8);
      if (fd.value < best) {
        best = fd.value;
        res.exit_cell = part.member_cell[mi];
      }
    }
  } else {
    res.exit_cell = part.cell_of(g, ray.back());
  }

  std::vector<std::vector<std::uint32_t>> region_cells(r_list.size());
  for (std::size_t ri = 0; ri < r_list.size(); ++ri)
    for (std::uint32_t c = 0; c < part.cells.size(); ++c)
      if (part.cell_distance(res.exit_cell, c) <= r_list[ri]) region_cells[ri].push_back(c);

  HarmonicMeasureOptions hm;
  hm.paths = opt.paths;
  hm.horizon = opt.horizon;
  hm.seed = opt.seed;
  hm.threads = opt.threads;
  hm.stability_extra = opt.stability_extra;

  for (std::size_t vi = 0; vi < ray.size(); ++vi) {
    auto est = harmonic_measure(k, g, ray[vi], part, hm);
    if (est.stability_checked)
      res.stability_disagreement = std::max(res.stability_disagreement, est.stability_disagreement);
    std::uint64_t exited = 0;
    for (auto h : est.hits) exited += h;
    for (std::size_t ri = 0; ri < r_list.size(); ++ri) {
      DirichletScanRow row;
      row.v = ray[vi];
      row.level = g.level(ray[vi]);
      row.r = r_list[ri];
      row.region_cells = static_cast<std::uint32_t>(region_cells[ri].size());
      std::uint64_t in_region = 0;
      for (auto c : region_cells[ri]) in_region += est.hits[c];
      row.region_weight = exited > 0 ? static_cast<double>(in_region) / exited : 0.0;
      row.std_error =
          exited > 0 ? std::sqrt(row.region_weight * (1.0 - row.region_weight) / exited) : 0.0;
      row.unhit_mass = est.unhit_mass;
      res.rows.push_back(row);
    }

    DirichletSkeletonRow sk;
    sk.v = ray[vi];
    sk.level = g.level(ray[vi]);
    sk.k = first_at_least(spec.alpha * sk.level);
    sk.applicable = sk.level > (spec.m_bar + spec.eps) / spec.eps;
    sk.trials = opt.skeleton_trials;
    if (res.c > 0.0) {
      auto tail_from = static_cast<std::uint32_t>(std::floor(res.c * sk.k));
      sk.tau_bound = f.tau(sk.level / 6) + (1.0 / res.c) * f.tau_tail_upper(tail_from);
    } else {
      sk.tau_bound = std::numeric_limits<double>::infinity();
    }

    std::vector<std::uint8_t> passes(opt.skeleton_trials, 0), sviol(opt.skeleton_trials, 0);
    std::vector<std::uint16_t> stepviol(opt.skeleton_trials, 0);
    parallel_for(opt.skeleton_trials, opt.threads, [&](std::size_t trial) {
      auto t = sample_trajectory(k, g, ray[vi], opt.horizon, opt.seed,
                                 (1ull << 40) + vi * opt.skeleton_trials + trial);
      auto ec = check_event_Av(t, spec);
      passes[trial] = ec.all;
      if (ec.all) {
        auto s = evaluate_skeleton(t, spec);
        sviol[trial] = !s.start_ok;
        stepviol[trial] = static_cast<std::uint16_t>(std::min<std::uint32_t>(s.step_violations, 65535));
      }
    });
    for (std::uint32_t t = 0; t < opt.skeleton_trials; ++t) {
      sk.av_passes += passes[t];
      sk.start_violations += sviol[t];
      sk.step_violations += stepviol[t];
    }
    if (sk.applicable)
      res.skeleton_violations_applicable += sk.start_violations + sk.step_violations;
    res.skeleton.push_back(sk);
  }

  res.monotone_within_tol = true;
  for (std::size_t ri = 0; ri < r_list.size(); ++ri)
    for (std::size_t vi = 0; vi + 1 < ray.size(); ++vi) {
      const auto& a = res.rows[vi * r_list.size() + ri];
      const auto& b = res.rows[(vi + 1) * r_list.size() + ri];
      if (b.region_weight < a.region_weight - 3.0 * (a.std_error + b.std_error))
        res.monotone_within_tol = false;
    }
  return res;
}

}  // namespace floydwalk
