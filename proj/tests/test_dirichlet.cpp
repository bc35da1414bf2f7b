#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "floydwalk/boundary.hpp"
#include "floydwalk/dirichlet.hpp"
#include "floydwalk/floyd_metric.hpp"
#include "floydwalk/graph.hpp"
#include "floydwalk/kernel.hpp"
#include "helpers.hpp"

using namespace floydwalk;

namespace {

StepStats stub_stats(double m_bar, double m_lower) {
  StepStats st;
  st.m_bar = m_bar;
  st.speed_lower = m_lower;
  st.speed_mean = (m_bar + m_lower) / 2.0;
  st.speed_upper = m_bar;
  return st;
}

std::vector<VertexId> tree_ray(const GraphOracle& g, const std::vector<std::uint32_t>& levels) {
  std::vector<VertexId> out;
  for (auto l : levels) {
    std::vector<std::uint8_t> w(l, 0);
    out.push_back(g.encode_word(w));
  }
  return out;
}

}  // namespace

TEST_CASE("wilson intervals match frozen reference values") {
  CHECK(wilson_lower(50, 100) == doctest::Approx(0.40382982859014716).epsilon(1e-12));
  CHECK(wilson_upper(50, 100) == doctest::Approx(0.5961701714098528).epsilon(1e-12));
  CHECK(wilson_lower(0, 100) == 0.0);
  CHECK(wilson_upper(0, 100) == doctest::Approx(0.03699480747600191).epsilon(1e-12));
  CHECK(wilson_lower(100, 100) == doctest::Approx(0.9630051925239981).epsilon(1e-12));
  CHECK(wilson_upper(100, 100) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::uint64_t s : {0ull, 10ull, 55ull, 100ull}) {
    double lo = wilson_lower(s, 100), hi = wilson_upper(s, 100);
    double p = s / 100.0;
    CHECK(lo <= p + 1e-12);
    CHECK(hi >= p - 1e-12);
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
  }
}

TEST_CASE("event parameters derive from the calibration constants") {
  auto spec = default_event_spec(stub_stats(1.0, 0.32), 800);
  CHECK(spec.alpha == doctest::Approx(0.5).epsilon(1e-12));  // 1/(2 m_bar)
  CHECK(spec.eps == doctest::Approx(0.08).epsilon(1e-12));   // m_lower / 4
  CHECK(spec.horizon == 800);
  CHECK(spec.m_bar == 1.0);
  CHECK(spec.m_lower == 0.32);

  // a walk without linear escape is an evidence failure, not a usage error
  CHECK(testutil::thrown_kind([] { default_event_spec(stub_stats(1.0, 0.0), 100); }) ==
        ErrKind::Hypothesis);
  CHECK(testutil::thrown_kind([] { default_event_spec(stub_stats(0.0, 0.3), 100); }) ==
        ErrKind::Config);
}

TEST_CASE("event conditions decompose on crafted trajectories") {
  auto g = GraphOracle::regular_tree(2);
  EventSpec spec;
  spec.alpha = 0.5;
  spec.eps = 0.4;  // large enough that unit steps stay under eps*n on the window
  spec.m_bar = 1.0;
  spec.m_lower = 1.0;
  spec.horizon = 8;

  // start at level 4, move straight out: every condition holds
  Trajectory ascend(g);
  ascend.kernel_range = 1;
  for (std::uint32_t n = 0; n <= 8; ++n) {
    ascend.levels.push_back(4 + n);
    ascend.dist_from_start.push_back(n);
    if (n < 8) ascend.step_lengths.push_back(1);
  }
  auto ok = check_event_Av(ascend, spec);
  CHECK(ok.cond2);
  CHECK(ok.cond3);
  CHECK(ok.cond4);
  CHECK(ok.cond5);
  CHECK(ok.all);

  // same shape with one huge late displacement: only condition 2 breaks
  Trajectory burst(g);
  burst.kernel_range = 12;
  burst.levels = ascend.levels;
  burst.step_lengths = ascend.step_lengths;
  burst.dist_from_start = ascend.dist_from_start;
  burst.dist_from_start.back() = 40;  // d(Z_0, Z_8) blows past (m_bar+eps) * 8
  auto b = check_event_Av(burst, spec);
  CHECK_FALSE(b.cond2);
  CHECK(b.cond3);
  CHECK(b.cond4);
  CHECK(b.cond5);
  CHECK_FALSE(b.all);

  // a big single step past alpha|v| breaks condition 3
  Trajectory jump(g);
  jump.kernel_range = 12;
  jump.levels = ascend.levels;
  jump.dist_from_start = ascend.dist_from_start;
  jump.step_lengths = ascend.step_lengths;
  jump.step_lengths[6] = 9;  // eps * 6 = 2.4 < 9
  auto j = check_event_Av(jump, spec);
  CHECK_FALSE(j.cond3);
  CHECK(j.cond2);
  CHECK_FALSE(j.all);

  // dipping to the base violates the floor |Z_n| > eps |v|
  Trajectory dip(g);
  dip.kernel_range = 1;
  dip.levels = {4, 3, 2, 1, 0, 1, 2, 3, 4};
  dip.dist_from_start = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  dip.step_lengths.assign(8, 1);
  auto d = check_event_Av(dip, spec);
  CHECK_FALSE(d.cond5);
  CHECK_FALSE(d.all);
}

TEST_CASE("base-point trajectories skip the time-zero floor") {
  auto g = GraphOracle::regular_tree(2);
  EventSpec spec;
  spec.alpha = 0.5;
  spec.eps = 0.25;
  spec.m_bar = 1.0;
  spec.m_lower = 1.0;
  spec.horizon = 4;

  // |v| = 0: the floor eps|v| = 0 must be beaten strictly from n >= 1 on,
  // so starting at the base is fine but returning to it is not
  Trajectory out(g);
  out.kernel_range = 1;
  out.levels = {0, 1, 2, 3, 4};
  out.dist_from_start = {0, 1, 2, 3, 4};
  out.step_lengths.assign(4, 1);
  CHECK(check_event_Av(out, spec).cond5);

  Trajectory back(g);
  back.kernel_range = 1;
  back.levels = {0, 1, 0, 1, 2};
  back.dist_from_start = {0, 1, 0, 1, 2};
  back.step_lengths.assign(4, 1);
  CHECK_FALSE(check_event_Av(back, spec).cond5);
}

TEST_CASE("probability scan rises with the start level") {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  StatsConfig sc;
  sc.trials = 100;
  sc.horizon = 500;
  sc.seed = 2;
  auto spec = default_event_spec(step_stats(k, g, sc), 400);

  auto v_list = tree_ray(g, {2, 4});
  EventScanOptions opt;
  opt.trials = 300;
  opt.seed = 2;
  auto res = event_probability_scan(k, g, spec, v_list, opt);

  REQUIRE(res.rows.size() == 2);
  CHECK(res.alpha == spec.alpha);
  CHECK(res.horizon == 400);
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& row = res.rows[i];
    CHECK(row.trials == 300);
    CHECK(row.level == (i == 0 ? 2 : 4));
    CHECK(row.passes <= row.trials);
    CHECK(row.p_hat == doctest::Approx(static_cast<double>(row.passes) / 300.0).epsilon(1e-12));
    CHECK(row.wilson_lo <= row.p_hat + 1e-12);
    CHECK(row.wilson_hi >= row.p_hat - 1e-12);
    for (double rate : row.cond_pass_rate) {
      CHECK(rate >= 0.0);
      CHECK(rate <= 1.0);
    }
    // levels 2 and 4 sit below the applicability threshold (m_bar+eps)/eps ~ 15
    CHECK_FALSE(row.skeleton_applicable);
  }
  CHECK(res.monotone == (res.min_consecutive_delta >= 0.0));
  CHECK(res.skeleton_violations_applicable == 0);

  CHECK(testutil::thrown_kind([&] {
          return event_probability_scan(k, g, spec, {}, opt);
        }) == ErrKind::Config);
  auto decreasing = tree_ray(g, {4, 2});
  CHECK(testutil::thrown_kind([&] {
          return event_probability_scan(k, g, spec, decreasing, opt);
        }) == ErrKind::Config);
  EventScanOptions zero;
  zero.trials = 0;
  CHECK(testutil::thrown_kind([&] {
          return event_probability_scan(k, g, spec, v_list, zero);
        }) == ErrKind::Config);
}

TEST_CASE("loosening epsilon can only help the displacement conditions") {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  EventSpec tight;
  tight.alpha = 0.5;
  tight.eps = 0.06;
  tight.m_bar = 1.0;
  tight.m_lower = 0.3;
  tight.horizon = 300;
  EventSpec loose = tight;
  loose.eps = 0.12;

  auto v_list = tree_ray(g, {3});
  EventScanOptions opt;
  opt.trials = 250;
  opt.seed = 9;
  auto a = event_probability_scan(k, g, tight, v_list, opt);
  auto b = event_probability_scan(k, g, loose, v_list, opt);
  // identical seeds couple the trajectories; conditions 2 and 3 are
  // monotone in eps pointwise, so the rates are ordered exactly
  CHECK(b.rows[0].cond_pass_rate[0] >= a.rows[0].cond_pass_rate[0]);
  CHECK(b.rows[0].cond_pass_rate[1] >= a.rows[0].cond_pass_rate[1]);
}

TEST_CASE("tree partitions split the exit sphere by the first letter") {
  auto g = GraphOracle::regular_tree(2);
  auto f = FloydFunction::geometric(0.5);
  auto part = make_boundary_partition(g, f, 6);
  CHECK(part.rule == PartitionRule::TreeSubtree);
  CHECK(part.R_exit == 6);
  REQUIRE(part.cells.size() == 3);
  auto F = floyd_prefix_sums(f, 7);
  for (std::uint32_t c = 0; c < 3; ++c) {
    const auto& cell = part.cells[c];
    CHECK(cell.id == c);
    CHECK(cell.label == "subtree:" + std::to_string(c));
    CHECK(cell.size == 32);  // 96 sphere vertices over 3 cells
    CHECK(g.level(cell.representative) == 6);
    CHECK(g.word_of(cell.representative)[0] == c);
    // deepest split inside one subtree: meet at level 1
    CHECK(cell.df_diameter == doctest::Approx(2.0 * (F[6] - F[1])).epsilon(1e-12));
    CHECK(cell.diameter_exact);
  }
  CHECK(part.distances_exact);
  CHECK(part.distances_converged);
  CHECK(part.cell_distance(0, 0) == 0.0);
  CHECK(part.cell_distance(0, 1) == doctest::Approx(2.0 * F[6]).epsilon(1e-12));
  CHECK(part.cell_distance(0, 1) == part.cell_distance(1, 0));

  CHECK(part.cell_of(g, g.encode_word({2, 0, 1})) == 2);
  CHECK(part.cell_of(g, g.encode_word({1})) == 1);
  CHECK(testutil::thrown_kind([&] { part.cell_of(g, g.base()); }) == ErrKind::Range);
}

TEST_CASE("half line and lattice partitions use their own rules") {
  auto f = FloydFunction::geometric(0.5);

  auto hl = GraphOracle::half_line();
  auto ph = make_boundary_partition(hl, f, 6);
  CHECK(ph.rule == PartitionRule::SingleCell);
  REQUIRE(ph.cells.size() == 1);
  CHECK(ph.cells[0].size == 1);
  CHECK(ph.cells[0].df_diameter == 0.0);

  auto d2 = GraphOracle::lattice(2);
  auto pl = make_boundary_partition(d2, f, 5);
  CHECK(pl.rule == PartitionRule::LatticeSector);
  REQUIRE(pl.cells.size() == 4);
  CHECK(pl.cells[0].label == "+x1");
  CHECK(pl.cells[1].label == "-x1");
  CHECK(pl.cells[2].label == "+x2");
  CHECK(pl.cells[3].label == "-x2");
  for (auto& c : pl.cells) CHECK(c.size == 0);  // sector members are not materialized

  auto at = [&](int x, int y) {
    VertexId v = d2.base();
    for (int i = 0; i < std::abs(x); ++i) v = d2.neighbors(v)[x > 0 ? 0 : 1];
    for (int i = 0; i < std::abs(y); ++i) v = d2.neighbors(v)[y > 0 ? 2 : 3];
    return v;
  };
  CHECK(pl.cell_of(d2, at(3, 1)) == 0);    // +x1 dominates
  CHECK(pl.cell_of(d2, at(2, -2)) == 0);   // tie goes to the lowest axis
  CHECK(pl.cell_of(d2, at(-1, -4)) == 3);  // -x2 dominates
}

TEST_CASE("explicit graphs cluster the exit sphere under a diameter cap") {
  // C12 cycle: base 0, exit sphere S_3 = {3, 9}
  std::vector<std::vector<std::uint32_t>> c12;
  for (std::uint32_t i = 0; i < 12; ++i)
    c12.push_back({(i + 11) % 12, (i + 1) % 12});
  auto g = GraphOracle::explicit_finite(c12, 0);
  auto f = FloydFunction::geometric(0.5);

  auto tight = make_boundary_partition(g, f, 3, 1e-6);
  CHECK(tight.rule == PartitionRule::FloydCluster);
  CHECK(tight.cells.size() == 2);  // cap below any pair distance: singletons
  CHECK(tight.member_vertex.size() == 2);

  auto loose = make_boundary_partition(g, f, 3, 100.0);
  CHECK(loose.cells.size() == 1);  // cap swallows the whole sphere
  CHECK(loose.cells[0].size == 2);
  CHECK(loose.cells[0].df_diameter <= 100.0);
  CHECK(loose.cell_of(g, loose.member_vertex[0]) == loose.member_cell[0]);
}

TEST_CASE("harmonic measure from the base splits evenly over subtrees") {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  auto f = FloydFunction::geometric(0.5);
  auto part = make_boundary_partition(g, f, 8);

  HarmonicMeasureOptions opt;
  opt.paths = 500;
  opt.horizon = 4000;
  opt.seed = 4;
  auto est = harmonic_measure(k, g, g.base(), part, opt);
  CHECK(est.paths == 500);
  REQUIRE(est.weights.size() == 3);
  REQUIRE(est.hits.size() == 3);
  REQUIRE(est.std_error.size() == 3);

  double total = est.unhit_mass;
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    total += est.weights[i];
    hits += est.hits[i];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hits <= 500);
  CHECK_FALSE(est.horizon_warning);

  // symmetry: the three subtree weights agree within joint noise
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j)
      CHECK(std::abs(est.weights[i] - est.weights[j]) <=
            3.0 * (est.std_error[i] + est.std_error[j]) + 0.02);

  CHECK(est.stability_checked);
  // a flip needs a return to the root after S_8, so disagreement stays tiny
  CHECK(est.stability_disagreement <= 0.02);

  // a depth-2 start loads its own subtree
  auto deep = harmonic_measure(k, g, g.encode_word({0, 0}), part, opt);
  CHECK(deep.weights[0] >= 0.78);

  // starting on the exit sphere is an immediate hit
  auto on_sphere = harmonic_measure(k, g, g.encode_word({1, 0, 0, 0, 0, 0, 0, 0}), part, opt);
  CHECK(on_sphere.weights[1] == 1.0);
  CHECK(on_sphere.std_error[1] == 0.0);
  CHECK(on_sphere.unhit_mass == 0.0);
}

TEST_CASE("convergence scan concentrates mass along the ray") {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  auto fb = build_green_scaled_function(k, g, 24);

  auto ray = tree_ray(g, {2, 4, 8});
  DirichletScanOptions opt;
  opt.paths = 800;
  opt.horizon = 3000;
  opt.skeleton_trials = 50;
  opt.seed = 0;
  opt.stats.trials = 100;
  opt.stats.horizon = 500;
  opt.stats.seed = 0;
  auto res = dirichlet_convergence_scan(k, g, fb.f, ray, {0.5 * fb.f.eval(0)}, opt);

  CHECK(res.R_exit == 16);  // deepest ray level + 8
  REQUIRE(res.r_list.size() == 1);
  REQUIRE(res.rows.size() == 3);
  CHECK(res.m_bar > 0.0);
  CHECK(res.m_lower > 0.0);
  CHECK(res.alpha == doctest::Approx(1.0 / (2.0 * res.m_bar)).epsilon(1e-12));
  CHECK(res.eps == doctest::Approx(res.m_lower / 4.0).epsilon(1e-12));
  CHECK(res.c > 0.0);
  CHECK(res.c <= 1.0);

  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& row = res.rows[i];
    CHECK(row.r == res.r_list[0]);
    CHECK(row.region_cells >= 1);
    CHECK(row.region_weight >= 0.0);
    CHECK(row.region_weight <= 1.0);
    CHECK(row.std_error >= 0.0);
  }
  CHECK(res.rows[0].level == 2);
  CHECK(res.rows[2].level == 8);
  CHECK(res.monotone_within_tol);
  CHECK(res.rows[0].region_weight > 0.55);  // already biased toward the home subtree
  CHECK(res.rows[2].region_weight > res.rows[0].region_weight - 0.05);

  REQUIRE(res.skeleton.size() == 3);
  for (const auto& sk : res.skeleton) {
    CHECK(sk.trials == 50);
    CHECK_FALSE(sk.applicable);  // levels up to 8 sit below the threshold
    CHECK(sk.tau_bound > 0.0);
  }
  CHECK(res.skeleton_violations_applicable == 0);
  CHECK(res.cells_converged);

  // a huge radius swallows every cell: the weight is exactly the exit mass
  auto all = dirichlet_convergence_scan(k, g, fb.f, tree_ray(g, {2}), {100.0}, opt);
  REQUIRE(all.rows.size() == 1);
  CHECK(all.rows[0].region_cells == 3);
  CHECK(all.rows[0].region_weight == 1.0);
}

TEST_CASE("scan inputs are validated") {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  auto f = FloydFunction::geometric(0.5);
  DirichletScanOptions opt;
  opt.paths = 50;
  opt.horizon = 500;
  opt.skeleton_trials = 10;
  opt.stats.trials = 20;
  opt.stats.horizon = 100;

  CHECK(testutil::thrown_kind([&] {
          return dirichlet_convergence_scan(k, g, f, {}, {0.5}, opt);
        }) == ErrKind::Config);

  auto bad_order = tree_ray(g, {4, 2});
  CHECK(testutil::thrown_kind([&] {
          return dirichlet_convergence_scan(k, g, f, bad_order, {0.5}, opt);
        }) == ErrKind::Config);

  auto ray = tree_ray(g, {2, 4});
  CHECK(testutil::thrown_kind([&] {
          return dirichlet_convergence_scan(k, g, f, ray, {-1.0}, opt);
        }) == ErrKind::Config);

  // n f(n) summability is required for the tau tail bound
  auto thin = FloydFunction::polynomial(1.5);
  CHECK(testutil::thrown_kind([&] {
          return dirichlet_convergence_scan(k, g, thin, ray, {0.5}, opt);
        }) == ErrKind::Config);
}
