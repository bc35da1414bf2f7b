#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "floydwalk/graph.hpp"
#include "floydwalk/kernel.hpp"
#include "floydwalk/rng.hpp"
#include "helpers.hpp"

using namespace floydwalk;

namespace {

double row_sum(const Kernel& k, const GraphOracle& g, VertexId v) {
  double s = 0.0;
  for (auto& [w, p] : k.row(g, v)) {
    CHECK(p > 0.0);
    (void)w;
    s += p;
  }
  return s;
}

std::vector<GraphOracle> ambient_graphs() {
  return {GraphOracle::regular_tree(2), GraphOracle::lattice(2), GraphOracle::half_line(),
          GraphOracle::free_product_z3_z3()};
}

}  // namespace

TEST_CASE("transition rows are stochastic") {
  std::vector<Kernel> kernels{Kernel::simple_rw(), Kernel::lazy_rw(0.3),
                              Kernel::bounded_range_mixture({0.5, 0.25, 0.25})};
  for (const auto& g : ambient_graphs()) {
    auto ball = build_ball(g, g.base(), 3);
    for (const auto& k : kernels)
      for (auto v : ball.vertices) CHECK(row_sum(k, g, v) == doctest::Approx(1.0).epsilon(1e-13));
  }
  auto tree = GraphOracle::regular_tree(2);
  auto drift = Kernel::tree_drift(0.7);
  auto ball = build_ball(tree, tree.base(), 3);
  for (auto v : ball.vertices) CHECK(row_sum(drift, tree, v) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("certificates pin down range and irreducibility constants") {
  auto tree = GraphOracle::regular_tree(2);
  auto grid = GraphOracle::lattice(2);

  auto cs = Kernel::simple_rw().certificates(tree);
  CHECK(cs.range == 1);
  CHECK(cs.K == 1);
  CHECK(cs.eps0 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(cs.has_reversing_measure);

  CHECK(Kernel::simple_rw().certificates(grid).eps0 == doctest::Approx(0.25).epsilon(1e-12));

  auto cl = Kernel::lazy_rw(0.25).certificates(tree);
  CHECK(cl.eps0 == doctest::Approx(0.25).epsilon(1e-12));  // (1 - hold) / deg
  CHECK(cl.range == 1);

  auto mix = Kernel::bounded_range_mixture({0.6, 0.4});
  auto cm = mix.certificates(tree);
  CHECK(cm.range == 2);
  CHECK(cm.eps0 == doctest::Approx(0.2).epsilon(1e-12));  // w[0] / deg

  auto cd = Kernel::tree_drift(0.7).certificates(tree);
  CHECK(cd.range == 1);
  CHECK(cd.eps0 == doctest::Approx(0.3).epsilon(1e-12));  // min(1-p, p/q, 1/(q+1))
  CHECK_FALSE(cd.has_reversing_measure);

  // drift rules only make sense on regular trees
  CHECK(testutil::thrown_kind([&] { Kernel::tree_drift(0.7).certificates(grid); }) ==
        ErrKind::Config);
}

TEST_CASE("certificate verification passes on sampled pairs") {
  auto tree = GraphOracle::regular_tree(2);
  for (const auto& k : {Kernel::simple_rw(), Kernel::lazy_rw(0.3),
                        Kernel::bounded_range_mixture({0.5, 0.25, 0.25}),
                        Kernel::tree_drift(0.7)}) {
    auto chk = verify_certificates(k, tree, 64, 11);
    CHECK(chk.ok());
    CHECK(chk.row_sum_max_err <= 1e-12);
    CHECK(chk.irreducibility_min > 0.0);
  }
  auto grid = GraphOracle::lattice(3);
  CHECK(verify_certificates(Kernel::simple_rw(), grid, 64, 11).ok());
}

TEST_CASE("bipartite families kill odd return probabilities") {
  auto tree = GraphOracle::regular_tree(2);
  auto grid = GraphOracle::lattice(2);
  auto k = Kernel::simple_rw();
  CHECK(k.kstep_prob(tree, tree.base(), tree.base(), 1) == 0.0);
  CHECK(k.kstep_prob(tree, tree.base(), tree.base(), 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(k.kstep_prob(tree, tree.base(), tree.base(), 3) == 0.0);
  CHECK(k.kstep_prob(grid, grid.base(), grid.base(), 2) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(tree.bipartite());
  CHECK(grid.bipartite());
  CHECK_FALSE(GraphOracle::free_product_z3_z3().bipartite());
}

TEST_CASE("matrix powers over a ball agree with direct expansion") {
  auto tree = GraphOracle::regular_tree(2);
  auto k = Kernel::lazy_rw(0.4);
  auto ball = build_ball(tree, tree.base(), 6);
  auto mats = n_step_matrix(k, tree, ball, 4);
  CHECK(mats.dim == ball.size());
  CHECK_FALSE(mats.radius_warning);
  for (int kappa = 0; kappa <= 4; ++kappa) {
    for (std::uint32_t j : {0u, 1u, 5u}) {
      double expect = k.kstep_prob(tree, ball.vertices[0], ball.vertices[j], kappa);
      CHECK(mats.at(kappa, 0, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  // a short ball with a long horizon is only a lower bound, and says so
  auto tight = build_ball(tree, tree.base(), 2);
  CHECK(n_step_matrix(k, tree, tight, 5).radius_warning);
}

TEST_CASE("reversing measure balances reversible kernels") {
  auto grids = ambient_graphs();
  for (const auto& g : grids) {
    for (const auto& k : {Kernel::simple_rw(), Kernel::lazy_rw(0.3)}) {
      REQUIRE(k.has_reversing(g));
      auto ball = build_ball(g, g.base(), 3);
      for (auto v : ball.vertices) {
        for (auto& [w, pvw] : k.row(g, v)) {
          double lhs = k.reversing_measure(g, v) * pvw;
          double rhs = k.reversing_measure(g, w) * k.prob(g, w, v);
          CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
        }
      }
    }
  }
  auto tree = GraphOracle::regular_tree(2);
  CHECK_FALSE(Kernel::tree_drift(0.7).has_reversing(tree));
}

TEST_CASE("walkers track the graph oracle exactly") {
  auto tree = GraphOracle::regular_tree(2);
  auto k = Kernel::bounded_range_mixture({0.5, 0.3, 0.2});
  Walker w(k, tree, tree.base());
  RngStream rng(42, 0);
  for (int i = 0; i < 200; ++i) {
    w.step(rng);
    auto word = w.word();
    CHECK(w.level() == word.size());
    if (auto v = w.vertex()) {
      CHECK(tree.level(*v) == w.level());
      CHECK(tree.word_of(*v) == word);
      CHECK(tree.distance(tree.base(), *v) == w.level());
    }
    CHECK(w.last_step_length() <= 3);
  }
}

TEST_CASE("trajectories are reproducible and carry a replayable move log") {
  auto tree = GraphOracle::regular_tree(2);
  auto k = Kernel::bounded_range_mixture({0.5, 0.3, 0.2});
  auto t1 = sample_trajectory(k, tree, tree.base(), 300, 9, 4);
  auto t2 = sample_trajectory(k, tree, tree.base(), 300, 9, 4);
  auto t3 = sample_trajectory(k, tree, tree.base(), 300, 9, 5);

  CHECK(t1.steps() == 300);
  REQUIRE(t1.levels.size() == 301);
  REQUIRE(t1.step_lengths.size() == 300);
  REQUIRE(t1.dist_from_start.size() == 301);
  CHECK(t1.kernel_range == 3);
  REQUIRE(t1.move_offsets.size() == 301);
  CHECK(t1.move_offsets.back() == t1.moves.size());

  CHECK(t1.levels == t2.levels);
  CHECK(t1.moves == t2.moves);
  CHECK(t1.levels != t3.levels);

  CHECK(t1.levels[0] == 0);
  CHECK(t1.dist_from_start[0] == 0);
  for (std::uint32_t n = 0; n < t1.steps(); ++n) {
    auto diff = static_cast<std::int64_t>(t1.levels[n + 1]) - static_cast<std::int64_t>(t1.levels[n]);
    CHECK(std::abs(diff) <= t1.step_lengths[n]);
    CHECK(t1.step_lengths[n] <= 3);
  }

  ReplayCursor cur(t1);
  for (std::uint32_t n = 0; n < t1.steps(); ++n) {
    CHECK(cur.level() == t1.levels[n]);
    cur.advance();
  }
  CHECK(cur.level() == t1.levels.back());

  // range-1 rules omit the offset table; the move log is one entry per step
  auto s1 = sample_trajectory(Kernel::simple_rw(), tree, tree.base(), 50, 1);
  CHECK(s1.kernel_range == 1);
  CHECK(s1.move_offsets.empty());
  CHECK(s1.moves.size() == 50);
}

TEST_CASE("step statistics recover exact rates on the tree") {
  auto tree = GraphOracle::regular_tree(2);
  StatsConfig cfg;
  cfg.trials = 200;
  cfg.horizon = 1000;
  cfg.seed = 0;
  auto st = step_stats(Kernel::simple_rw(), tree, cfg);
  CHECK(st.m_bar == 1.0);  // every step moves exactly one edge
  REQUIRE(st.phi.size() >= 3);
  CHECK(st.phi[0] == 1.0);
  CHECK(st.phi[1] == 1.0);
  CHECK(st.phi[2] == 0.0);
  CHECK(st.trials == 200);
  CHECK(st.horizon == 1000);
  // drift of the level chain is (q-1)/(q+1) = 1/3
  CHECK(std::abs(st.speed_mean - 1.0 / 3.0) < 0.02);
  CHECK(st.speed_lower < 1.0 / 3.0);
  CHECK(st.speed_upper > 1.0 / 3.0);
  CHECK(st.speed_lower > 0.0);
  CHECK(st.speed_ci_half > 0.0);

  auto drift = step_stats(Kernel::tree_drift(0.7), tree, cfg);
  CHECK(drift.speed_mean > st.speed_mean + 0.02);  // outward bias beats the simple walk
}

TEST_CASE("radial rules expose the level chain") {
  auto tree = GraphOracle::regular_tree(2);
  auto half = GraphOracle::half_line();
  auto grid = GraphOracle::lattice(2);
  CHECK(Kernel::simple_rw().radial(tree));
  CHECK(Kernel::tree_drift(0.7).radial(tree));
  CHECK(Kernel::simple_rw().radial(half));
  CHECK_FALSE(Kernel::tree_drift(0.7).radial(half));
  CHECK_FALSE(Kernel::simple_rw().radial(grid));

  auto m = Kernel::simple_rw().radial_matrix(tree, 5);
  CHECK(m.R == 5);
  CHECK(m.band == 1);
  CHECK(m.at(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.at(2, 3) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.at(2, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(m.at(2, 2) == 0.0);
  // row R leaks upward mass to the absorbing outside
  double row_r = m.at(5, 4) + m.at(5, 5);
  CHECK(row_r == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("kernel construction validates parameters") {
  CHECK(testutil::thrown_kind([] { Kernel::lazy_rw(1.0); }) == ErrKind::Config);
  CHECK(testutil::thrown_kind([] { Kernel::lazy_rw(-0.1); }) == ErrKind::Config);
  CHECK(testutil::thrown_kind([] { Kernel::tree_drift(0.0); }) == ErrKind::Config);
  CHECK(testutil::thrown_kind([] { Kernel::bounded_range_mixture({}); }) == ErrKind::Config);
  CHECK(testutil::thrown_kind([] { Kernel::bounded_range_mixture({0.5, 0.4}); }) ==
        ErrKind::Config);  // weights must sum to 1
  CHECK(testutil::thrown_kind([] { Kernel::bounded_range_mixture({0.0, 1.0}); }) ==
        ErrKind::Config);  // first weight must be positive for irreducibility
}
