#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "floydwalk/graph.hpp"
#include "floydwalk/kernel.hpp"
#include "floydwalk/spectral.hpp"
#include "helpers.hpp"

using namespace floydwalk;

TEST_CASE("truncated leading eigenvalues increase toward the tree value") {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  auto est = spectral_radius_estimate(k, g, {5, 8, 11, 15});
  REQUIRE(est.radius_sequence.size() == 4);
  CHECK(est.used_squared_operator);  // bipartite: iterate P^2

  // frozen ladder of the exact banded level-chain iterations
  CHECK(est.radius_sequence[0].second == doctest::Approx(0.8761986055825906).epsilon(1e-9));
  CHECK(est.radius_sequence[1].second == doctest::Approx(0.9082203197810054).epsilon(1e-9));
  CHECK(est.radius_sequence[2].second == doctest::Approx(0.9213616777815252).epsilon(1e-9));
  CHECK(est.radius_sequence[3].second == doctest::Approx(0.9296807843625557).epsilon(1e-9));
  for (std::size_t i = 1; i < est.radius_sequence.size(); ++i)
    CHECK(est.radius_sequence[i - 1].second < est.radius_sequence[i].second);
  CHECK(est.rho_hat == est.radius_sequence.back().second);

  // rho = 2 sqrt(q) / (q+1) = 0.9428...
  std::vector<int> long_ladder;
  for (int r = 10; r <= 45; r += 5) long_ladder.push_back(r);
  auto deep = spectral_radius_estimate(k, g, long_ladder);
  CHECK(deep.converged);
  CHECK(std::abs(deep.rho_hat - 0.9428090415820635) <= 0.005);
  CHECK(deep.rho_hat <= 0.9428090415820635 + 1e-9);  // truncations stay below
  CHECK(deep.c_hat > 0.0);
  CHECK(deep.c_hat_grid_points > 0);
}

TEST_CASE("holding probability shifts the spectrum affinely") {
  auto g = GraphOracle::regular_tree(2);
  auto simple = spectral_radius_estimate(Kernel::simple_rw(), g, {12});
  auto lazy = spectral_radius_estimate(Kernel::lazy_rw(0.5), g, {12});
  CHECK_FALSE(lazy.used_squared_operator);  // the lazy walk is aperiodic
  CHECK(lazy.rho_hat == doctest::Approx(0.5 + 0.5 * simple.rho_hat).epsilon(1e-6));
}

TEST_CASE("decay-constant grids are stable under horizon doubling") {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  SpectralOptions o20;
  o20.c_hat_n_max = 20;
  SpectralOptions o40;
  o40.c_hat_n_max = 40;
  auto a = spectral_radius_estimate(k, g, {15}, o20);
  auto b = spectral_radius_estimate(k, g, {15}, o40);
  CHECK(a.c_hat > 0.0);
  CHECK(b.c_hat >= a.c_hat * 0.5);
  CHECK(b.c_hat <= a.c_hat * 2.0);
}

TEST_CASE("isoperimetric search separates expanders from flat families") {
  auto tree = GraphOracle::regular_tree(2);
  IsoOptions opt;
  opt.seed = 3;
  auto t = isoperimetric_constant(tree, IsoMode::Heuristic, opt);
  CHECK(t.verdict != Verdict::Fails);
  CHECK(t.eta_hat >= 0.2);
  CHECK(t.witness_ratio == t.eta_hat);
  CHECK_FALSE(t.witness_set.empty());

  auto grid = isoperimetric_constant(GraphOracle::lattice(2), IsoMode::Heuristic, opt);
  CHECK(grid.verdict == Verdict::Fails);
  REQUIRE_FALSE(grid.ball_ratios.empty());
  CHECK(grid.ball_ratios.back().second < 0.05);
  CHECK(grid.eta_hat < 0.05);
}

TEST_CASE("exhaustive small-set search on a cycle finds the halving witness") {
  std::vector<std::vector<std::uint32_t>> c6{{1, 5}, {0, 2}, {1, 3}, {2, 4}, {3, 5}, {4, 0}};
  auto g = GraphOracle::explicit_finite(c6, 0);
  IsoOptions opt;
  opt.exact_max_size = 3;
  auto rep = isoperimetric_constant(g, IsoMode::ExactSmall, opt);
  CHECK(rep.mode == IsoMode::ExactSmall);
  // a 3-path in C6 has 2 of its 3 vertices on the inner boundary
  CHECK(rep.eta_hat == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(rep.witness_set.size() == 3);
  CHECK(rep.sets_enumerated == 18);
  CHECK(rep.witness_ratio == rep.eta_hat);
}

TEST_CASE("hypothesis bundle passes on the tree and fails on the plane") {
  auto k = Kernel::simple_rw();

  auto tree = spectral_hypothesis_check(k, GraphOracle::regular_tree(2));
  CHECK(tree.all_pass);
  CHECK(tree.reversibility_declared);
  CHECK(tree.strong_reversibility_ok);
  CHECK(tree.reversibility_residual <= 1e-12);
  CHECK(tree.uniform_irreducibility_ok);
  CHECK(tree.eps0 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(tree.K == 1);
  CHECK(tree.isoperimetric != Verdict::Fails);
  CHECK(tree.rho_below_one);
  CHECK(tree.rho_converged);
  CHECK(tree.rho_hat < 0.95);
  CHECK(tree.c_hat > 0.0);
  CHECK(tree.notes.empty());

  HypothesisOptions ho;
  ho.rho_radii = {10, 20, 30, 40};
  auto plane = spectral_hypothesis_check(k, GraphOracle::lattice(2), ho);
  CHECK_FALSE(plane.all_pass);
  CHECK(plane.rho_hat >= 0.99);
  CHECK(plane.isoperimetric == Verdict::Fails);
  CHECK_FALSE(plane.notes.empty());
  // the certificate side still holds; only the gap-side hypotheses fail
  CHECK(plane.uniform_irreducibility_ok);
  CHECK(plane.strong_reversibility_ok);
}

TEST_CASE("radius lists are validated") {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  CHECK(testutil::thrown_kind([&] { spectral_radius_estimate(k, g, {}); }) == ErrKind::Config);
  CHECK(testutil::thrown_kind([&] { spectral_radius_estimate(k, g, {8, 5}); }) ==
        ErrKind::Config);
}
