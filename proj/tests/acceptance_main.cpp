// End-to-end acceptance gate. Each criterion prints exactly one PASS/FAIL
// line; the exit status is the number of failed criteria. argv[1] names the
// CLI binary (needed by the process-level criteria).
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "floydwalk/boundary.hpp"
#include "floydwalk/config.hpp"
#include "floydwalk/dirichlet.hpp"
#include "floydwalk/floyd_function.hpp"
#include "floydwalk/floyd_metric.hpp"
#include "floydwalk/graph.hpp"
#include "floydwalk/green.hpp"
#include "floydwalk/kernel.hpp"
#include "floydwalk/report.hpp"
#include "floydwalk/rng.hpp"
#include "floydwalk/spectral.hpp"

using namespace floydwalk;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_scratch;
int g_failures = 0;

constexpr double kTreeRho = 0.9428090415820635;       // 2 sqrt(2) / 3
constexpr double kPiSqOver6 = 1.6449340668482264;

struct Gate {
  bool ok = true;
  std::string why;
  std::string detail;

  void require(bool cond, const std::string& reason) {
    if (!cond && ok) {
      ok = false;
      why = reason;
    }
  }
};

void criterion(int id, double budget_seconds, const std::function<void(Gate&)>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Gate gate;
  try {
    body(gate);
  } catch (const std::exception& e) {
    gate.require(false, std::string("exception: ") + e.what());
  } catch (...) {
    gate.require(false, "unknown exception");
  }
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_seconds > 0.0 && elapsed >= budget_seconds)
    gate.require(false, "runtime budget of " + std::to_string(budget_seconds) + "s exceeded");
  std::printf("criterion %02d: %s — %s (%.2fs)\n", id, gate.ok ? "PASS" : "FAIL",
              gate.ok ? gate.detail.c_str() : gate.why.c_str(), elapsed);
  std::fflush(stdout);
  if (!gate.ok) ++g_failures;
}

VertexId radial_vertex(const GraphOracle& g, std::uint32_t depth) {
  return g.encode_word(std::vector<std::uint8_t>(depth, 0));
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

int run_cli(const std::string& args, const std::string& log_name) {
  std::string cmd = g_cli + " " + args + " > " + (g_scratch / log_name).string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- criteria -------------------------------------------------------------

void c01_floyd_axioms(Gate& gate) {
  for (double a : {0.3, 0.5, 0.9}) {
    auto f = FloydFunction::geometric(a);
    auto rep = f.check_axioms(10000);
    gate.require(rep.ok(), fmt("geometric(%g) axiom failure: %s", a, rep.detail.c_str()));
    gate.require(std::fabs(rep.worst_ratio - a) <= 1e-12, fmt("geometric(%g) worst ratio", a));
  }
  for (double s : {2.5, 3.0}) {
    auto f = FloydFunction::polynomial(s);
    auto rep = f.check_axioms(10000);
    gate.require(rep.ok(), fmt("polynomial(%g) axiom failure: %s", s, rep.detail.c_str()));
    gate.require(std::fabs(rep.worst_ratio - std::pow(2.0, -s)) <= 1e-12,
                 fmt("polynomial(%g) worst ratio", s));
  }
  auto fb = build_green_scaled_function(Kernel::simple_rw(), GraphOracle::regular_tree(2), 40);
  gate.require(fb.axioms.ok(), "green-scaled table axiom failure: " + fb.axioms.detail);
  gate.require(std::fabs(fb.min_observed_ratio - 1.0 / 11.0) <= 1e-8,
               "green-scaled table worst ratio is not 1/11");
  gate.require(fb.min_observed_ratio >= fb.lambda_star,
               "green-scaled table ratio below lambda*");
  gate.detail = fmt("5 analytic families to n=10^4 + green-scaled table; worst ratios exact, "
                    "table min ratio %.6f",
                    fb.min_observed_ratio);
}

void c02_green_oracles(Gate& gate) {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  double max_rel = 0.0;
  for (std::uint32_t d = 0; d <= 5; ++d) {
    auto v = radial_vertex(g, d);
    auto est = green_exact_truncated(k, g, 30, g.base(), v);
    double closed = 2.0 * std::pow(2.0, -static_cast<double>(d));
    max_rel = std::max(max_rel, std::fabs(est.value - closed) / closed);
  }
  gate.require(max_rel < 1e-6, fmt("truncated-vs-closed relative error %.3e", max_rel));

  auto mc = green_monte_carlo(k, g, g.base(), GreenTarget::vertex(radial_vertex(g, 2)), 100000,
                              1000, 1);
  double se = mc.std_error.value_or(0.0);
  gate.require(se > 0.0, "Monte Carlo standard error missing");
  gate.require(std::fabs(mc.value - 0.5) <= 3.0 * se,
               fmt("Monte Carlo %.5f vs 0.5 outside 3 sigma (se %.5f)", mc.value, se));
  gate.detail = fmt("depths 0..5 rel err %.2e; MC %.4f = 0.5 within 3 sigma", max_rel, mc.value);
}

void c03_green_scaled_bound(Gate& gate) {
  auto g = GraphOracle::regular_tree(2);
  auto fb = build_green_scaled_function(Kernel::simple_rw(), g, 50);
  gate.require(std::fabs(fb.lambda_star - 1.0 / 152.0) <= 1e-12, "lambda* is not 1/152");
  gate.require(fb.min_observed_ratio >= 1.0 / 152.0, "table ratio below 1/152");
  for (int n = 1; n < 50; ++n) {
    double ratio = fb.f.eval(n + 1) / fb.f.eval(n);
    gate.require(ratio >= 1.0 / 152.0, fmt("ratio at n=%d below 1/152", n));
  }
  double worst_rel = 0.0;
  for (int n = 1; n <= 50; ++n) {
    double nn = n;
    double closed = 1.0 / (nn * nn * nn * (3.0 * nn + 5.0));
    worst_rel = std::max(worst_rel, std::fabs(fb.f.eval(n) - closed) / closed);
  }
  gate.require(worst_rel <= 1e-9, fmt("closed-form mismatch, rel err %.3e", worst_rel));
  gate.detail = fmt("ratios >= 1/152 for n <= 50; f(n) matches 1/(n^3(3n+5)) to %.1e", worst_rel);
}

void c04_inequality1(Gate& gate) {
  struct Case {
    GraphOracle g;
    const char* name;
    std::uint64_t stream;
  };
  Case cases[] = {{GraphOracle::regular_tree(2), "tree q=2", 1},
                  {GraphOracle::lattice(3), "lattice d=3", 2}};
  int total = 0;
  for (auto& c : cases) {
    auto f = FloydFunction::geometric(0.5);
    FloydMetricEngine eng(c.g, f);
    auto ball = build_ball(c.g, c.g.base(), 15);
    RngStream rng(2026, c.stream);
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
      VertexId v = ball.vertices[rng.below(ball.size())];
      VertexId w = ball.vertices[rng.below(ball.size())];
      auto rep = eng.check_inequality1(v, w, 19);
      if (!rep.pass()) ++violations;
      ++total;
    }
    gate.require(violations == 0, fmt("%s: %d violation(s)", c.name, violations));
  }
  gate.detail = fmt("%d random pairs in B_15 on both families, 0 violations", total);
}

void c05_cauchy_experiment(Gate& gate) {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  auto fb = build_green_scaled_function(k, g, 40);
  CauchyExperimentOptions opt;
  opt.trials = 200;
  opt.steps = 2000;
  opt.seed = 0;
  opt.measured_tail_trajectories = 24;
  auto res = floyd_cauchy_experiment(k, g, fb, opt);
  gate.require(res.gromov_violations == 0,
               fmt("(a) %u Gromov violations", res.gromov_violations));
  gate.require(std::fabs(res.series_bound - kPiSqOver6) <= 1e-12, "(b) bound is not pi^2/6");
  gate.require(res.series_within_bound,
               fmt("(b) series mean %.4f above pi^2/6 + 3 se", res.series_mean));
  gate.require(res.verdict_fraction >= 0.95,
               fmt("(c) majorant tail fraction %.3f < 0.95", res.verdict_fraction));
  gate.require(res.measured_trajectories == 24, "(d) expected 24 measured trajectories");
  gate.require(res.domination_failures == 0,
               fmt("(d) %u domination failure(s)", res.domination_failures));
  gate.detail = fmt("200x2000: 0 Gromov violations; series mean %.4f <= pi^2/6; "
                    "tail fraction %.3f; 24 measured tails dominated",
                    res.series_mean, res.verdict_fraction);
}

void c06_spectral_radius(Gate& gate) {
  auto k = Kernel::simple_rw();
  auto tree = GraphOracle::regular_tree(2);
  auto est = spectral_radius_estimate(k, tree, {5, 8, 11, 15});
  gate.require(std::fabs(est.rho_hat - kTreeRho) <= 0.03,
               fmt("tree rho %.5f vs %.5f off by more than 0.03", est.rho_hat, kTreeRho));
  for (std::size_t i = 0; i + 1 < est.radius_sequence.size(); ++i)
    gate.require(est.radius_sequence[i].second < est.radius_sequence[i + 1].second,
                 "tree rho sequence not increasing in R");

  auto d2 = GraphOracle::lattice(2);
  auto est2 = spectral_radius_estimate(k, d2, {10, 20, 30, 40});
  gate.require(est2.rho_hat >= 0.99, fmt("lattice rho %.5f < 0.99", est2.rho_hat));
  gate.detail = fmt("tree rho %.4f (target %.4f), increasing ladder; lattice d=2 rho %.4f",
                    est.rho_hat, kTreeRho, est2.rho_hat);
}

void c07_nu_tau(Gate& gate) {
  std::vector<std::pair<std::string, FloydFunction>> fams;
  for (double a : {0.3, 0.5, 0.9}) fams.emplace_back(fmt("geometric(%g)", a), FloydFunction::geometric(a));
  for (double s : {2.5, 3.0}) fams.emplace_back(fmt("polynomial(%g)", s), FloydFunction::polynomial(s));
  for (auto& [name, f] : fams) {
    for (std::uint32_t n = 1; n <= 10000; ++n)
      gate.require(f.nu(n) <= f.tau(n), fmt("%s: nu > tau at n=%u", name.c_str(), n));
    if (!gate.ok) return;
  }
  auto fb = build_green_scaled_function(Kernel::simple_rw(), GraphOracle::regular_tree(2), 50);
  for (std::uint32_t n = 1; n <= 50; ++n)
    gate.require(fb.f.nu(n) <= fb.f.tau(n), fmt("green-scaled table: nu > tau at n=%u", n));

  auto fhalf = FloydFunction::geometric(0.5);
  double increment = fhalf.tau(200);
  gate.require(increment < 1e-8,
               fmt("tau partial-sum increment at N=200 is %.3e", increment));
  gate.detail = fmt("nu <= tau exactly for 6 families, 1 <= n <= 10^4 (table to 50); "
                    "tau increment at N=200 is %.1e",
                    increment);
}

void c08_event_scan(Gate& gate) {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  auto stats = step_stats(k, g, StatsConfig{200, 2000, 0, 0});
  auto spec = default_event_spec(stats, 1000);
  std::vector<VertexId> v_list = {radial_vertex(g, 2), radial_vertex(g, 4), radial_vertex(g, 8)};
  auto scan = event_probability_scan(k, g, spec, v_list, EventScanOptions{2000, 0, 0});
  gate.require(scan.rows.size() == 3, "expected three scan rows");
  gate.require(scan.monotone,
               fmt("pass rate not non-decreasing (min delta %.4f)", scan.min_consecutive_delta));
  gate.require(scan.rows[2].p_hat >= scan.rows[0].p_hat, "P(A_8) < P(A_2)");
  gate.require(scan.skeleton_violations_applicable == 0,
               fmt("%u skeleton violation(s) above the |v| threshold",
                   scan.skeleton_violations_applicable));
  gate.detail = fmt("P(A_v) = %.3f / %.3f / %.3f at |v|=2/4/8, non-decreasing, 0 skeleton "
                    "violations",
                    scan.rows[0].p_hat, scan.rows[1].p_hat, scan.rows[2].p_hat);
}

void c09_dirichlet(Gate& gate) {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  auto fb = build_green_scaled_function(k, g, 24);
  const auto& f = fb.f;

  auto part = make_boundary_partition(g, f, 8);
  gate.require(part.cells.size() == 3, "expected three subtree cells");
  HarmonicMeasureOptions hm{2000, 4000, 7, 0, 5};
  auto root = harmonic_measure(k, g, g.base(), part, hm);
  for (std::size_t i = 0; i < 3; ++i)
    gate.require(std::fabs(root.weights[i] - 1.0 / 3.0) <= 3.0 * root.std_error[i],
                 fmt("root weight %zu = %.4f off 1/3 beyond 3 sigma", i, root.weights[i]));

  auto deep = harmonic_measure(k, g, radial_vertex(g, 4), part, hm);
  gate.require(deep.weights[0] >= 15.0 / 16.0 - 3.0 * deep.std_error[0],
               fmt("depth-4 subtree weight %.4f below 15/16 - 3 se", deep.weights[0]));

  std::vector<VertexId> ray = {radial_vertex(g, 2), radial_vertex(g, 4), radial_vertex(g, 8),
                               radial_vertex(g, 16)};
  DirichletScanOptions opt{2000, 4000, 400, 0, 0, 0, 5, StatsConfig{200, 2000, 0, 0}};
  auto scan = dirichlet_convergence_scan(k, g, f, ray, {0.5 * f.eval(0)}, opt);
  gate.require(scan.monotone_within_tol, "region weight not non-decreasing along the ray");
  gate.require(scan.rows.back().region_weight >= 0.95,
               fmt("depth-16 region weight %.4f < 0.95", scan.rows.back().region_weight));
  gate.detail = fmt("root weights (%.3f, %.3f, %.3f); depth-4 own-subtree %.3f; ray weights "
                    "monotone, depth-16 %.4f",
                    root.weights[0], root.weights[1], root.weights[2], deep.weights[0],
                    scan.rows.back().region_weight);
}

void c10_negative_control(Gate& gate) {
  gate.require(!g_cli.empty(), "CLI path not passed as argv[1]");
  if (!gate.ok) return;
  ExperimentConfig c;
  c.graph.family = GraphFamily::Lattice;
  c.graph.dim = 2;
  c.params.radius = 8;
  c.params.rho_radii = {10, 20, 30, 40};
  c.out_dir = (g_scratch / "neg_out").string();
  auto cfg = (g_scratch / "neg.json").string();
  write_text_file(cfg, serialize_config(c));

  int rc_green = run_cli("green --config " + cfg, "neg_green.log");
  int rc_spectral = run_cli("spectral --config " + cfg, "neg_spectral.log");
  int rc_all = run_cli("verify-all --config " + cfg, "neg_all.log");
  gate.require(rc_green == 2, fmt("green exited %d, want 2", rc_green));
  gate.require(rc_spectral == 2, fmt("spectral exited %d, want 2", rc_spectral));
  gate.require(rc_all == 2, fmt("verify-all exited %d, want 2", rc_all));
  gate.require(rc_green != 3 && rc_spectral != 3 && rc_all != 3, "internal error exit observed");
  gate.detail = "green, spectral, verify-all on lattice d=2 all exit 2 (hypothesis fails)";
}

void c11_reproducibility(Gate& gate) {
  gate.require(!g_cli.empty(), "CLI path not passed as argv[1]");
  if (!gate.ok) return;
  ExperimentConfig c;
  c.seed = 7;
  c.out_dir = (g_scratch / "unused").string();
  auto cfg = (g_scratch / "repro.json").string();
  write_text_file(cfg, serialize_config(c));

  auto out_a = (g_scratch / "run_a").string();
  auto out_b = (g_scratch / "run_b").string();
  int rc_a = run_cli("verify-all --config " + cfg + " --out " + out_a, "repro_a.log");
  int rc_b = run_cli("verify-all --config " + cfg + " --out " + out_b, "repro_b.log");
  gate.require(rc_a == 0, fmt("first run exited %d", rc_a));
  gate.require(rc_b == 0, fmt("second run exited %d", rc_b));
  if (!gate.ok) return;

  std::vector<std::string> names;
  for (auto& e : fs::directory_iterator(out_a))
    if (e.path().extension() == ".csv") names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  names.push_back("lemma1_table.txt");

  int compared = 0;
  for (auto& n : names) {
    fs::path a = fs::path(out_a) / n, b = fs::path(out_b) / n;
    gate.require(fs::exists(a) && fs::exists(b), "artifact missing: " + n);
    if (!gate.ok) return;
    gate.require(slurp(a) == slurp(b), "artifact differs between runs: " + n);
    ++compared;
  }
  gate.require(compared >= 10, fmt("only %d artifacts compared", compared));
  gate.detail = fmt("%d artifacts byte-identical across two verify-all runs", compared);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc >= 2) g_cli = argv[1];
  g_scratch = fs::temp_directory_path() / ("floydwalk_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(g_scratch);

  criterion(1, 1.0, c01_floyd_axioms);
  criterion(2, 120.0, c02_green_oracles);
  criterion(3, 60.0, c03_green_scaled_bound);
  criterion(4, 120.0, c04_inequality1);
  criterion(5, 600.0, c05_cauchy_experiment);
  criterion(6, 180.0, c06_spectral_radius);
  criterion(7, 1.0, c07_nu_tau);
  criterion(8, 600.0, c08_event_scan);
  criterion(9, 600.0, c09_dirichlet);
  criterion(10, 180.0, c10_negative_control);
  criterion(11, 0.0, c11_reproducibility);

  std::error_code ec;
  fs::remove_all(g_scratch, ec);
  if (g_failures == 0)
    std::printf("all 11 criteria passed\n");
  else
    std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures;
}
