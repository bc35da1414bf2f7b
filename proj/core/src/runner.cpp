#include "floydwalk/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "floydwalk/boundary.hpp"
#include "floydwalk/dirichlet.hpp"
#include "floydwalk/error.hpp"
#include "floydwalk/floyd_function.hpp"
#include "floydwalk/floyd_metric.hpp"
#include "floydwalk/graph.hpp"
#include "floydwalk/green.hpp"
#include "floydwalk/kernel.hpp"
#include "floydwalk/rng.hpp"
#include "floydwalk/spectral.hpp"
#include "floydwalk/version.hpp"

namespace floydwalk {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string artifact(const ExperimentConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out_dir) / name).string();
}

std::string u32s(std::uint32_t v) { return std::to_string(v); }
std::string u64s(std::uint64_t v) { return std::to_string(v); }

json axioms_json(const FloydAxiomReport& a) {
  return json{{"positive", a.positive},
              {"non_increasing", a.non_increasing},
              {"lambda_lower", a.lambda_lower},
              {"summable_evidence", a.summable_evidence},
              {"worst_ratio", a.worst_ratio},
              {"first_violation", a.first_violation},
              {"detail", a.detail},
              {"ok", a.ok()}};
}

json stats_json(const StepStats& s) {
  json sigma = json::object();
  for (const auto& [orbit, dist] : s.sigma) sigma[orbit] = dist;
  return json{{"sigma", sigma},
              {"phi", s.phi},
              {"m_bar", s.m_bar},
              {"speed_mean", s.speed_mean},
              {"speed_ci_half", s.speed_ci_half},
              {"speed_lower", s.speed_lower},
              {"speed_upper", s.speed_upper},
              {"trials", s.trials},
              {"horizon", s.horizon}};
}

// Walks outward from the base along the first level-increasing neighbor at
// every step (deterministic: parent-first neighbor order makes this the
// lexicographically first ray).
VertexId ray_vertex(const GraphOracle& g, std::uint32_t target_level) {
  VertexId v = g.base();
  for (std::uint32_t l = 0; l < target_level; ++l) {
    bool advanced = false;
    for (VertexId w : g.neighbors(v)) {
      if (g.level(w) == g.level(v) + 1) {
        v = w;
        advanced = true;
        break;
      }
    }
    if (!advanced) throw_range("no outward ray: the graph ends at level " + u32s(g.level(v)));
  }
  return v;
}

VertexId random_ball_vertex(const GraphOracle& g, int radius, RngStream& rng) {
  VertexId v = g.base();
  auto hops = rng.below(static_cast<std::uint64_t>(radius) + 1);
  for (std::uint64_t i = 0; i < hops; ++i) {
    auto nb = g.neighbors(v);
    v = nb[rng.below(nb.size())];
  }
  return v;
}

// The scale function an experiment runs with. Analytic families and
// file-backed tables come straight from the config; the green-scaled family
// without a file is built on the spot from the configured kernel and graph.
struct FloydChoice {
  FloydFunction f;
  json info;
};

FloydChoice resolve_floyd(const ExperimentConfig& cfg) {
  FloydChoice out{FloydFunction::geometric(0.5), json::object()};
  if (cfg.floyd.family == FloydFamily::GreenScaledTable && cfg.floyd.table_file.empty()) {
    auto g = cfg.graph.build();
    auto k = cfg.kernel.build();
    BallProfileOptions po;
    po.mc_paths = cfg.params.mc_paths;
    po.mc_horizon = cfg.params.mc_horizon;
    po.seed = cfg.seed;
    po.threads = cfg.threads;
    GreenScaledBuild b = build_green_scaled_function(k, g, cfg.floyd.n_max, po);
    out.f = b.f;
    out.info = json{{"source", b.g_source},
                    {"n_max", b.n_max},
                    {"lambda_star", b.lambda_star},
                    {"min_observed_ratio", b.min_observed_ratio}};
  } else {
    out.f = cfg.floyd.build();
    out.info = json{{"source", floyd_family_string(cfg.floyd.family)}};
  }
  out.info["describe"] = out.f.describe();
  return out;
}

// Green-scaled build for the experiment verbs: an explicit table file wins,
// otherwise the table is constructed from the kernel and graph.
GreenScaledBuild resolve_green_scaled(const ExperimentConfig& cfg) {
  if (!cfg.params.table_file.empty()) return read_floyd_table(cfg.params.table_file);
  if (cfg.floyd.family == FloydFamily::GreenScaledTable && !cfg.floyd.table_file.empty())
    return read_floyd_table(cfg.floyd.table_file);
  auto g = cfg.graph.build();
  auto k = cfg.kernel.build();
  int n_max =
      cfg.floyd.family == FloydFamily::GreenScaledTable ? cfg.floyd.n_max : cfg.params.n_max;
  BallProfileOptions po;
  po.mc_paths = cfg.params.mc_paths;
  po.mc_horizon = cfg.params.mc_horizon;
  po.seed = cfg.seed;
  po.threads = cfg.threads;
  return build_green_scaled_function(k, g, n_max, po);
}

std::vector<int> resolve_rho_radii(const ExperimentConfig& cfg, const Kernel& k,
                                   const GraphOracle& g) {
  if (!cfg.params.rho_radii.empty()) return cfg.params.rho_radii;
  if (k.radial(g)) return {10, 15, 20, 25, 30, 35, 40, 45};
  if (g.family() == GraphFamily::ExplicitFinite) return {2, 4};
  return {10, 20, 30, 40};
}

// ---------------------------------------------------------------------------
// verbs

void verb_graph(const ExperimentConfig& cfg, ExperimentReport&, json& out) {
  auto g = cfg.graph.build();
  auto ball = build_ball(g, g.base(), cfg.params.radius);
  write_text_file(artifact(cfg, "ball_edges.txt"), export_edge_list(g, ball));

  CsvWriter csv(artifact(cfg, "graph_levels.csv"));
  csv.comment("sphere and ball sizes around the base vertex of " + g.describe());
  csv.comment("level = graph distance from the base");
  csv.header({"level", "sphere_size", "ball_size"});
  std::uint64_t cumulative = 0;
  for (std::size_t l = 0; l < ball.sphere.size(); ++l) {
    cumulative += ball.sphere[l].size();
    csv.row({u64s(l), u64s(ball.sphere[l].size()), u64s(cumulative)});
  }
  csv.close();

  out["family"] = graph_family_string(g.family());
  out["describe"] = g.describe();
  out["base_degree"] = g.degree(g.base());
  out["radius"] = cfg.params.radius;
  out["ball_vertices"] = ball.size();
  out["edge_list"] = "ball_edges.txt";
}

void verb_floyd(const ExperimentConfig& cfg, ExperimentReport&, json& out) {
  FloydChoice fc = resolve_floyd(cfg);
  const FloydFunction& f = fc.f;

  std::uint32_t span = static_cast<std::uint32_t>(cfg.params.n_max);
  if (f.support_end() != UINT32_MAX && span >= f.support_end()) span = f.support_end() - 1;
  FloydAxiomReport ax = f.check_axioms(span);
  auto prefix = floyd_prefix_sums(f, span);

  CsvWriter csv(artifact(cfg, "floyd_profile.csv"));
  csv.comment("scale function profile: " + f.describe());
  csv.comment("F(n) = sum_{i<n} f(i); nu(n) = 4 n f(n) + 2 sum_{i>=n} f(i);");
  csv.comment("tau(n) = 10 sum_{i>floor(n/2)} f(i); tails use certified upper bounds");
  csv.header({"n", "f", "F", "nu", "tau"});
  for (std::uint32_t n = 0; n <= span; ++n) {
    csv.row({u32s(n), CsvWriter::num(f.eval(n)), CsvWriter::num(static_cast<double>(prefix[n])),
             CsvWriter::num(f.nu(n)), CsvWriter::num(f.tau(n))});
  }
  csv.close();

  out["floyd"] = fc.info;
  out["axioms"] = axioms_json(ax);
  out["checked_levels"] = span;

  if (cfg.params.pairs > 0) {
    auto g = cfg.graph.build();
    FloydMetricEngine engine(g, f);
    RngStream rng(cfg.seed, 0xF107Du);
    CsvWriter pcsv(artifact(cfg, "floyd_inequality.csv"));
    pcsv.comment("random-pair checks of d_f(v,w) <= nu(|m|) and d_f(v,w) <= tau(floor(v^w))");
    pcsv.comment("d_f values are converged upper bounds (rel tol 1e-9)");
    pcsv.header({"pair", "level_v", "level_w", "d_f", "converged", "nu_at_m", "tau_at_gromov",
                 "pass"});
    std::uint32_t violations = 0, non_converged = 0;
    for (std::uint32_t i = 0; i < cfg.params.pairs; ++i) {
      VertexId v = random_ball_vertex(g, cfg.params.radius, rng);
      VertexId w = random_ball_vertex(g, cfg.params.radius, rng);
      auto r = engine.check_inequality1(v, w, cfg.params.radius + 4);
      if (!r.pass()) ++violations;
      if (!r.df.converged) ++non_converged;
      pcsv.row({u32s(i), u32s(g.level(v)), u32s(g.level(w)), CsvWriter::num(r.df.value),
                r.df.converged ? "1" : "0", CsvWriter::num(r.nu_at_m),
                CsvWriter::num(r.tau_at_gromov), r.pass() ? "1" : "0"});
    }
    pcsv.close();
    out["inequality_pairs"] = cfg.params.pairs;
    out["inequality_violations"] = violations;
    out["inequality_non_converged"] = non_converged;
  }

  if (!ax.ok())
    throw_hypothesis("scale-function axioms fail: " + ax.detail);
}

void verb_green(const ExperimentConfig& cfg, ExperimentReport&, json& out) {
  auto g = cfg.graph.build();
  auto k = cfg.kernel.build();
  auto cert = k.certificates(g);  // rejects kernel/graph mismatches up front

  TransienceCheck tc = transience_check(k, g);
  json ladder = json::array();
  for (auto& [R, v] : tc.gee_by_radius) ladder.push_back(json{{"R", R}, {"g_R(e,e)", v}});
  out["transience"] = json{{"declared", transience_name(tc.declared)},
                           {"ladder", ladder},
                           {"increment_ratio", tc.increment_ratio},
                           {"numeric_transient_evidence", tc.numeric_transient_evidence},
                           {"transient", tc.transient}};
  if (!tc.transient)
    throw_hypothesis(std::string("transience evidence fails: declared ") +
                     transience_name(tc.declared) + ", increment ratio " +
                     format_double(tc.increment_ratio));

  BallProfileOptions po;
  po.mc_paths = cfg.params.mc_paths;
  po.mc_horizon = cfg.params.mc_horizon;
  po.seed = cfg.seed;
  po.threads = cfg.threads;
  BallProfile prof = green_ball_profile(k, g, cfg.params.n_max, cert.range, po);

  CsvWriter csv(artifact(cfg, "green_profile.csv"));
  csv.comment(kGreenConvention);
  csv.comment("sphere_mass = g(e, S_n); ball_mass = g(e, B_{n+M}) with M = " +
              std::to_string(prof.M));
  csv.header({"n", "sphere_mass", "ball_mass"});
  for (std::size_t n = 0; n < prof.sphere_mass.size(); ++n) {
    std::string ball =
        n < prof.ball_mass.size() ? CsvWriter::num(prof.ball_mass[n]) : std::string();
    csv.row({u64s(n), CsvWriter::num(prof.sphere_mass[n]), ball});
  }
  csv.close();

  json checks = json::array();
  for (const auto& c : prof.cross_checks) {
    checks.push_back(json{{"n", c.n},
                          {"exact", c.exact},
                          {"mc", c.mc},
                          {"mc_std_error", c.mc_std_error},
                          {"within_3_sigma", c.within_3_sigma}});
  }
  out["profile"] = json{{"M", prof.M},
                        {"n_max", prof.n_max},
                        {"radius_used", prof.radius_used},
                        {"radial_path", prof.radial_path},
                        {"cross_checks", checks}};

  GreenInequalityReport iq = green_inequality_checks(k, g, cfg.params.radius);
  out["inequalities"] = json{{"eps0", iq.eps0},
                             {"K", iq.K},
                             {"sphere_growth_bound", iq.sphere_growth_bound},
                             {"checked_pairs", iq.checked_pairs},
                             {"neighbor_violations", iq.neighbor_violations},
                             {"worst_neighbor_slack", iq.worst_neighbor_slack},
                             {"checked_spheres", iq.checked_spheres},
                             {"sphere_violations", iq.sphere_violations},
                             {"worst_sphere_slack", iq.worst_sphere_slack},
                             {"ok", iq.ok}};
  if (!iq.ok)
    throw_hypothesis("Green comparison inequalities fail on B_" +
                     std::to_string(cfg.params.radius));

  bool mc_ok = true;
  for (const auto& c : prof.cross_checks) mc_ok = mc_ok && c.within_3_sigma;
  if (!mc_ok) throw_hypothesis("Monte Carlo Green cross-checks left the 3-sigma band");
}

void verb_spectral(const ExperimentConfig& cfg, ExperimentReport&, json& out) {
  auto g = cfg.graph.build();
  auto k = cfg.kernel.build();
  k.certificates(g);  // rejects kernel/graph mismatches up front
  auto radii = resolve_rho_radii(cfg, k, g);

  SpectralEstimate se = spectral_radius_estimate(k, g, radii);
  CsvWriter csv(artifact(cfg, "spectral_ladder.csv"));
  csv.comment("leading eigenvalue of the kernel truncated to B_R (absorbing past R)");
  if (se.used_squared_operator) csv.comment("bipartite family: values are sqrt of the P^2 value");
  csv.header({"R", "rho_R"});
  for (auto& [R, v] : se.radius_sequence) csv.row({std::to_string(R), CsvWriter::num(v)});
  csv.close();

  IsoOptions io;
  io.seed = cfg.seed;
  IsoperimetricReport iso = isoperimetric_constant(
      g, g.family() == GraphFamily::ExplicitFinite ? IsoMode::ExactSmall : IsoMode::Heuristic,
      io);
  CsvWriter icsv(artifact(cfg, "iso_ratios.csv"));
  icsv.comment("inner-boundary ratios |dW|/|W| for balls W = B_R");
  icsv.header({"R", "ratio"});
  for (auto& [R, v] : iso.ball_ratios) icsv.row({std::to_string(R), CsvWriter::num(v)});
  icsv.close();

  HypothesisOptions ho;
  ho.rho_radii = radii;
  ho.seed = cfg.seed;
  HypothesisReport hr = spectral_hypothesis_check(k, g, ho);

  out["rho"] = json{{"rho_hat", se.rho_hat},
                    {"converged", se.converged},
                    {"c_hat", se.c_hat},
                    {"c_hat_grid_points", se.c_hat_grid_points},
                    {"used_squared_operator", se.used_squared_operator}};
  out["isoperimetric"] = json{{"eta_hat", iso.eta_hat},
                              {"witness_ratio", iso.witness_ratio},
                              {"sets_enumerated", iso.sets_enumerated},
                              {"verdict", verdict_name(iso.verdict)}};
  out["hypotheses"] = json{{"reversibility_declared", hr.reversibility_declared},
                           {"reversibility_residual", hr.reversibility_residual},
                           {"strong_reversibility_ok", hr.strong_reversibility_ok},
                           {"eps0", hr.eps0},
                           {"K", hr.K},
                           {"uniform_irreducibility_ok", hr.uniform_irreducibility_ok},
                           {"eta_hat", hr.eta_hat},
                           {"isoperimetric", verdict_name(hr.isoperimetric)},
                           {"rho_hat", hr.rho_hat},
                           {"rho_converged", hr.rho_converged},
                           {"rho_below_one", hr.rho_below_one},
                           {"c_hat", hr.c_hat},
                           {"all_pass", hr.all_pass},
                           {"notes", hr.notes}};
  if (!hr.all_pass) {
    std::string why = "spectral hypothesis evidence fails";
    for (const auto& n : hr.notes) why += "; " + n;
    throw_hypothesis(why);
  }
}

void verb_walk(const ExperimentConfig& cfg, ExperimentReport&, json& out) {
  auto g = cfg.graph.build();
  auto k = cfg.kernel.build();

  StatsConfig sc;
  sc.trials = cfg.params.trials;
  sc.horizon = cfg.params.steps;
  sc.seed = cfg.seed;
  sc.threads = cfg.threads;
  StepStats stats = step_stats(k, g, sc);
  out["stats"] = stats_json(stats);

  CsvWriter sum(artifact(cfg, "walk_summary.csv"));
  sum.comment("per-trajectory endpoint summary; " + u32s(cfg.params.steps) + " steps of " +
              k.describe() + " on " + g.describe());
  sum.header({"trial", "final_level", "max_level", "final_dist_from_start"});
  std::uint32_t dump = std::min<std::uint32_t>(cfg.params.trials, 8);
  CsvWriter paths(artifact(cfg, "walk_paths.csv"));
  paths.comment("full sample paths for the first " + u32s(dump) + " trajectories");
  paths.comment("level = d(e, Z_n); dist_from_start = d(Z_0, Z_n)");
  paths.header({"trial", "n", "level", "step_length", "dist_from_start"});
  for (std::uint32_t t = 0; t < cfg.params.trials; ++t) {
    Trajectory tr = sample_trajectory(k, g, g.base(), cfg.params.steps, cfg.seed, t);
    std::uint32_t max_level = 0;
    for (auto l : tr.levels) max_level = std::max(max_level, l);
    sum.row({u32s(t), u32s(tr.levels.back()), u32s(max_level),
             u32s(tr.dist_from_start.back())});
    if (t < dump) {
      for (std::uint32_t n = 0; n < tr.steps(); ++n) {
        paths.row({u32s(t), u32s(n + 1), u32s(tr.levels[n + 1]), u32s(tr.step_lengths[n]),
                   u32s(tr.dist_from_start[n + 1])});
      }
    }
  }
  sum.close();
  paths.close();
}

void verb_lemma1(const ExperimentConfig& cfg, ExperimentReport&, json& out) {
  auto g = cfg.graph.build();
  auto k = cfg.kernel.build();
  int n_max = cfg.floyd.family == FloydFamily::GreenScaledTable ? cfg.floyd.n_max
                                                                : cfg.params.n_max;
  BallProfileOptions po;
  po.mc_paths = cfg.params.mc_paths;
  po.mc_horizon = cfg.params.mc_horizon;
  po.seed = cfg.seed;
  po.threads = cfg.threads;
  GreenScaledBuild b = build_green_scaled_function(k, g, n_max, po);

  std::string table_path = cfg.params.table_file.empty() ? artifact(cfg, "lemma1_table.txt")
                                                         : cfg.params.table_file;
  write_floyd_table(table_path, b);

  CsvWriter csv(artifact(cfg, "lemma1_profile.csv"));
  csv.comment("f(n) = 1 / (n^3 g(e, B_{n+M})); " + std::string(kGreenConvention));
  csv.comment("ratio = f(n+1)/f(n); contraction floor lambda_star = " +
              CsvWriter::num(b.lambda_star));
  csv.header({"n", "f", "ratio"});
  for (std::uint32_t n = 0; n <= static_cast<std::uint32_t>(b.n_max); ++n) {
    std::string ratio =
        n < static_cast<std::uint32_t>(b.n_max) ? CsvWriter::num(b.f.ratio(n)) : std::string();
    csv.row({u32s(n), CsvWriter::num(b.f.eval(n)), ratio});
  }
  csv.close();

  out["M"] = b.M;
  out["eps0"] = b.eps0;
  out["K"] = b.K;
  out["lambda_star"] = b.lambda_star;
  out["n_max"] = b.n_max;
  out["min_observed_ratio"] = b.min_observed_ratio;
  out["radial_profile"] = b.radial_profile;
  out["profile_radius"] = b.profile_radius;
  out["g_source"] = b.g_source;
  out["axioms"] = axioms_json(b.axioms);
  out["table_path"] = table_path;
}

void verb_theorem1(const ExperimentConfig& cfg, ExperimentReport&, json& out) {
  auto g = cfg.graph.build();
  auto k = cfg.kernel.build();
  GreenScaledBuild fb = resolve_green_scaled(cfg);

  CauchyExperimentOptions co;
  co.trials = cfg.params.trials;
  co.steps = cfg.params.steps;
  co.seed = cfg.seed;
  co.threads = cfg.threads;
  co.measured_tail_trajectories = cfg.params.measured_tails;
  CauchyExperimentResult res = floyd_cauchy_experiment(k, g, fb, co);

  CsvWriter csv(artifact(cfg, "theorem1_trajectories.csv"));
  csv.comment("per-trajectory Cauchy diagnostics; X_k = max(|Z_k| - M, 0), M = " +
              std::to_string(res.M));
  csv.comment("maj_tail_m = sum_{k>=m} (4 X_k f(X_k) + 2 (M+1) f(X_k));");
  csv.comment("measured_m = sup of d_f(Z_j, Z_k) over m <= j < k <= N (exact path sums)");
  std::vector<std::string> head{"trial", "stream", "series_sum", "majorant_total"};
  for (auto m : res.m_grid) head.push_back("maj_tail_" + u32s(m));
  for (auto m : res.m_grid) head.push_back("measured_" + u32s(m));
  csv.header(head);
  for (std::size_t t = 0; t < res.per_trajectory.size(); ++t) {
    const auto& d = res.per_trajectory[t];
    std::vector<std::string> cells{u64s(t), u64s(d.stream), CsvWriter::num(d.series_sum),
                                   CsvWriter::num(d.majorant_total)};
    for (double v : d.majorant_tail) cells.push_back(CsvWriter::num(v));
    for (std::size_t i = 0; i < res.m_grid.size(); ++i)
      cells.push_back(d.measured_available ? CsvWriter::num(d.measured_tail[i]) : std::string());
    csv.row(cells);
  }
  csv.close();

  out["trials"] = res.trials;
  out["steps"] = res.steps;
  out["M"] = res.M;
  out["start_level"] = res.start_level;
  out["series_mean"] = res.series_mean;
  out["series_std_error"] = res.series_std_error;
  out["series_bound"] = res.series_bound;
  out["series_within_bound"] = res.series_within_bound;
  out["m_grid"] = res.m_grid;
  out["mean_majorant_tail"] = res.mean_majorant_tail;
  out["verdict_fraction"] = res.verdict_fraction;
  out["gromov_violations"] = res.gromov_violations;
  out["measured_trajectories"] = res.measured_trajectories;
  out["domination_failures"] = res.domination_failures;
  out["table_extension_steps"] = res.table_extension_steps;
  out["measured_method"] = res.measured_method;

  if (cfg.params.speed_tail) {
    SpeedTailOptions so;
    so.trials = cfg.params.speed_trials;
    so.steps = cfg.params.steps;
    so.seed = cfg.seed;
    so.threads = cfg.threads;
    SpeedTailResult st = speed_tail_experiment(k, g, fb.f, so);
    CsvWriter scsv(artifact(cfg, "speed_tail.csv"));
    scsv.comment("per-trajectory linear lower rate c0 for the doubled Gromov product and the");
    scsv.comment("resulting tau tail majorants");
    scsv.header({"trial", "c0", "positive", "tau_partial", "tail_majorant"});
    for (std::size_t t = 0; t < st.per_trajectory.size(); ++t) {
      const auto& d = st.per_trajectory[t];
      scsv.row({u64s(t), CsvWriter::num(d.c0), d.positive ? "1" : "0",
                CsvWriter::num(d.tau_partial), CsvWriter::num(d.tail_majorant)});
    }
    scsv.close();
    out["speed_tail"] = json{{"trials", st.trials},
                             {"steps", st.steps},
                             {"positive_c0_count", st.positive_c0_count},
                             {"min_c0", st.min_c0},
                             {"median_c0", st.median_c0},
                             {"max_tau_partial", st.max_tau_partial},
                             {"max_tail_majorant", st.max_tail_majorant},
                             {"verdict_ok", st.verdict_ok}};
    if (!st.verdict_ok)
      throw_hypothesis("speed-tail experiment found a trajectory without a positive lower rate");
  }

  if (res.gromov_violations > 0)
    throw_numeric("doubled Gromov product fell below the excess-level bound " +
                  u32s(res.gromov_violations) + " times: the kernel range certificate is wrong");
  if (!res.series_within_bound)
    throw_hypothesis("series mean " + format_double(res.series_mean) +
                     " exceeds its closed bound " + format_double(res.series_bound));
  if (res.domination_failures > 0)
    throw_hypothesis("measured Floyd tails exceeded their majorants on " +
                     u32s(res.domination_failures) + " trajectories");
}

void verb_dirichlet(const ExperimentConfig& cfg, ExperimentReport& rep, json& out) {
  auto g = cfg.graph.build();
  auto k = cfg.kernel.build();
  FloydChoice fc = resolve_floyd(cfg);
  const FloydFunction& f = fc.f;

  std::vector<VertexId> rays;
  rays.reserve(cfg.params.ray_levels.size());
  for (auto l : cfg.params.ray_levels) rays.push_back(ray_vertex(g, l));
  std::vector<double> r_list =
      cfg.params.r_list.empty() ? std::vector<double>{0.5 * f.eval(0)} : cfg.params.r_list;

  DirichletScanOptions so;
  so.paths = cfg.params.paths;
  so.horizon = cfg.params.horizon;
  so.skeleton_trials = cfg.params.skeleton_trials;
  so.seed = cfg.seed;
  so.threads = cfg.threads;
  so.stats.seed = cfg.seed;
  so.stats.threads = cfg.threads;
  DirichletScanResult scan = dirichlet_convergence_scan(k, g, f, rays, r_list, so);

  CsvWriter csv(artifact(cfg, "dirichlet_scan.csv"));
  csv.comment("first-hit mass near the exit cell of the deepest ray vertex;");
  csv.comment("weight = mu_v(cells within d_f distance r), conditional on exiting;");
  csv.comment("unhit mass = paths that never reached S_" + u32s(scan.R_exit) +
              " within the horizon");
  csv.header({"|v|", "r", "weight", "stderr", "unhit mass"});
  for (const auto& row : scan.rows) {
    csv.row({u32s(row.level), CsvWriter::num(row.r), CsvWriter::num(row.region_weight),
             CsvWriter::num(row.std_error), CsvWriter::num(row.unhit_mass)});
  }
  csv.close();

  double cap = 0.5 * *std::min_element(r_list.begin(), r_list.end());
  BoundaryCellPartition part = make_boundary_partition(g, f, scan.R_exit, cap);
  HarmonicMeasureOptions ho;
  ho.paths = cfg.params.paths;
  ho.horizon = cfg.params.horizon;
  ho.seed = cfg.seed;
  ho.threads = cfg.threads;
  HarmonicMeasureEstimate hm = harmonic_measure(k, g, g.base(), part, ho);

  CsvWriter ccsv(artifact(cfg, "dirichlet_cells.csv"));
  ccsv.comment("exit-sphere partition (" + std::string(partition_rule_name(part.rule)) +
               ") at R = " + u32s(part.R_exit) + " and first-hit weights from the base");
  ccsv.header({"cell", "label", "size", "df_diameter", "diameter_exact", "base_weight",
               "base_stderr"});
  for (std::size_t c = 0; c < part.cells.size(); ++c) {
    const auto& cell = part.cells[c];
    ccsv.row({u64s(cell.id), cell.label, u64s(cell.size), CsvWriter::num(cell.df_diameter),
              cell.diameter_exact ? "1" : "0", CsvWriter::num(hm.weights[c]),
              CsvWriter::num(hm.std_error[c])});
  }
  ccsv.close();
  if (hm.horizon_warning)
    rep.warnings.push_back("harmonic measure from the base left " +
                           format_double(hm.unhit_mass) +
                           " of paths short of the exit sphere; raise params.horizon");

  EventSpec es;
  es.alpha = scan.alpha;
  es.eps = scan.eps;
  es.horizon = cfg.params.event_horizon;
  es.m_bar = scan.m_bar;
  es.m_lower = scan.m_lower;
  std::vector<VertexId> v_list;
  v_list.reserve(cfg.params.event_levels.size());
  for (auto l : cfg.params.event_levels) v_list.push_back(ray_vertex(g, l));
  double need = es.alpha * static_cast<double>(cfg.params.event_levels.back());
  if (static_cast<double>(es.horizon) <= need + 1)
    throw_config("config.params.event_horizon: must exceed alpha * max event level = " +
                 format_double(need));
  EventScanOptions eo;
  eo.trials = cfg.params.event_trials;
  eo.seed = cfg.seed;
  eo.threads = cfg.threads;
  EventScanResult ev = event_probability_scan(k, g, es, v_list, eo);

  CsvWriter ecsv(artifact(cfg, "dirichlet_events.csv"));
  ecsv.comment("Monte Carlo pass rates for the trajectory event A_v(alpha, eps);");
  ecsv.comment("alpha = " + CsvWriter::num(ev.alpha) + ", eps = " + CsvWriter::num(ev.eps) +
               ", horizon = " + u32s(ev.horizon) + "; Wilson 95% interval");
  ecsv.header({"|v|", "trials", "passes", "p_hat", "wilson_lo", "wilson_hi", "cond2_rate",
               "cond3_rate", "cond4_rate", "cond5_rate", "skeleton_applicable",
               "skeleton_start_violations", "skeleton_step_violations"});
  for (const auto& row : ev.rows) {
    ecsv.row({u32s(row.level), u32s(row.trials), u32s(row.passes), CsvWriter::num(row.p_hat),
              CsvWriter::num(row.wilson_lo), CsvWriter::num(row.wilson_hi),
              CsvWriter::num(row.cond_pass_rate[0]), CsvWriter::num(row.cond_pass_rate[1]),
              CsvWriter::num(row.cond_pass_rate[2]), CsvWriter::num(row.cond_pass_rate[3]),
              row.skeleton_applicable ? "1" : "0", u32s(row.skeleton_start_violations),
              u32s(row.skeleton_step_violations)});
  }
  ecsv.close();

  json skeleton = json::array();
  for (const auto& s : scan.skeleton) {
    skeleton.push_back(json{{"level", s.level},
                            {"k", s.k},
                            {"applicable", s.applicable},
                            {"trials", s.trials},
                            {"av_passes", s.av_passes},
                            {"start_violations", s.start_violations},
                            {"step_violations", s.step_violations},
                            {"tau_bound", s.tau_bound}});
  }
  out["floyd"] = fc.info;
  out["scan"] = json{{"R_exit", scan.R_exit},
                     {"exit_cell", scan.exit_cell},
                     {"exit_cell_label", part.cells[scan.exit_cell].label},
                     {"m_bar", scan.m_bar},
                     {"m_lower", scan.m_lower},
                     {"alpha", scan.alpha},
                     {"eps", scan.eps},
                     {"c", scan.c},
                     {"r_list", scan.r_list},
                     {"monotone_within_tol", scan.monotone_within_tol},
                     {"stability_disagreement", scan.stability_disagreement},
                     {"cells_converged", scan.cells_converged},
                     {"skeleton_violations_applicable", scan.skeleton_violations_applicable}};
  out["skeleton"] = skeleton;
  out["harmonic_base"] = json{{"paths", hm.paths},
                              {"unhit_mass", hm.unhit_mass},
                              {"horizon_warning", hm.horizon_warning},
                              {"stability_checked", hm.stability_checked},
                              {"stability_disagreement", hm.stability_disagreement},
                              {"stability_pairs", hm.stability_pairs}};
  out["events"] = json{{"alpha", ev.alpha},
                       {"eps", ev.eps},
                       {"m_bar", ev.m_bar},
                       {"m_lower", ev.m_lower},
                       {"horizon", ev.horizon},
                       {"min_consecutive_delta", ev.min_consecutive_delta},
                       {"monotone", ev.monotone},
                       {"skeleton_violations_applicable", ev.skeleton_violations_applicable}};

  if (!ev.monotone)
    throw_hypothesis("event pass rate is not non-decreasing in |v| (min delta " +
                     format_double(ev.min_consecutive_delta) + ")");
  if (ev.skeleton_violations_applicable > 0 || scan.skeleton_violations_applicable > 0)
    throw_hypothesis("skeleton bounds were violated on trajectories that passed A_v");
  if (!scan.monotone_within_tol)
    throw_hypothesis("target-region mass is not non-decreasing along the ray within tolerance");
}

void verb_verify_all(const ExperimentConfig& cfg, ExperimentReport& rep, json& out) {
  ExperimentConfig s = cfg;
  auto& p = s.params;
  p.radius = std::min(p.radius, 8);
  p.trials = std::min<std::uint32_t>(p.trials, 50);
  p.steps = std::min<std::uint32_t>(p.steps, 500);
  p.paths = std::min<std::uint32_t>(p.paths, 400);
  p.horizon = std::min<std::uint32_t>(p.horizon, 1500);
  p.n_max = std::min(p.n_max, 16);
  p.pairs = std::min<std::uint32_t>(p.pairs == 0 ? 64 : p.pairs, 64);
  p.skeleton_trials = std::min<std::uint32_t>(p.skeleton_trials, 100);
  p.event_trials = std::min<std::uint32_t>(p.event_trials, 200);
  p.event_horizon = std::min<std::uint32_t>(p.event_horizon, 600);
  p.mc_paths = std::min<std::uint32_t>(p.mc_paths, 2000);
  p.measured_tails = std::min<std::uint32_t>(p.measured_tails, 8);
  p.speed_trials = std::min<std::uint32_t>(p.speed_trials, 16);
  if (p.ray_levels.size() > 3) p.ray_levels.resize(3);
  if (p.event_levels.size() > 2) p.event_levels.resize(2);

  verb_graph(s, rep, out["graph"]);
  verb_floyd(s, rep, out["floyd"]);
  verb_green(s, rep, out["green"]);
  verb_spectral(s, rep, out["spectral"]);
  verb_walk(s, rep, out["walk"]);
  verb_lemma1(s, rep, out["lemma1"]);
  verb_theorem1(s, rep, out["theorem1"]);
  verb_dirichlet(s, rep, out["dirichlet"]);
}

const char* err_kind_name(ErrKind k) {
  switch (k) {
    case ErrKind::Config: return "config";
    case ErrKind::Range: return "range";
    case ErrKind::CapExceeded: return "cap_exceeded";
    case ErrKind::Hypothesis: return "hypothesis";
    case ErrKind::Numeric: return "numeric";
  }
  return "unknown";
}

int exit_status_for(ErrKind k) {
  switch (k) {
    case ErrKind::Config: return kExitUsage;
    case ErrKind::Hypothesis: return kExitHypothesisFails;
    default: return kExitInternalError;
  }
}

}  // namespace

int run_command(const std::string& verb, const ExperimentConfig& cfg, ExperimentReport& rep) {
  auto t0 = std::chrono::steady_clock::now();
  rep.verb = verb;
  rep.version = kVersion;
  rep.green_convention = kGreenConvention;
  rep.rng = kRngDescription;
  rep.config_hash = config_hash_hex(cfg);

  int code = kExitSuccess;
  try {
    fs::create_directories(cfg.out_dir);
    write_text_file(artifact(cfg, "config.json"), serialize_config(cfg));
    if (verb == "graph") verb_graph(cfg, rep, rep.results);
    else if (verb == "floyd") verb_floyd(cfg, rep, rep.results);
    else if (verb == "green") verb_green(cfg, rep, rep.results);
    else if (verb == "spectral") verb_spectral(cfg, rep, rep.results);
    else if (verb == "walk") verb_walk(cfg, rep, rep.results);
    else if (verb == "lemma1") verb_lemma1(cfg, rep, rep.results);
    else if (verb == "theorem1") verb_theorem1(cfg, rep, rep.results);
    else if (verb == "dirichlet") verb_dirichlet(cfg, rep, rep.results);
    else if (verb == "verify-all") verb_verify_all(cfg, rep, rep.results);
    else
      throw_config("unknown verb '" + verb +
                   "' (expected graph|floyd|green|spectral|walk|lemma1|theorem1|dirichlet|"
                   "verify-all)");
  } catch (const Error& e) {
    code = exit_status_for(e.kind());
    rep.results["error"] = json{{"kind", err_kind_name(e.kind())},
                                {"what", e.what()},
                                {"exit_status", code}};
  } catch (const std::exception& e) {
    code = kExitInternalError;
    rep.results["error"] =
        json{{"kind", "exception"}, {"what", e.what()}, {"exit_status", code}};
  }

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    write_report(artifact(cfg, "report.json"), rep);
  } catch (const std::exception&) {
    if (code == kExitSuccess) code = kExitInternalError;
  }
  return code;
}

}  // namespace floydwalk
