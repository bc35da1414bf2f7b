#include "floydwalk/boundary.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "floydwalk/error.hpp"
#include "floydwalk/floyd_metric.hpp"
#include "floydwalk/parallel.hpp"

namespace floydwalk {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

double contraction_constant(double eps0, int K) {
  return eps0 * eps0 / (8.0 * (K + 1 + eps0 * eps0));
}

}  // namespace

GreenScaledBuild build_green_scaled_function(const Kernel& k, const GraphOracle& g, int n_max,
                                             const BallProfileOptions& opt, const Limits& lim) {
  if (n_max < 2) throw_config("green-scaled table needs n_max >= 2");
  auto cert = k.certificates(g);

  GreenScaledBuild b{FloydFunction::geometric(0.5)};
  b.M = cert.range;
  b.eps0 = cert.eps0;
  b.K = cert.K;
  b.lambda_star = contraction_constant(cert.eps0, cert.K);
  b.n_max = n_max;

  auto prof = green_ball_profile(k, g, n_max, b.M, opt, lim);
  b.radial_profile = prof.radial_path;
  b.profile_radius = prof.radius_used;
  b.g_source = std::string(prof.radial_path ? "level-chain solve" : "ball solve") +
               " R=" + std::to_string(prof.radius_used);

  std::vector<double> values(static_cast<std::size_t>(n_max) + 1);
  for (int n = 1; n <= n_max; ++n) {
    double mass = prof.ball_mass[static_cast<std::size_t>(n)];
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw_numeric("green-scaled table: ball mass is not positive finite");
    double nn = static_cast<double>(n);
    values[static_cast<std::size_t>(n)] = 1.0 / (nn * nn * nn * mass);
  }
  values[0] = values[1];

  b.min_observed_ratio = std::numeric_limits<double>::infinity();
  for (int n = 1; n < n_max; ++n)
    b.min_observed_ratio = std::min(
        b.min_observed_ratio, values[static_cast<std::size_t>(n) + 1] / values[static_cast<std::size_t>(n)]);
  if (b.min_observed_ratio < b.lambda_star * (1.0 - 1e-12))
    throw_numeric("green-scaled table ratio fell below its contraction constant");

  // f(n) n^3 = 1/g(e,B_{n+M}) decreases, so the last entry caps the tail
  PowerTailBound tail;
  tail.exponent = 3.0;
  tail.coeff = values.back() * static_cast<double>(n_max) * n_max * n_max;
  b.f = FloydFunction::green_scaled_table(std::move(values), b.lambda_star, tail);

  b.axioms = b.f.check_axioms(static_cast<std::uint32_t>(n_max));
  if (!b.axioms.ok())
    throw_numeric("green-scaled table failed the scale-function axioms: " + b.axioms.detail);
  return b;
}

void write_floyd_table(const std::string& path, const GreenScaledBuild& build) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_config("cannot open table file for writing: " + path);
  out << "# n f(n) M=" << build.M << " eps0=" << fmt_double(build.eps0) << " K=" << build.K
      << " lambda_star=" << fmt_double(build.lambda_star) << "\n";
  for (int n = 1; n <= build.n_max; ++n)
    out << n << " " << fmt_double(build.f.eval(static_cast<std::uint32_t>(n))) << "\n";
  if (!out) throw_config("failed while writing table file: " + path);
}

GreenScaledBuild read_floyd_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("cannot open table file: " + path);
  std::string header;
  std::getline(in, header);

  GreenScaledBuild b{FloydFunction::geometric(0.5)};
  bool have_m = false, have_eps = false, have_k = false, have_lambda = false;
  {
    std::istringstream hs(header);
    std::string tok;
    while (hs >> tok) {
      auto grab = [&](const char* key, auto& dst) {
        std::size_t n = std::strlen(key);
        if (tok.compare(0, n, key) != 0) return false;
        const char* first = tok.data() + n;
        const char* last = tok.data() + tok.size();
        auto res = std::from_chars(first, last, dst);
        if (res.ec != std::errc{} || res.ptr != last)
          throw_config("table header: cannot parse " + tok);
        return true;
      };
      if (grab("M=", b.M)) have_m = true;
      else if (grab("eps0=", b.eps0)) have_eps = true;
      else if (grab("K=", b.K)) have_k = true;
      else if (grab("lambda_star=", b.lambda_star)) have_lambda = true;
    }
  }
  if (!have_m || !have_eps || !have_k || !have_lambda)
    throw_config("table header is missing M=/eps0=/K=/lambda_star= fields");

  std::vector<double> values{0.0};  // slot 0 backfilled with f(1)
  std::string line;
  int expect = 1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int n;
    double v;
    if (!(ls >> n >> v)) throw_config("table row is not 'n value': " + line);
    if (n != expect) throw_config("table rows must be consecutive from n=1");
    if (!(v > 0.0)) throw_config("table values must be positive");
    values.push_back(v);
    ++expect;
  }
  if (values.size() < 3) throw_config("table needs at least n=1,2");
  values[0] = values[1];

  b.n_max = expect - 1;
  b.g_source = "table_file";
  b.min_observed_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n + 1 < values.size(); ++n)
    b.min_observed_ratio = std::min(b.min_observed_ratio, values[n + 1] / values[n]);

  PowerTailBound tail;
  tail.exponent = 3.0;
  tail.coeff = values.back() * std::pow(static_cast<double>(b.n_max), 3.0);
  b.f = FloydFunction::green_scaled_table(std::move(values), b.lambda_star, tail);
  b.axioms = b.f.check_axioms(static_cast<std::uint32_t>(b.n_max));
  if (!b.axioms.ok()) throw_config("table file violates the scale-function axioms");
  return b;
}

std::vector<std::uint32_t> excess_level_sequence(const Trajectory& t, int M) {
  std::vector<std::uint32_t> x(t.levels.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = t.levels[i] > static_cast<std::uint32_t>(M) ? t.levels[i] - static_cast<std::uint32_t>(M)
                                                       : 0u;
  return x;
}

GromovBoundReport gromov_lower_bound_check(const Trajectory& t, int M, bool statistical) {
  GromovBoundReport rep;
  rep.steps = t.steps();
  rep.worst_doubled_slack = std::numeric_limits<std::int64_t>::max();
  for (std::uint32_t k = 0; k < rep.steps; ++k) {
    std::int64_t doubled_gromov = static_cast<std::int64_t>(t.levels[k]) + t.levels[k + 1] -
                                  t.step_lengths[k];
    std::int64_t x2 = 2 * std::max<std::int64_t>(static_cast<std::int64_t>(t.levels[k]) - M, 0);
    std::int64_t slack = doubled_gromov - x2;
    rep.worst_doubled_slack = std::min(rep.worst_doubled_slack, slack);
    if (slack < 0) ++rep.violations;
  }
  if (rep.steps == 0) rep.worst_doubled_slack = 0;
  rep.ok = rep.violations == 0;
  if (!rep.ok && !statistical)
    throw_numeric("Gromov lower bound violated: kernel range certificate is wrong");
  return rep;
}

namespace {

// longest-prefix bookkeeping against a fixed reference word; mirrors the
// walker's incremental rule set
struct PrefixTracker {
  const std::uint8_t* ref;
  std::size_t ref_len;
  std::size_t match = 0;

  void on_pop(std::size_t new_len) { match = std::min(match, new_len); }
  void on_push(std::size_t pos, std::uint8_t c) {
    if (match == pos && pos < ref_len && ref[pos] == c) ++match;
  }
  void on_replace(std::size_t pos, std::uint8_t c) {
    if (match > pos) match = pos;
    if (match == pos && pos < ref_len && ref[pos] == c) ++match;
  }
};

// sup over k in (j, N] of d_f(Z_j, Z_k), exact, for every j; tree version
std::vector<double> tree_sup_profile(const Trajectory& t, const std::vector<double>& F) {
  std::uint32_t N = t.steps();
  std::vector<double> sup(N, 0.0);
  std::vector<std::uint8_t> word_j;  // word at time j (start is the base)
  word_j.reserve(256);
  std::vector<std::uint8_t> buf;
  buf.reserve(256);

  auto moves_of = [&](std::uint32_t step, std::uint32_t& lo, std::uint32_t& hi) {
    if (t.move_offsets.empty()) {
      lo = step;
      hi = step + 1;
    } else {
      lo = t.move_offsets[step];
      hi = t.move_offsets[step + 1];
    }
  };

  for (std::uint32_t j = 0; j < N; ++j) {
    buf = word_j;
    PrefixTracker pt{word_j.data(), word_j.size(), word_j.size()};
    double Fj = F[t.levels[j]];
    double best = 0.0;
    for (std::uint32_t k = j; k < N; ++k) {
      std::uint32_t lo, hi;
      moves_of(k, lo, hi);
      for (std::uint32_t i = lo; i < hi; ++i) {
        std::uint8_t mv = t.moves[i];
        if (mv == 0xFF) continue;  // lazy hold
        if (mv == 0) {
          buf.pop_back();
          pt.on_pop(buf.size());
        } else {
          pt.on_push(buf.size(), static_cast<std::uint8_t>(mv - 1));
          buf.push_back(static_cast<std::uint8_t>(mv - 1));
        }
      }
      double d = Fj + F[t.levels[k + 1]] - 2.0 * F[pt.match];
      best = std::max(best, d);
    }
    sup[j] = best;

    // advance the reference word one step
    std::uint32_t lo, hi;
    moves_of(j, lo, hi);
    for (std::uint32_t i = lo; i < hi; ++i) {
      std::uint8_t mv = t.moves[i];
      if (mv == 0xFF) continue;
      if (mv == 0)
        word_j.pop_back();
      else
        word_j.push_back(static_cast<std::uint8_t>(mv - 1));
    }
  }
  return sup;
}

// half line: d_f(Z_j, Z_k) = |F(|Z_j|) - F(|Z_k|)|, so suffix extremes suffice
std::vector<double> half_line_sup_profile(const Trajectory& t, const std::vector<double>& F) {
  std::uint32_t N = t.steps();
  std::vector<double> sup(N, 0.0);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::uint32_t j = N; j-- > 0;) {
    double Fk = F[t.levels[j + 1]];
    lo = std::min(lo, Fk);
    hi = std::max(hi, Fk);
    double Fj = F[t.levels[j]];
    sup[j] = std::max(Fj - lo, hi - Fj);
  }
  return sup;
}

}  // namespace

CauchyExperimentResult floyd_cauchy_experiment(const Kernel& k, const GraphOracle& g,
                                               const GreenScaledBuild& fb,
                                               const CauchyExperimentOptions& opt,
                                               const Limits& lim) {
  (void)lim;
  if (opt.trials < 1 || opt.steps < 8) throw_config("need trials >= 1 and steps >= 8");
  if (opt.tail_grid_points < 2) throw_config("need at least two tail grid points");
  auto cert = k.certificates(g);
  if (cert.range != fb.M) throw_config("scale table was built for a different kernel range");
  const FloydFunction& f = fb.f;

  CauchyExperimentResult res;
  res.trials = opt.trials;
  res.steps = opt.steps;
  res.M = fb.M;
  res.start_level = 0;
  constexpr double kPiSquaredOverSix = 1.6449340668482264;
  res.series_bound =
      std::pow(fb.eps0, -static_cast<double>(res.start_level)) * kPiSquaredOverSix;

  const std::uint32_t N = opt.steps;
  for (int i = 0; i < opt.tail_grid_points; ++i)
    res.m_grid.push_back(static_cast<std::uint32_t>(
        static_cast<std::uint64_t>(N) * static_cast<std::uint64_t>(i) /
        static_cast<std::uint64_t>(opt.tail_grid_points - 1)));
  const std::uint32_t m_half = N / 2;

  bool exact_family =
      g.family() == GraphFamily::RegularTree || g.family() == GraphFamily::HalfLine;
  std::uint32_t measured = 0;
  if (exact_family)
    measured = opt.measured_tail_trajectories == 0
                   ? opt.trials
                   : std::min(opt.trials, opt.measured_tail_trajectories);
  res.measured_trajectories = measured;
  res.measured_method =
      exact_family ? "exact unique-path sums" : "skipped: family lacks exact path sums";

  res.per_trajectory.assign(opt.trials, {});
  std::vector<std::uint32_t> gromov_violations(opt.trials, 0);
  std::vector<std::uint32_t> extension_steps(opt.trials, 0);
  std::vector<double> half_tail(opt.trials, 0.0);
  std::uint32_t support = f.support_end();

  parallel_for(opt.trials, opt.threads, [&](std::size_t trial) {
    auto t = sample_trajectory(k, g, g.base(), N, opt.seed, trial);
    auto& diag = res.per_trajectory[trial];
    diag.stream = trial;

    auto gb = gromov_lower_bound_check(t, fb.M, true);
    gromov_violations[trial] = gb.violations;

    std::uint32_t ext = 0;
    auto f_at = [&](std::uint32_t x) {
      if (x < support) return f.eval(x);
      ++ext;
      return f.eval_upper(x);
    };

    // per-step majorants for d_f(Z_k, Z_{k+1}) and the series terms
    std::vector<double> step_majorant(N);
    double series = 0.0;
    for (std::uint32_t pos = 0; pos <= N; ++pos) {
      std::uint32_t lvl = t.levels[pos];
      std::uint32_t x = lvl > static_cast<std::uint32_t>(fb.M) ? lvl - fb.M : 0u;
      double fx = f_at(x);
      series += x * fx;
      if (pos < N) step_majorant[pos] = 4.0 * x * fx + 2.0 * (fb.M + 1) * fx;
    }
    diag.series_sum = series;
    extension_steps[trial] = ext;

    std::vector<double> suffix(N + 1, 0.0);
    for (std::uint32_t pos = N; pos-- > 0;) suffix[pos] = suffix[pos + 1] + step_majorant[pos];
    diag.majorant_total = suffix[0];
    for (auto m : res.m_grid) diag.majorant_tail.push_back(suffix[m]);
    half_tail[trial] = suffix[m_half];

    if (trial < measured) {
      std::uint32_t max_level = *std::max_element(t.levels.begin(), t.levels.end());
      // prefix sums of the scale function the experiment actually runs with:
      // stored values inside the table, the certified power-tail bound past it
      std::vector<double> F(static_cast<std::size_t>(max_level) + 2, 0.0);
      long double acc = 0.0L;
      for (std::uint32_t i = 0; i <= max_level; ++i) {
        acc += i < support ? f.eval(i) : f.eval_upper(i);
        F[i + 1] = static_cast<double>(acc);
      }
      auto sup = g.family() == GraphFamily::HalfLine ? half_line_sup_profile(t, F)
                                                     : tree_sup_profile(t, F);
      // tail(m) = sup over j >= m of sup_k d_f: suffix maximum
      std::vector<double> tail_at(N + 1, 0.0);
      for (std::uint32_t j = N; j-- > 0;) tail_at[j] = std::max(tail_at[j + 1], sup[j]);
      diag.measured_available = true;
      for (std::size_t i = 0; i < res.m_grid.size(); ++i) {
        double mt = tail_at[res.m_grid[i]];
        diag.measured_tail.push_back(mt);
        if (mt > diag.majorant_tail[i] * (1.0 + 1e-9) + 1e-12) diag.majorant_dominates = false;
      }
    }
  });

  double sum = 0.0;
  for (auto& d : res.per_trajectory) sum += d.series_sum;
  res.series_mean = sum / opt.trials;
  double var = 0.0;
  for (auto& d : res.per_trajectory) {
    double dd = d.series_sum - res.series_mean;
    var += dd * dd;
  }
  var = opt.trials > 1 ? var / (opt.trials - 1) : 0.0;
  res.series_std_error = std::sqrt(var / opt.trials);
  res.series_within_bound = res.series_mean <= res.series_bound + 3.0 * res.series_std_error;

  res.mean_majorant_tail.assign(res.m_grid.size(), 0.0);
  std::uint32_t below_tol = 0;
  for (std::uint32_t trial = 0; trial < opt.trials; ++trial) {
    auto& d = res.per_trajectory[trial];
    for (std::size_t i = 0; i < res.m_grid.size(); ++i) res.mean_majorant_tail[i] += d.majorant_tail[i];
    if (half_tail[trial] < opt.tail_tol) ++below_tol;
    res.gromov_violations += gromov_violations[trial];
    res.table_extension_steps += extension_steps[trial];
    if (d.measured_available && !d.majorant_dominates) ++res.domination_failures;
  }
  for (auto& v : res.mean_majorant_tail) v /= opt.trials;
  res.verdict_fraction = static_cast<double>(below_tol) / opt.trials;
  return res;
}

SpeedTailResult speed_tail_experiment(const Kernel& k, const GraphOracle& g,
                                      const FloydFunction& f, const SpeedTailOptions& opt) {
  if (opt.trials < 1 || opt.steps < 16) throw_config("need trials >= 1 and steps >= 16");
  if (!f.n_f_summable())
    throw_config("speed route requires sum n f(n) < infinity; this function lacks that flag");

  SpeedTailResult res;
  res.trials = opt.trials;
  res.steps = opt.steps;
  res.per_trajectory.assign(opt.trials, {});

  const std::uint32_t N = opt.steps, n0 = N / 4;
  parallel_for(opt.trials, opt.threads, [&](std::size_t trial) {
    auto t = sample_trajectory(k, g, g.base(), N, opt.seed, trial);
    auto& out = res.per_trajectory[trial];
    out.n0 = n0;

    double min_rate = std::numeric_limits<double>::infinity();
    double tau_sum = 0.0;
    for (std::uint32_t n = 0; n < N; ++n) {
      std::int64_t doubled = static_cast<std::int64_t>(t.levels[n]) + t.levels[n + 1] -
                             t.step_lengths[n];
      auto floor_gromov = static_cast<std::uint32_t>(doubled / 2);
      tau_sum += f.tau(floor_gromov);
      if (n >= n0)
        min_rate = std::min(min_rate, static_cast<double>(doubled) / (2.0 * static_cast<double>(n)));
    }
    out.tau_partial = tau_sum;
    out.c0 = 0.9 * min_rate;
    out.positive = out.c0 > 0.0;
    if (out.positive) {
      auto start = static_cast<std::uint32_t>(out.c0 * n0);
      double per_integer_hits = std::ceil(1.0 / out.c0);
      out.tail_majorant = per_integer_hits * f.tau_tail_upper(start);
    } else {
      out.tail_majorant = std::numeric_limits<double>::infinity();
    }
  });

  std::vector<double> c0s;
  for (auto& d : res.per_trajectory) {
    if (d.positive) ++res.positive_c0_count;
    c0s.push_back(d.c0);
    res.max_tau_partial = std::max(res.max_tau_partial, d.tau_partial);
    res.max_tail_majorant = std::max(res.max_tail_majorant, d.tail_majorant);
  }
  std::sort(c0s.begin(), c0s.end());
  res.min_c0 = c0s.front();
  res.median_c0 = c0s[c0s.size() / 2];
  res.verdict_ok = res.positive_c0_count == res.trials;
  return res;
}

}  // namespace floydwalk
