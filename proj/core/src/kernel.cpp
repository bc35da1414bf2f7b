#include "floydwalk/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "floydwalk/error.hpp"
#include "floydwalk/parallel.hpp"

namespace floydwalk {

namespace {
constexpr std::uint8_t kHoldMove = 0xFF;
}

const char* kernel_rule_name(KernelRule r) {
  switch (r) {
    case KernelRule::SimpleRw: return "simple_rw";
    case KernelRule::LazyRw: return "lazy_rw";
    case KernelRule::TreeDrift: return "tree_drift";
    case KernelRule::BoundedRangeMixture: return "bounded_range_mixture";
  }
  return "?";
}

Kernel Kernel::simple_rw() {
  Kernel k;
  k.rule_ = KernelRule::SimpleRw;
  return k;
}

Kernel Kernel::lazy_rw(double hold) {
  if (!(hold > 0.0 && hold < 1.0)) throw_config("lazy_rw: hold probability must be in (0,1)");
  Kernel k;
  k.rule_ = KernelRule::LazyRw;
  k.param_ = hold;
  return k;
}

Kernel Kernel::tree_drift(double outward) {
  if (!(outward > 0.0 && outward < 1.0)) throw_config("tree_drift: outward mass must be in (0,1)");
  Kernel k;
  k.rule_ = KernelRule::TreeDrift;
  k.param_ = outward;
  return k;
}

Kernel Kernel::bounded_range_mixture(std::vector<double> step_weights) {
  if (step_weights.empty() || step_weights.size() > 16)
    throw_config("bounded_range_mixture: need 1..16 step weights");
  double sum = 0.0;
  for (double w : step_weights) {
    if (!(w >= 0.0)) throw_config("bounded_range_mixture: weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw_config("bounded_range_mixture: weights must sum to 1");
  if (!(step_weights[0] > 0.0))
    throw_config("bounded_range_mixture: weight of single steps must be positive");
  for (double& w : step_weights) w /= sum;
  Kernel k;
  k.rule_ = KernelRule::BoundedRangeMixture;
  k.weights_ = std::move(step_weights);
  return k;
}

std::string Kernel::describe() const {
  std::ostringstream os;
  os << kernel_rule_name(rule_);
  switch (rule_) {
    case KernelRule::LazyRw: os << "(hold=" << param_ << ")"; break;
    case KernelRule::TreeDrift: os << "(outward=" << param_ << ")"; break;
    case KernelRule::BoundedRangeMixture: os << "(range=" << weights_.size() << ")"; break;
    default: break;
  }
  return os.str();
}

KernelCertificates Kernel::certificates(const GraphOracle& g) const {
  KernelCertificates c;
  int dmax = g.max_degree();
  switch (rule_) {
    case KernelRule::SimpleRw:
      c.range = 1;
      c.eps0 = 1.0 / dmax;
      c.K = 1;
      break;
    case KernelRule::LazyRw:
      c.range = 1;
      c.eps0 = (1.0 - param_) / dmax;
      c.K = 1;
      break;
    case KernelRule::TreeDrift: {
      if (g.family() != GraphFamily::RegularTree) throw_config("tree_drift needs a regular tree");
      int q = g.tree_branching();
      c.range = 1;
      c.eps0 = std::min({1.0 - param_, param_ / q, 1.0 / (q + 1)});
      c.K = 1;
      break;
    }
    case KernelRule::BoundedRangeMixture:
      c.range = static_cast<int>(weights_.size());
      c.eps0 = weights_[0] / dmax;
      c.K = 1;
      break;
  }
  c.has_reversing_measure = has_reversing(g);
  if (c.has_reversing_measure) {
    c.rev_lower = 1.0;
    c.rev_upper = dmax;
  }
  return c;
}

bool Kernel::has_reversing(const GraphOracle&) const {
  // simple/lazy/mixture are reversible with respect to the degree measure;
  // a biased tree walk is not (for general bias)
  return rule_ != KernelRule::TreeDrift;
}

double Kernel::reversing_measure(const GraphOracle& g, VertexId v) const {
  if (!has_reversing(g)) throw_config("kernel has no declared reversing measure");
  return static_cast<double>(g.degree(v));
}

std::vector<std::pair<VertexId, double>> Kernel::row(const GraphOracle& g, VertexId v) const {
  std::map<std::uint64_t, double> acc;
  switch (rule_) {
    case KernelRule::SimpleRw: {
      auto nb = g.neighbors(v);
      for (VertexId w : nb) acc[w.v] += 1.0 / static_cast<double>(nb.size());
      break;
    }
    case KernelRule::LazyRw: {
      acc[v.v] += param_;
      auto nb = g.neighbors(v);
      for (VertexId w : nb) acc[w.v] += (1.0 - param_) / static_cast<double>(nb.size());
      break;
    }
    case KernelRule::TreeDrift: {
      auto nb = g.neighbors(v);  // parent first for non-root vertices
      if (g.level(v) == 0) {
        for (VertexId w : nb) acc[w.v] += 1.0 / static_cast<double>(nb.size());
      } else {
        int q = g.tree_branching();
        acc[nb[0].v] += 1.0 - param_;
        for (std::size_t i = 1; i < nb.size(); ++i) acc[nb[i].v] += param_ / q;
      }
      break;
    }
    case KernelRule::BoundedRangeMixture: {
      std::map<std::uint64_t, double> cur{{v.v, 1.0}};
      for (double wj : weights_) {
        std::map<std::uint64_t, double> next;
        for (auto& [u, p] : cur) {
          auto nb = g.neighbors(VertexId{u});
          for (VertexId w : nb) next[w.v] += p / static_cast<double>(nb.size());
        }
        cur = std::move(next);
        if (wj > 0.0)
          for (auto& [u, p] : cur) acc[u] += wj * p;
      }
      break;
    }
  }
  std::vector<std::pair<VertexId, double>> out;
  out.reserve(acc.size());
  for (auto& [u, p] : acc) out.emplace_back(VertexId{u}, p);
  return out;
}

double Kernel::prob(const GraphOracle& g, VertexId v, VertexId w) const {
  for (auto& [u, p] : row(g, v))
    if (u == w) return p;
  return 0.0;
}

double Kernel::kstep_prob(const GraphOracle& g, VertexId v, VertexId w, int kappa) const {
  std::map<std::uint64_t, double> cur{{v.v, 1.0}};
  for (int step = 0; step < kappa; ++step) {
    std::map<std::uint64_t, double> next;
    for (auto& [u, p] : cur)
      for (auto& [x, q] : row(g, VertexId{u})) next[x.v] += p * q;
    cur = std::move(next);
  }
  auto it = cur.find(w.v);
  return it == cur.end() ? 0.0 : it->second;
}

bool Kernel::radial(const GraphOracle& g) const {
  switch (g.family()) {
    case GraphFamily::RegularTree: return true;
    case GraphFamily::HalfLine:
    case GraphFamily::FreeProductZ3Z3: return rule_ != KernelRule::TreeDrift;
    default: return false;
  }
}

double Kernel::RadialMatrix::at(int i, int j) const {
  if (i < 0 || i > R || j < 0 || j > R || std::abs(i - j) > band) return 0.0;
  return p[static_cast<std::size_t>(i) * (2 * band + 1) + static_cast<std::size_t>(j - i + band)];
}

namespace {

// small banded matrix helper for level-chain powers
struct Band {
  int n = 0;
  int b = 0;
  std::vector<double> a;  // n rows, columns i-b .. i+b

  static Band zero(int n, int b) {
    Band m;
    m.n = n;
    m.b = b;
    m.a.assign(static_cast<std::size_t>(n) * (2 * b + 1), 0.0);
    return m;
  }
  double get(int i, int j) const {
    if (j < 0 || j >= n || std::abs(i - j) > b) return 0.0;
    return a[static_cast<std::size_t>(i) * (2 * b + 1) + static_cast<std::size_t>(j - i + b)];
  }
  void set(int i, int j, double v) {
    a[static_cast<std::size_t>(i) * (2 * b + 1) + static_cast<std::size_t>(j - i + b)] = v;
  }
};

Band band_mul(const Band& x, const Band& y) {
  Band out = Band::zero(x.n, x.b + y.b);
  for (int i = 0; i < x.n; ++i)
    for (int k = std::max(0, i - x.b); k <= std::min(x.n - 1, i + x.b); ++k) {
      double v = x.get(i, k);
      if (v == 0.0) continue;
      for (int j = std::max(0, k - y.b); j <= std::min(x.n - 1, k + y.b); ++j) {
        double w = y.get(k, j);
        if (w != 0.0) out.set(i, j, out.get(i, j) + v * w);
      }
    }
  return out;
}

// one-step level-chain of the simple walk on a sphere-transitive family
Band simple_level_band(const GraphOracle& g, int n) {
  Band m = Band::zero(n, 1);
  switch (g.family()) {
    case GraphFamily::RegularTree: {
      int q = g.tree_branching();
      m.set(0, 1, 1.0);
      for (int i = 1; i < n; ++i) {
        m.set(i, i - 1, 1.0 / (q + 1));
        if (i + 1 < n) m.set(i, i + 1, static_cast<double>(q) / (q + 1));
      }
      break;
    }
    case GraphFamily::HalfLine: {
      m.set(0, 1, 1.0);
      for (int i = 1; i < n; ++i) {
        m.set(i, i - 1, 0.5);
        if (i + 1 < n) m.set(i, i + 1, 0.5);
      }
      break;
    }
    case GraphFamily::FreeProductZ3Z3: {
      m.set(0, 1, 1.0);
      for (int i = 1; i < n; ++i) {
        m.set(i, i - 1, 0.25);
        m.set(i, i, 0.25);
        if (i + 1 < n) m.set(i, i + 1, 0.5);
      }
      break;
    }
    default: throw_config("level chain requires a sphere-transitive family");
  }
  return m;
}

}  // namespace

Kernel::RadialMatrix Kernel::radial_matrix(const GraphOracle& g, int R) const {
  if (!radial(g)) throw_config("kernel/graph pair has no Markov level chain");
  int range = certificates(g).range;
  int n = R + range + 1;  // extended so cropped entries are exact
  Band chain;
  switch (rule_) {
    case KernelRule::SimpleRw: chain = simple_level_band(g, n); break;
    case KernelRule::LazyRw: {
      chain = simple_level_band(g, n);
      for (auto& v : chain.a) v *= 1.0 - param_;
      for (int i = 0; i < n; ++i) chain.set(i, i, chain.get(i, i) + param_);
      break;
    }
    case KernelRule::TreeDrift: {
      chain = Band::zero(n, 1);
      chain.set(0, 1, 1.0);
      for (int i = 1; i < n; ++i) {
        chain.set(i, i - 1, 1.0 - param_);
        if (i + 1 < n) chain.set(i, i + 1, param_);
      }
      break;
    }
    case KernelRule::BoundedRangeMixture: {
      Band base = simple_level_band(g, n);
      Band power = base;
      Band acc = Band::zero(n, range);
      for (std::size_t j = 0; j < weights_.size(); ++j) {
        if (j > 0) power = band_mul(power, base);
        if (weights_[j] == 0.0) continue;
        for (int i = 0; i < n; ++i)
          for (int c = std::max(0, i - power.b); c <= std::min(n - 1, i + power.b); ++c)
            acc.set(i, c, acc.get(i, c) + weights_[j] * power.get(i, c));
      }
      chain = std::move(acc);
      break;
    }
  }

  RadialMatrix out;
  out.R = R;
  out.band = range;
  out.p.assign(static_cast<std::size_t>(R + 1) * (2 * range + 1), 0.0);
  for (int i = 0; i <= R; ++i)
    for (int j = std::max(0, i - range); j <= std::min(R, i + range); ++j)
      out.p[static_cast<std::size_t>(i) * (2 * range + 1) +
            static_cast<std::size_t>(j - i + range)] = chain.get(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// Walker

struct Walker::Impl {
  Impl(Kernel kk, GraphOracle gg) : k(std::move(kk)), g(std::move(gg)) {}

  Kernel k;
  GraphOracle g;
  GraphFamily fam = GraphFamily::RegularTree;
  int q = 0;
  int dim = 0;
  int range = 1;
  double hold = 0.0;
  double drift = 0.0;
  std::vector<double> cumw;

  std::vector<std::uint8_t> word;  // tree / free product
  std::vector<std::uint8_t> ref;   // start word
  std::uint32_t p_ref = 0;         // common prefix length with ref
  std::array<std::int64_t, 4> coord{};
  std::array<std::int64_t, 4> coord0{};
  std::uint64_t scalar = 0;  // half line position or explicit index
  std::uint64_t scalar0 = 0;
  std::vector<std::uint32_t> explicit_dist0;
  std::uint64_t level = 0;
  std::uint64_t latt_dist0 = 0;

  std::uint16_t last_len = 0;
  std::vector<std::uint8_t> last_moves;
  std::vector<std::uint8_t> window;  // scratch for word-tail snapshots

  std::uint64_t dist0() const {
    switch (fam) {
      case GraphFamily::RegularTree:
        return ref.size() + word.size() - 2ull * p_ref;
      case GraphFamily::FreeProductZ3Z3: {
        std::uint64_t d = (ref.size() - p_ref) + (word.size() - p_ref);
        if (p_ref < ref.size() && p_ref < word.size() && (ref[p_ref] >> 1) == (word[p_ref] >> 1))
          --d;
        return d;
      }
      case GraphFamily::Lattice: return latt_dist0;
      case GraphFamily::HalfLine:
        return scalar > scalar0 ? scalar - scalar0 : scalar0 - scalar;
      case GraphFamily::ExplicitFinite: return explicit_dist0[scalar];
    }
    return 0;
  }

  void word_pop() {
    word.pop_back();
    p_ref = std::min<std::uint32_t>(p_ref, static_cast<std::uint32_t>(word.size()));
  }
  void word_push(std::uint8_t c) {
    std::size_t pos = word.size();
    word.push_back(c);
    if (p_ref == pos && pos < ref.size() && ref[pos] == c) ++p_ref;
  }
  void word_replace_last(std::uint8_t c) {
    std::size_t pos = word.size() - 1;
    word.back() = c;
    if (p_ref > pos) p_ref = static_cast<std::uint32_t>(pos);
    if (p_ref == pos && pos < ref.size() && ref[pos] == c) ++p_ref;
  }

  void apply_sub_move(std::uint8_t mv) {
    switch (fam) {
      case GraphFamily::RegularTree: {
        if (mv == 0) {
          word_pop();
          --level;
        } else {
          word_push(static_cast<std::uint8_t>(mv - 1));
          ++level;
        }
        break;
      }
      case GraphFamily::HalfLine: {
        scalar += mv == 0 ? -1 : +1;
        level = scalar;
        break;
      }
      case GraphFamily::Lattice: {
        int i = mv >> 1;
        std::int64_t d = (mv & 1) ? -1 : +1;
        std::int64_t before = coord[i], after = before + d;
        level += static_cast<std::uint64_t>(std::llabs(after)) -
                 static_cast<std::uint64_t>(std::llabs(before));
        latt_dist0 += static_cast<std::uint64_t>(std::llabs(after - coord0[i])) -
                      static_cast<std::uint64_t>(std::llabs(before - coord0[i]));
        coord[i] = after;
        break;
      }
      case GraphFamily::FreeProductZ3Z3: {
        int cls = mv >> 1, ex = (mv & 1) + 1;
        if (!word.empty() && (word.back() >> 1) == cls) {
          int e = ((word.back() & 1) + 1 + ex) % 3;
          if (e == 0) {
            word_pop();
            --level;
          } else {
            word_replace_last(static_cast<std::uint8_t>(cls * 2 + (e - 1)));
          }
        } else {
          word_push(mv);
          ++level;
        }
        break;
      }
      case GraphFamily::ExplicitFinite: {
        scalar = g.explicit_adjacency()[scalar][mv];
        level = g.level(VertexId{scalar});
        break;
      }
    }
  }

  std::uint8_t sample_simple(RngStream& rng) {
    switch (fam) {
      case GraphFamily::RegularTree: {
        if (level == 0) return static_cast<std::uint8_t>(1 + rng.below(q + 1));
        std::uint64_t idx = rng.below(q + 1);
        return static_cast<std::uint8_t>(idx);  // 0 = up, 1..q = children
      }
      case GraphFamily::HalfLine:
        return level == 0 ? 1 : static_cast<std::uint8_t>(rng.below(2));
      case GraphFamily::Lattice: return static_cast<std::uint8_t>(rng.below(2 * dim));
      case GraphFamily::FreeProductZ3Z3: return static_cast<std::uint8_t>(rng.below(4));
      case GraphFamily::ExplicitFinite:
        return static_cast<std::uint8_t>(
            rng.below(g.explicit_adjacency()[scalar].size()));
    }
    return 0;
  }
};

Walker::Walker(const Kernel& k, const GraphOracle& g, VertexId start)
    : impl_(std::make_unique<Impl>(k, g)) {
  impl_->fam = g.family();
  impl_->range = k.certificates(g).range;
  if (impl_->fam == GraphFamily::RegularTree) impl_->q = g.tree_branching();
  if (impl_->fam == GraphFamily::Lattice) impl_->dim = g.lattice_dim();
  if (k.rule() == KernelRule::LazyRw) impl_->hold = k.param();
  if (k.rule() == KernelRule::TreeDrift) impl_->drift = k.param();
  if (k.rule() == KernelRule::BoundedRangeMixture) {
    double acc = 0.0;
    for (double w : k.step_weights()) impl_->cumw.push_back(acc += w);
    impl_->cumw.back() = 1.0;
  }

  switch (impl_->fam) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3:
      impl_->word = g.word_of(start);
      impl_->ref = impl_->word;
      impl_->p_ref = static_cast<std::uint32_t>(impl_->word.size());
      impl_->level = impl_->word.size();
      break;
    case GraphFamily::Lattice: {
      for (int i = 0; i < impl_->dim; ++i) {
        auto c = static_cast<std::int16_t>(static_cast<std::uint16_t>((start.v >> (16 * i)) & 0xFFFFu));
        impl_->coord[static_cast<std::size_t>(i)] = c;
        impl_->coord0[static_cast<std::size_t>(i)] = c;
        impl_->level += static_cast<std::uint64_t>(std::llabs(c));
      }
      break;
    }
    case GraphFamily::HalfLine:
      impl_->scalar = impl_->scalar0 = start.v;
      impl_->level = start.v;
      break;
    case GraphFamily::ExplicitFinite: {
      impl_->scalar = impl_->scalar0 = start.v;
      impl_->level = g.level(start);
      const auto& adj = g.explicit_adjacency();
      for (const auto& r : adj)
        if (r.size() > 254) throw_config("walker: explicit graph degree too large");
      impl_->explicit_dist0.assign(adj.size(), std::numeric_limits<std::uint32_t>::max());
      std::deque<std::uint32_t> dq{static_cast<std::uint32_t>(start.v)};
      impl_->explicit_dist0[start.v] = 0;
      while (!dq.empty()) {
        auto u = dq.front();
        dq.pop_front();
        for (auto w : adj[u])
          if (impl_->explicit_dist0[w] == std::numeric_limits<std::uint32_t>::max()) {
            impl_->explicit_dist0[w] = impl_->explicit_dist0[u] + 1;
            dq.push_back(w);
          }
      }
      break;
    }
  }
}

Walker::~Walker() = default;
Walker::Walker(Walker&&) noexcept = default;
Walker& Walker::operator=(Walker&&) noexcept = default;

void Walker::step(RngStream& rng) {
  Impl& s = *impl_;
  s.last_moves.clear();

  int sub_steps = 1;
  bool hold = false;
  switch (s.k.rule()) {
    case KernelRule::LazyRw: hold = rng.uniform01() < s.hold; break;
    case KernelRule::BoundedRangeMixture:
      sub_steps = static_cast<int>(rng.pick_cumulative(s.cumw)) + 1;
      break;
    default: break;
  }

  if (hold) {
    s.last_moves.push_back(kHoldMove);
    s.last_len = 0;
    return;
  }

  if (s.range == 1) {
    std::uint8_t mv;
    if (s.k.rule() == KernelRule::TreeDrift) {
      if (s.level == 0) {
        mv = static_cast<std::uint8_t>(1 + rng.below(s.q + 1));
      } else if (rng.uniform01() < 1.0 - s.drift) {
        mv = 0;
      } else {
        mv = static_cast<std::uint8_t>(1 + rng.below(s.q));
      }
    } else {
      mv = s.sample_simple(rng);
    }
    s.apply_sub_move(mv);
    s.last_moves.push_back(mv);
    s.last_len = 1;
    return;
  }

  // bounded-range mixture: snapshot enough trailing state to recover the net
  // displacement exactly
  std::uint64_t pre_level = s.level;
  std::size_t w0 = 0;
  switch (s.fam) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3:
      w0 = s.word.size() > static_cast<std::size_t>(s.range)
               ? s.word.size() - static_cast<std::size_t>(s.range)
               : 0;
      s.window.assign(s.word.begin() + static_cast<std::ptrdiff_t>(w0), s.word.end());
      break;
    case GraphFamily::Lattice: break;  // coord0-independent: snapshot coords
    default: break;
  }
  std::array<std::int64_t, 4> pre_coord = s.coord;
  std::uint64_t pre_scalar = s.scalar;

  for (int j = 0; j < sub_steps; ++j) {
    std::uint8_t mv = s.sample_simple(rng);
    s.apply_sub_move(mv);
    s.last_moves.push_back(mv);
  }

  switch (s.fam) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3: {
      std::size_t lmin = std::min<std::size_t>(pre_level, s.word.size());
      std::size_t prefix = lmin;
      for (std::size_t i = w0; i < lmin; ++i) {
        if (s.window[i - w0] != s.word[i]) {
          prefix = i;
          break;
        }
      }
      std::uint64_t d = (pre_level - prefix) + (s.word.size() - prefix);
      if (s.fam == GraphFamily::FreeProductZ3Z3 && prefix < pre_level &&
          prefix < s.word.size() && (s.window[prefix - w0] >> 1) == (s.word[prefix] >> 1))
        --d;
      s.last_len = static_cast<std::uint16_t>(d);
      break;
    }
    case GraphFamily::Lattice: {
      std::uint64_t d = 0;
      for (int i = 0; i < s.dim; ++i)
        d += static_cast<std::uint64_t>(
            std::llabs(s.coord[static_cast<std::size_t>(i)] - pre_coord[static_cast<std::size_t>(i)]));
      s.last_len = static_cast<std::uint16_t>(d);
      break;
    }
    case GraphFamily::HalfLine:
      s.last_len = static_cast<std::uint16_t>(
          s.scalar > pre_scalar ? s.scalar - pre_scalar : pre_scalar - s.scalar);
      break;
    case GraphFamily::ExplicitFinite:
      s.last_len = static_cast<std::uint16_t>(
          s.g.distance(VertexId{pre_scalar}, VertexId{s.scalar}, Limits{}));
      break;
  }
}

std::uint32_t Walker::level() const { return static_cast<std::uint32_t>(impl_->level); }
std::uint32_t Walker::dist_from_start() const { return static_cast<std::uint32_t>(impl_->dist0()); }
std::uint16_t Walker::last_step_length() const { return impl_->last_len; }

void Walker::last_moves(std::vector<std::uint8_t>& out) const {
  out.insert(out.end(), impl_->last_moves.begin(), impl_->last_moves.end());
}

const std::vector<std::uint8_t>& Walker::word() const { return impl_->word; }

std::optional<VertexId> Walker::vertex() const {
  const Impl& s = *impl_;
  switch (s.fam) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3:
      if (static_cast<int>(s.word.size()) > s.g.max_encodable_level()) return std::nullopt;
      return s.g.encode_word(s.word);
    case GraphFamily::Lattice: {
      std::uint64_t id = 0;
      for (int i = 0; i < s.dim; ++i) {
        std::int64_t c = s.coord[static_cast<std::size_t>(i)];
        if (c > 32767 || c < -32768) return std::nullopt;
        id |= static_cast<std::uint64_t>(static_cast<std::uint16_t>(static_cast<std::int16_t>(c)))
              << (16 * i);
      }
      return VertexId{id};
    }
    case GraphFamily::HalfLine:
    case GraphFamily::ExplicitFinite: return VertexId{s.scalar};
  }
  return std::nullopt;
}

std::string Walker::label() const {
  const Impl& s = *impl_;
  switch (s.fam) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3: {
      if (s.word.empty()) return "e";
      std::ostringstream os;
      for (std::size_t i = 0; i < s.word.size(); ++i) {
        if (i) os << '.';
        os << static_cast<int>(s.word[i]);
      }
      return os.str();
    }
    case GraphFamily::Lattice: {
      std::ostringstream os;
      for (int i = 0; i < s.dim; ++i) {
        if (i) os << ',';
        os << s.coord[static_cast<std::size_t>(i)];
      }
      return os.str();
    }
    default: return std::to_string(s.scalar);
  }
}

std::optional<std::uint8_t> Walker::cell() const {
  const Impl& s = *impl_;
  if (s.fam == GraphFamily::RegularTree || s.fam == GraphFamily::FreeProductZ3Z3) {
    if (s.word.empty()) return std::nullopt;
    return s.word[0];
  }
  return std::nullopt;
}

Trajectory sample_trajectory(const Kernel& k, const GraphOracle& g, VertexId start,
                             std::uint32_t steps, std::uint64_t seed, std::uint64_t stream) {
  Trajectory t(g);
  t.seed = seed;
  t.stream = stream;
  t.start = start;
  t.kernel_range = k.certificates(g).range;
  t.levels.reserve(steps + 1);
  t.step_lengths.reserve(steps);
  t.dist_from_start.reserve(steps + 1);
  t.moves.reserve(steps);
  if (t.kernel_range > 1) {
    t.move_offsets.reserve(steps + 1);
    t.move_offsets.push_back(0);
  }

  RngStream rng(seed, stream);
  Walker w(k, g, start);
  t.levels.push_back(w.level());
  t.dist_from_start.push_back(0);
  for (std::uint32_t i = 0; i < steps; ++i) {
    w.step(rng);
    t.levels.push_back(w.level());
    t.step_lengths.push_back(w.last_step_length());
    t.dist_from_start.push_back(w.dist_from_start());
    w.last_moves(t.moves);
    if (t.kernel_range > 1) t.move_offsets.push_back(static_cast<std::uint32_t>(t.moves.size()));
  }
  return t;
}

// ---------------------------------------------------------------------------
// ReplayCursor

struct ReplayCursor::Impl {
  const Trajectory* t;
  GraphFamily fam;
  std::uint32_t k = 0;
  std::vector<std::uint8_t> word;
  std::array<std::int64_t, 4> coord{};
  std::uint64_t scalar = 0;
  int dim = 0;

  void apply(std::uint8_t mv) {
    if (mv == kHoldMove) return;
    switch (fam) {
      case GraphFamily::RegularTree:
        if (mv == 0)
          word.pop_back();
        else
          word.push_back(static_cast<std::uint8_t>(mv - 1));
        break;
      case GraphFamily::FreeProductZ3Z3: {
        int cls = mv >> 1, ex = (mv & 1) + 1;
        if (!word.empty() && (word.back() >> 1) == cls) {
          int e = ((word.back() & 1) + 1 + ex) % 3;
          if (e == 0)
            word.pop_back();
          else
            word.back() = static_cast<std::uint8_t>(cls * 2 + (e - 1));
        } else {
          word.push_back(mv);
        }
        break;
      }
      case GraphFamily::Lattice: coord[mv >> 1] += (mv & 1) ? -1 : +1; break;
      case GraphFamily::HalfLine: scalar += mv == 0 ? -1 : +1; break;
      case GraphFamily::ExplicitFinite:
        scalar = t->graph.explicit_adjacency()[scalar][mv];
        break;
    }
  }
};

ReplayCursor::ReplayCursor(const Trajectory& t) : impl_(std::make_unique<Impl>()) {
  impl_->t = &t;
  impl_->fam = t.graph.family();
  switch (impl_->fam) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3: impl_->word = t.graph.word_of(t.start); break;
    case GraphFamily::Lattice: {
      impl_->dim = t.graph.lattice_dim();
      for (int i = 0; i < impl_->dim; ++i)
        impl_->coord[static_cast<std::size_t>(i)] = static_cast<std::int16_t>(
            static_cast<std::uint16_t>((t.start.v >> (16 * i)) & 0xFFFFu));
      break;
    }
    default: impl_->scalar = t.start.v; break;
  }
}

ReplayCursor::~ReplayCursor() = default;
ReplayCursor::ReplayCursor(ReplayCursor&&) noexcept = default;

std::uint32_t ReplayCursor::k() const { return impl_->k; }
std::uint32_t ReplayCursor::level() const { return impl_->t->levels[impl_->k]; }

void ReplayCursor::advance() {
  const Trajectory& t = *impl_->t;
  if (impl_->k >= t.steps()) throw_range("replay cursor advanced past the trajectory end");
  if (t.move_offsets.empty()) {
    impl_->apply(t.moves[impl_->k]);
  } else {
    for (std::uint32_t i = t.move_offsets[impl_->k]; i < t.move_offsets[impl_->k + 1]; ++i)
      impl_->apply(t.moves[i]);
  }
  ++impl_->k;
}

const std::vector<std::uint8_t>& ReplayCursor::word() const { return impl_->word; }

std::optional<VertexId> ReplayCursor::vertex() const {
  const Impl& s = *impl_;
  const GraphOracle& g = s.t->graph;
  switch (s.fam) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3:
      if (static_cast<int>(s.word.size()) > g.max_encodable_level()) return std::nullopt;
      return g.encode_word(s.word);
    case GraphFamily::Lattice: {
      std::uint64_t id = 0;
      for (int i = 0; i < s.dim; ++i) {
        std::int64_t c = s.coord[static_cast<std::size_t>(i)];
        if (c > 32767 || c < -32768) return std::nullopt;
        id |= static_cast<std::uint64_t>(static_cast<std::uint16_t>(static_cast<std::int16_t>(c)))
              << (16 * i);
      }
      return VertexId{id};
    }
    default: return VertexId{s.scalar};
  }
}

std::string ReplayCursor::label() const {
  const Impl& s = *impl_;
  switch (s.fam) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3: {
      if (s.word.empty()) return "e";
      std::ostringstream os;
      for (std::size_t i = 0; i < s.word.size(); ++i) {
        if (i) os << '.';
        os << static_cast<int>(s.word[i]);
      }
      return os.str();
    }
    case GraphFamily::Lattice: {
      std::ostringstream os;
      for (int i = 0; i < s.dim; ++i) {
        if (i) os << ',';
        os << s.coord[static_cast<std::size_t>(i)];
      }
      return os.str();
    }
    default: return std::to_string(s.scalar);
  }
}

// ---------------------------------------------------------------------------
// n-step matrices

NStepMatrices n_step_matrix(const Kernel& k, const GraphOracle& g, const BallGraph& ball, int n,
                            const Limits& lim) {
  if (n < 1) throw_config("n_step_matrix: n must be >= 1");
  std::size_t dim = ball.size();
  if (dim > 1024) throw_cap("n_step_matrix: ball too large for dense powers");
  std::size_t bytes = static_cast<std::size_t>(n + 1) * dim * dim * sizeof(double);
  if (bytes > (256ull << 20)) throw_cap("n_step_matrix: dense powers exceed the memory cap");
  (void)lim;

  NStepMatrices out;
  out.dim = dim;
  out.radius_warning = ball.radius < n * k.certificates(g).range;
  out.p.assign(static_cast<std::size_t>(n + 1), std::vector<double>(dim * dim, 0.0));

  std::vector<double> P(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    out.p[0][i * dim + i] = 1.0;
    for (auto& [w, pr] : k.row(g, ball.vertices[i]))
      if (auto j = ball.find(w)) P[i * dim + *j] = pr;
  }
  out.p[1] = P;

  using Mat = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using CMat =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  auto N = static_cast<Eigen::Index>(dim);
  for (int s = 2; s <= n; ++s) {
    Mat dst(out.p[static_cast<std::size_t>(s)].data(), N, N);
    CMat prev(out.p[static_cast<std::size_t>(s - 1)].data(), N, N);
    CMat base(P.data(), N, N);
    dst.noalias() = prev * base;
  }
  return out;
}

// ---------------------------------------------------------------------------
// step statistics

namespace {

std::vector<std::pair<std::string, VertexId>> orbit_representatives(const Kernel& k,
                                                                    const GraphOracle& g) {
  int range = k.certificates(g).range;
  std::vector<std::pair<std::string, VertexId>> reps;
  switch (g.family()) {
    case GraphFamily::RegularTree:
    case GraphFamily::HalfLine:
    case GraphFamily::FreeProductZ3Z3: {
      // sigma_v depends only on |v|; levels past the kernel range see no base
      if (2 * range > g.max_encodable_level())
        throw_cap("step_stats: kernel range too large for exact orbit rows");
      for (int L = 0; L <= range; ++L) {
        VertexId v{};
        if (g.family() == GraphFamily::HalfLine) {
          v = VertexId{static_cast<std::uint64_t>(L)};
        } else {
          std::vector<std::uint8_t> wseq;
          for (int i = 0; i < L; ++i)
            wseq.push_back(g.family() == GraphFamily::RegularTree
                               ? std::uint8_t{0}
                               : static_cast<std::uint8_t>((i % 2) * 2));
          v = g.encode_word(wseq);
        }
        reps.emplace_back("level_" + std::to_string(L), v);
      }
      break;
    }
    case GraphFamily::Lattice: reps.emplace_back("any", g.base()); break;
    case GraphFamily::ExplicitFinite: {
      if (g.vertex_count() > 4096) throw_cap("step_stats: explicit graph too large for per-vertex rows");
      for (std::uint64_t i = 0; i < g.vertex_count(); ++i)
        reps.emplace_back("v" + std::to_string(i), VertexId{i});
      break;
    }
  }
  return reps;
}

}  // namespace

StepStats step_stats(const Kernel& k, const GraphOracle& g, const StatsConfig& cfg) {
  if (cfg.trials == 0 || cfg.horizon < 8) throw_config("step_stats: need trials >= 1, horizon >= 8");
  StepStats st;
  auto cert = k.certificates(g);
  int range = cert.range;

  for (auto& [name, v] : orbit_representatives(k, g)) {
    std::vector<double> sigma(static_cast<std::size_t>(range) + 1, 0.0);
    for (auto& [w, pr] : k.row(g, v)) {
      auto d = g.distance(v, w, Limits{});
      if (d > static_cast<std::uint64_t>(range))
        throw_numeric("step_stats: kernel support exceeds its declared range");
      sigma[static_cast<std::size_t>(d)] += pr;
    }
    st.sigma.emplace_back(name, std::move(sigma));
  }

  st.phi.assign(static_cast<std::size_t>(range) + 2, 0.0);
  for (std::size_t l = 0; l <= static_cast<std::size_t>(range); ++l) {
    double sup = 0.0;
    for (auto& [name, sigma] : st.sigma) {
      double tail = 0.0;
      for (std::size_t j = l; j < sigma.size(); ++j) tail += sigma[j];
      sup = std::max(sup, tail);
    }
    st.phi[l] = sup;
  }
  for (std::size_t l = 1; l < st.phi.size(); ++l) st.m_bar += st.phi[l];

  // empirical speeds
  const std::uint32_t T = cfg.trials, H = cfg.horizon;
  const int checkpoints = 16;
  std::vector<double> end_speed(T);
  std::vector<std::array<double, 2 * checkpoints>> pools(T);
  parallel_for(T, cfg.threads, [&](std::size_t t) {
    RngStream rng(cfg.seed, t);
    Walker w(k, g, g.base());
    std::uint32_t next_cp = 3 * H / 4;
    std::uint32_t stride = std::max<std::uint32_t>(1, (H - next_cp) / checkpoints);
    int ci = 0;
    for (std::uint32_t n = 1; n <= H; ++n) {
      w.step(rng);
      if (n >= next_cp && ci < checkpoints) {
        pools[t][static_cast<std::size_t>(2 * ci)] = static_cast<double>(w.level()) / n;
        pools[t][static_cast<std::size_t>(2 * ci + 1)] =
            static_cast<double>(w.dist_from_start()) / n;
        ++ci;
        next_cp += stride;
      }
    }
    while (ci < checkpoints) {
      pools[t][static_cast<std::size_t>(2 * ci)] = static_cast<double>(w.level()) / H;
      pools[t][static_cast<std::size_t>(2 * ci + 1)] =
          static_cast<double>(w.dist_from_start()) / H;
      ++ci;
    }
    end_speed[t] = static_cast<double>(w.level()) / H;
  });

  double mean = std::accumulate(end_speed.begin(), end_speed.end(), 0.0) / T;
  double var = 0.0;
  for (double v : end_speed) var += (v - mean) * (v - mean);
  var = T > 1 ? var / (T - 1) : 0.0;
  st.speed_mean = mean;
  st.speed_ci_half = 1.96 * std::sqrt(var / T);

  std::vector<double> level_pool, dist_pool;
  level_pool.reserve(static_cast<std::size_t>(T) * checkpoints);
  dist_pool.reserve(static_cast<std::size_t>(T) * checkpoints);
  for (auto& arr : pools)
    for (int c = 0; c < checkpoints; ++c) {
      level_pool.push_back(arr[static_cast<std::size_t>(2 * c)]);
      dist_pool.push_back(arr[static_cast<std::size_t>(2 * c + 1)]);
    }
  std::sort(level_pool.begin(), level_pool.end());
  std::sort(dist_pool.begin(), dist_pool.end());
  auto pct = [](const std::vector<double>& v, double q) {
    std::size_t i = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1) + 0.5);
    return v[std::min(i, v.size() - 1)];
  };
  st.speed_lower = pct(level_pool, 0.01);
  st.speed_upper = pct(dist_pool, 0.99);
  st.trials = T;
  st.horizon = H;
  return st;
}

CertificateCheck verify_certificates(const Kernel& k, const GraphOracle& g, int sample_pairs,
                                     std::uint64_t seed) {
  if (sample_pairs < 1) throw_config("verify_certificates: need at least one sampled pair");
  CertificateCheck out;
  auto cert = k.certificates(g);
  out.irreducibility_min = std::numeric_limits<double>::infinity();

  RngStream rng(seed, 0xCE27);
  for (int i = 0; i < sample_pairs; ++i) {
    // wander a little to diversify the sampled vertex, staying shallow enough
    // for id-based arithmetic
    VertexId v = g.base();
    int hops = static_cast<int>(rng.below(24));
    for (int h = 0; h < hops; ++h) {
      auto nb = g.neighbors(v);
      v = nb[rng.below(nb.size())];
    }

    auto row = k.row(g, v);
    double sum = 0.0;
    for (auto& [w, p] : row) {
      sum += p;
      auto d = g.distance(v, w, Limits{});
      if (d > static_cast<std::uint64_t>(cert.range)) out.range_ok = false;
    }
    out.row_sum_max_err = std::max(out.row_sum_max_err, std::abs(sum - 1.0));

    auto nb = g.neighbors(v);
    VertexId w = nb[rng.below(nb.size())];
    double best = 0.0;
    for (int kappa = 1; kappa <= cert.K; ++kappa)
      best = std::max(best, k.kstep_prob(g, v, w, kappa));
    out.irreducibility_min = std::min(out.irreducibility_min, best);
    if (best + 1e-15 < cert.eps0) out.irreducibility_ok = false;

    if (cert.has_reversing_measure) {
      double mv = k.reversing_measure(g, v), mw = k.reversing_measure(g, w);
      double res = std::abs(mv * k.prob(g, v, w) - mw * k.prob(g, w, v));
      out.reversibility_max_residual = std::max(out.reversibility_max_residual, res);
      if (mv < cert.rev_lower - 1e-12 || mv > cert.rev_upper + 1e-12)
        out.reversing_bounds_ok = false;
    }
  }
  return out;
}

}  // namespace floydwalk
