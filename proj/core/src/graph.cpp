#include "floydwalk/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "floydwalk/error.hpp"

namespace floydwalk {

namespace {

constexpr std::uint64_t kU64Max = std::numeric_limits<std::uint64_t>::max();

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return a > kU64Max - b ? kU64Max : a + b;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > kU64Max / b) return kU64Max;
  return a * b;
}

std::int16_t unpack16(std::uint64_t v, int i) {
  return static_cast<std::int16_t>(static_cast<std::uint16_t>((v >> (16 * i)) & 0xFFFFu));
}

std::uint64_t pack16(std::int64_t c, int i) {
  return static_cast<std::uint64_t>(static_cast<std::uint16_t>(static_cast<std::int16_t>(c)))
         << (16 * i);
}

}  // namespace

const char* family_name(GraphFamily f) {
  switch (f) {
    case GraphFamily::RegularTree: return "regular_tree";
    case GraphFamily::Lattice: return "lattice";
    case GraphFamily::HalfLine: return "half_line";
    case GraphFamily::FreeProductZ3Z3: return "free_product";
    case GraphFamily::ExplicitFinite: return "explicit_finite";
  }
  return "?";
}

struct GraphOracle::Impl {
  GraphFamily family;
  int q = 0;    // tree branching
  int dim = 0;  // lattice dimension

  // layered offsets: offsets[L] = number of vertices with level < L, so a
  // level-L vertex has id offsets[L] + rank. Built for tree / free product.
  std::vector<std::uint64_t> offsets;
  int max_level = 0;

  // explicit graphs
  std::vector<std::vector<std::uint32_t>> adj;
  std::uint32_t base_index = 0;
  std::vector<std::uint32_t> explicit_level;
  bool explicit_bipartite = false;
  int explicit_max_degree = 0;

  // ----- regular tree helpers ------------------------------------------------
  // level-L ranks are words c1 c2 .. cL with c1 in [0,q], c_i in [0,q-1].

  std::pair<int, std::uint64_t> tree_decode(std::uint64_t id) const {
    auto it = std::upper_bound(offsets.begin(), offsets.end(), id);
    int L = static_cast<int>(it - offsets.begin()) - 1;
    return {L, id - offsets[static_cast<std::size_t>(L)]};
  }

  std::uint64_t tree_encode(int L, std::uint64_t rank) const {
    return offsets[static_cast<std::size_t>(L)] + rank;
  }

  static std::pair<int, std::uint64_t> tree_parent(int L, std::uint64_t rank, int q) {
    if (L <= 1) return {0, 0};
    return {L - 1, rank / static_cast<std::uint64_t>(q)};
  }

  // ----- free product helpers ------------------------------------------------
  // letters 0=a, 1=a^2, 2=b, 3=b^2; class = letter>>1, exponent = (letter&1)+1.
  // level-L ranks: first letter in [0,3], each further syllable contributes one
  // bit (its exponent), the class being forced to alternate.

  std::vector<std::uint8_t> fp_word(std::uint64_t id) const {
    auto it = std::upper_bound(offsets.begin(), offsets.end(), id);
    int L = static_cast<int>(it - offsets.begin()) - 1;
    std::uint64_t rank = id - offsets[static_cast<std::size_t>(L)];
    std::vector<std::uint8_t> w(static_cast<std::size_t>(L));
    if (L == 0) return w;
    std::uint64_t head = rank >> (L - 1);
    w[0] = static_cast<std::uint8_t>(head);
    int cls = w[0] >> 1;
    for (int i = 1; i < L; ++i) {
      cls ^= 1;
      int bit = static_cast<int>((rank >> (L - 1 - i)) & 1u);
      w[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(cls * 2 + bit);
    }
    return w;
  }

  std::uint64_t fp_encode(const std::vector<std::uint8_t>& w) const {
    int L = static_cast<int>(w.size());
    if (L > max_level) throw_range("free product word deeper than encodable range");
    if (L == 0) return 0;
    std::uint64_t rank = static_cast<std::uint64_t>(w[0]) << (L - 1);
    for (int i = 1; i < L; ++i)
      rank |= static_cast<std::uint64_t>(w[static_cast<std::size_t>(i)] & 1u) << (L - 1 - i);
    return offsets[static_cast<std::size_t>(L)] + rank;
  }
};

GraphOracle GraphOracle::regular_tree(int q) {
  if (q < 2) throw_config("regular_tree: branching q must be >= 2");
  auto impl = std::make_shared<Impl>();
  impl->family = GraphFamily::RegularTree;
  impl->q = q;
  impl->offsets.push_back(0);
  impl->offsets.push_back(1);
  // sphere sizes (q+1) q^{L-1}; stop before the id space overflows
  std::uint64_t sphere = static_cast<std::uint64_t>(q) + 1;
  while (true) {
    std::uint64_t next = sat_add(impl->offsets.back(), sphere);
    if (next == kU64Max) break;
    impl->offsets.push_back(next);
    sphere = sat_mul(sphere, static_cast<std::uint64_t>(q));
    if (sphere == kU64Max) break;
  }
  impl->max_level = static_cast<int>(impl->offsets.size()) - 2;
  return GraphOracle(std::move(impl));
}

GraphOracle GraphOracle::lattice(int dim) {
  if (dim < 1 || dim > 4) throw_config("lattice: dim must be in [1,4]");
  auto impl = std::make_shared<Impl>();
  impl->family = GraphFamily::Lattice;
  impl->dim = dim;
  impl->max_level = 4 * 32767;
  return GraphOracle(std::move(impl));
}

GraphOracle GraphOracle::half_line() {
  auto impl = std::make_shared<Impl>();
  impl->family = GraphFamily::HalfLine;
  impl->max_level = std::numeric_limits<int>::max() - 1;
  return GraphOracle(std::move(impl));
}

GraphOracle GraphOracle::free_product_z3_z3() {
  auto impl = std::make_shared<Impl>();
  impl->family = GraphFamily::FreeProductZ3Z3;
  impl->offsets.push_back(0);
  impl->offsets.push_back(1);
  std::uint64_t sphere = 4;  // 4 * 2^{L-1}
  while (true) {
    std::uint64_t next = sat_add(impl->offsets.back(), sphere);
    if (next == kU64Max) break;
    impl->offsets.push_back(next);
    sphere = sat_mul(sphere, 2);
    if (sphere == kU64Max) break;
  }
  impl->max_level = static_cast<int>(impl->offsets.size()) - 2;
  return GraphOracle(std::move(impl));
}

GraphOracle GraphOracle::explicit_finite(std::vector<std::vector<std::uint32_t>> adjacency,
                                         std::uint32_t base_index) {
  auto n = adjacency.size();
  if (n == 0) throw_config("explicit_finite: empty adjacency");
  if (base_index >= n) throw_config("explicit_finite: base index out of range");
  for (std::size_t v = 0; v < n; ++v) {
    for (auto w : adjacency[v]) {
      if (w >= n) throw_config("explicit_finite: neighbour index out of range");
      if (w == v) throw_config("explicit_finite: self loops are not supported");
      auto& back = adjacency[w];
      if (std::find(back.begin(), back.end(), static_cast<std::uint32_t>(v)) == back.end())
        throw_config("explicit_finite: adjacency must be symmetric");
    }
    auto sorted = adjacency[v];
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw_config("explicit_finite: duplicate edges");
  }

  auto impl = std::make_shared<Impl>();
  impl->family = GraphFamily::ExplicitFinite;
  impl->adj = std::move(adjacency);
  impl->base_index = base_index;
  impl->max_level = static_cast<int>(n);

  // BFS levels from base + 2-colorability; the graph must be connected
  impl->explicit_level.assign(n, std::numeric_limits<std::uint32_t>::max());
  std::vector<int> color(n, -1);
  std::deque<std::uint32_t> dq{base_index};
  impl->explicit_level[base_index] = 0;
  color[base_index] = 0;
  bool bip = true;
  std::size_t seen = 1;
  while (!dq.empty()) {
    auto v = dq.front();
    dq.pop_front();
    for (auto w : impl->adj[v]) {
      if (impl->explicit_level[w] == std::numeric_limits<std::uint32_t>::max()) {
        impl->explicit_level[w] = impl->explicit_level[v] + 1;
        color[w] = color[v] ^ 1;
        dq.push_back(w);
        ++seen;
      } else if (color[w] == color[v]) {
        bip = false;
      }
    }
  }
  if (seen != n) throw_config("explicit_finite: graph must be connected");
  impl->explicit_bipartite = bip;
  for (auto& row : impl->adj)
    impl->explicit_max_degree = std::max(impl->explicit_max_degree, static_cast<int>(row.size()));
  return GraphOracle(std::move(impl));
}

GraphFamily GraphOracle::family() const { return impl_->family; }

VertexId GraphOracle::base() const {
  if (impl_->family == GraphFamily::ExplicitFinite) return VertexId{impl_->base_index};
  return VertexId{0};
}

std::string GraphOracle::describe() const {
  std::ostringstream os;
  os << family_name(impl_->family);
  switch (impl_->family) {
    case GraphFamily::RegularTree: os << "(q=" << impl_->q << ")"; break;
    case GraphFamily::Lattice: os << "(d=" << impl_->dim << ")"; break;
    case GraphFamily::ExplicitFinite: os << "(n=" << impl_->adj.size() << ")"; break;
    default: break;
  }
  return os.str();
}

int GraphOracle::max_degree() const {
  switch (impl_->family) {
    case GraphFamily::RegularTree: return impl_->q + 1;
    case GraphFamily::Lattice: return 2 * impl_->dim;
    case GraphFamily::HalfLine: return 2;
    case GraphFamily::FreeProductZ3Z3: return 4;
    case GraphFamily::ExplicitFinite: return impl_->explicit_max_degree;
  }
  return 0;
}

int GraphOracle::degree(VertexId v) const {
  switch (impl_->family) {
    case GraphFamily::RegularTree: return impl_->q + 1;
    case GraphFamily::Lattice: return 2 * impl_->dim;
    case GraphFamily::HalfLine: return v.v == 0 ? 1 : 2;
    case GraphFamily::FreeProductZ3Z3: return 4;
    case GraphFamily::ExplicitFinite: {
      if (v.v >= impl_->adj.size()) throw_range("vertex id out of range");
      return static_cast<int>(impl_->adj[static_cast<std::size_t>(v.v)].size());
    }
  }
  return 0;
}

bool GraphOracle::vertex_transitive() const {
  switch (impl_->family) {
    case GraphFamily::RegularTree:
    case GraphFamily::Lattice:
    case GraphFamily::FreeProductZ3Z3: return true;
    default: return false;
  }
}

bool GraphOracle::bipartite() const {
  switch (impl_->family) {
    case GraphFamily::RegularTree:
    case GraphFamily::Lattice:
    case GraphFamily::HalfLine: return true;
    case GraphFamily::FreeProductZ3Z3: return false;  // triangles
    case GraphFamily::ExplicitFinite: return impl_->explicit_bipartite;
  }
  return false;
}

std::uint64_t GraphOracle::vertex_count() const {
  return impl_->family == GraphFamily::ExplicitFinite ? impl_->adj.size() : 0;
}

std::vector<VertexId> GraphOracle::neighbors(VertexId v) const {
  std::vector<VertexId> out;
  switch (impl_->family) {
    case GraphFamily::RegularTree: {
      auto [L, rank] = impl_->tree_decode(v.v);
      if (L > 0) {
        auto [pl, pr] = Impl::tree_parent(L, rank, impl_->q);
        out.push_back(VertexId{impl_->tree_encode(pl, pr)});
      }
      int kids = L == 0 ? impl_->q + 1 : impl_->q;
      if (L + 1 > impl_->max_level)
        throw_range("regular_tree: neighbour level exceeds encodable range");
      for (int c = 0; c < kids; ++c)
        out.push_back(VertexId{impl_->tree_encode(
            L + 1, rank * static_cast<std::uint64_t>(impl_->q) + static_cast<std::uint64_t>(c))});
      break;
    }
    case GraphFamily::Lattice: {
      for (int i = 0; i < impl_->dim; ++i) {
        for (int s : {+1, -1}) {
          std::int64_t c = unpack16(v.v, i);
          c += s;
          if (c > 32767 || c < -32768) throw_range("lattice: coordinate exceeds packed range");
          std::uint64_t id = v.v & ~(0xFFFFull << (16 * i));
          id |= pack16(c, i);
          out.push_back(VertexId{id});
        }
      }
      break;
    }
    case GraphFamily::HalfLine: {
      if (v.v > 0) out.push_back(VertexId{v.v - 1});
      out.push_back(VertexId{v.v + 1});
      break;
    }
    case GraphFamily::FreeProductZ3Z3: {
      auto w = impl_->fp_word(v.v);
      for (std::uint8_t g = 0; g < 4; ++g) {
        int cls = g >> 1, ex = (g & 1) + 1;
        auto u = w;
        if (!u.empty() && (u.back() >> 1) == cls) {
          int e = ((u.back() & 1) + 1 + ex) % 3;
          if (e == 0)
            u.pop_back();
          else
            u.back() = static_cast<std::uint8_t>(cls * 2 + (e - 1));
        } else {
          u.push_back(g);
        }
        out.push_back(VertexId{impl_->fp_encode(u)});
      }
      break;
    }
    case GraphFamily::ExplicitFinite: {
      if (v.v >= impl_->adj.size()) throw_range("vertex id out of range");
      for (auto w : impl_->adj[static_cast<std::size_t>(v.v)]) out.push_back(VertexId{w});
      break;
    }
  }
  return out;
}

std::uint32_t GraphOracle::level(VertexId v) const {
  switch (impl_->family) {
    case GraphFamily::RegularTree: return static_cast<std::uint32_t>(impl_->tree_decode(v.v).first);
    case GraphFamily::Lattice: {
      std::uint32_t s = 0;
      for (int i = 0; i < impl_->dim; ++i) s += static_cast<std::uint32_t>(std::abs(unpack16(v.v, i)));
      return s;
    }
    case GraphFamily::HalfLine: return static_cast<std::uint32_t>(v.v);
    case GraphFamily::FreeProductZ3Z3: {
      auto it = std::upper_bound(impl_->offsets.begin(), impl_->offsets.end(), v.v);
      return static_cast<std::uint32_t>(it - impl_->offsets.begin()) - 1;
    }
    case GraphFamily::ExplicitFinite: {
      if (v.v >= impl_->explicit_level.size()) throw_range("vertex id out of range");
      return impl_->explicit_level[static_cast<std::size_t>(v.v)];
    }
  }
  return 0;
}

namespace {

// BFS from v until w is reached. For lattices, expansion is restricted to the
// geodesic diamond (d(v,x) + |x-w|_1 == |v-w|_1) which keeps the frontier
// polynomial in the distance. Returns dist map; path reconstruction picks the
// smallest-id predecessor, which makes the geodesic deterministic.
struct BfsResult {
  std::unordered_map<std::uint64_t, std::uint32_t> dist;
  bool found = false;
};

BfsResult bfs_to_target(const GraphOracle& g, VertexId v, VertexId w, const Limits& lim) {
  BfsResult r;
  const bool lattice = g.family() == GraphFamily::Lattice;
  auto l1_to_w = [&](VertexId x) {
    std::uint64_t s = 0;
    for (int i = 0; i < g.lattice_dim(); ++i)
      s += static_cast<std::uint64_t>(
          std::abs(static_cast<std::int32_t>(unpack16(x.v, i)) - unpack16(w.v, i)));
    return s;
  };
  std::uint64_t total = lattice ? l1_to_w(v) : 0;
  std::deque<VertexId> dq{v};
  r.dist[v.v] = 0;
  while (!dq.empty()) {
    VertexId x = dq.front();
    dq.pop_front();
    if (x == w) {
      r.found = true;
      return r;
    }
    std::uint32_t dx = r.dist[x.v];
    for (VertexId u : g.neighbors(x)) {
      if (r.dist.count(u.v)) continue;
      if (lattice && dx + 1 + l1_to_w(u) != total) continue;
      if (r.dist.size() >= lim.max_bfs_vertices)
        throw_cap("bfs: exploration cap exceeded before reaching target");
      r.dist[u.v] = dx + 1;
      dq.push_back(u);
    }
  }
  return r;
}

std::vector<VertexId> reconstruct_path(const GraphOracle& g, const BfsResult& r, VertexId v,
                                       VertexId w) {
  std::vector<VertexId> rev{w};
  VertexId cur = w;
  std::uint32_t d = r.dist.at(w.v);
  while (d > 0) {
    VertexId best{};
    bool have = false;
    for (VertexId u : g.neighbors(cur)) {
      auto it = r.dist.find(u.v);
      if (it != r.dist.end() && it->second == d - 1 && (!have || u.v < best.v)) {
        best = u;
        have = true;
      }
    }
    cur = best;
    rev.push_back(cur);
    --d;
  }
  std::reverse(rev.begin(), rev.end());
  (void)v;
  return rev;
}

}  // namespace

std::uint64_t GraphOracle::distance(VertexId v, VertexId w, const Limits& lim) const {
  switch (impl_->family) {
    case GraphFamily::RegularTree: {
      auto [L1, r1] = impl_->tree_decode(v.v);
      auto [L2, r2] = impl_->tree_decode(w.v);
      int l1 = L1, l2 = L2;
      std::uint64_t a = r1, b = r2;
      while (l1 > l2) std::tie(l1, a) = Impl::tree_parent(l1, a, impl_->q);
      while (l2 > l1) std::tie(l2, b) = Impl::tree_parent(l2, b, impl_->q);
      while (a != b) {
        std::tie(l1, a) = Impl::tree_parent(l1, a, impl_->q);
        std::tie(l2, b) = Impl::tree_parent(l2, b, impl_->q);
      }
      return static_cast<std::uint64_t>(L1 - l1) + static_cast<std::uint64_t>(L2 - l2);
    }
    case GraphFamily::Lattice: {
      std::uint64_t s = 0;
      for (int i = 0; i < impl_->dim; ++i)
        s += static_cast<std::uint64_t>(
            std::abs(static_cast<std::int32_t>(unpack16(v.v, i)) - unpack16(w.v, i)));
      return s;
    }
    case GraphFamily::HalfLine: return v.v > w.v ? v.v - w.v : w.v - v.v;
    case GraphFamily::FreeProductZ3Z3: {
      auto a = impl_->fp_word(v.v);
      auto b = impl_->fp_word(w.v);
      std::size_t p = 0;
      while (p < a.size() && p < b.size() && a[p] == b[p]) ++p;
      std::uint64_t d = (a.size() - p) + (b.size() - p);
      if (p < a.size() && p < b.size() && (a[p] >> 1) == (b[p] >> 1)) --d;  // syllable merge
      return d;
    }
    case GraphFamily::ExplicitFinite: {
      auto r = bfs_to_target(*this, v, w, lim);
      if (!r.found) throw_cap("distance: target not reached");
      return r.dist.at(w.v);
    }
  }
  return 0;
}

NearestPointReport GraphOracle::geodesic_nearest_point(VertexId v, VertexId w,
                                                       const Limits& lim) const {
  NearestPointReport rep;
  std::uint32_t lv = level(v), lw = level(w);
  switch (impl_->family) {
    case GraphFamily::RegularTree: {
      auto [L1, r1] = impl_->tree_decode(v.v);
      auto [L2, r2] = impl_->tree_decode(w.v);
      int l1 = L1, l2 = L2;
      std::uint64_t a = r1, b = r2;
      while (l1 > l2) std::tie(l1, a) = Impl::tree_parent(l1, a, impl_->q);
      while (l2 > l1) std::tie(l2, b) = Impl::tree_parent(l2, b, impl_->q);
      while (a != b) {
        std::tie(l1, a) = Impl::tree_parent(l1, a, impl_->q);
        std::tie(l2, b) = Impl::tree_parent(l2, b, impl_->q);
      }
      rep.m = VertexId{impl_->tree_encode(l1, a)};
      rep.m_level = static_cast<std::uint32_t>(l1);
      rep.distance = static_cast<std::uint64_t>(L1 - l1) + static_cast<std::uint64_t>(L2 - l1);
      break;
    }
    case GraphFamily::HalfLine: {
      rep.m = v.v < w.v ? v : w;
      rep.m_level = std::min(lv, lw);
      rep.distance = distance(v, w, lim);
      break;
    }
    case GraphFamily::FreeProductZ3Z3: {
      auto a = impl_->fp_word(v.v);
      auto b = impl_->fp_word(w.v);
      std::size_t p = 0;
      while (p < a.size() && p < b.size() && a[p] == b[p]) ++p;
      bool merge = p < a.size() && p < b.size() && (a[p] >> 1) == (b[p] >> 1);
      rep.distance = (a.size() - p) + (b.size() - p) - (merge ? 1 : 0);
      // the canonical geodesic descends v -> prefix (or one syllable above it
      // when the first differing syllables share a class) and ascends to w
      std::vector<std::uint8_t> mw(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(p));
      if (merge) mw.push_back(a[p]);
      rep.m = VertexId{impl_->fp_encode(mw)};
      rep.m_level = static_cast<std::uint32_t>(mw.size());
      break;
    }
    case GraphFamily::Lattice:
    case GraphFamily::ExplicitFinite: {
      auto r = bfs_to_target(*this, v, w, lim);
      if (!r.found) throw_cap("geodesic: target not reached");
      auto path = reconstruct_path(*this, r, v, w);
      rep.distance = path.size() - 1;
      std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
      std::uint32_t maxl = 0;
      for (VertexId x : path) {
        std::uint32_t lx = level(x);
        maxl = std::max(maxl, lx);
        if (lx < best) {
          best = lx;
          rep.m = x;
        }
      }
      rep.m_level = best;
      rep.max_level_on_path = maxl;
      rep.gromov = (static_cast<double>(lv) + lw - static_cast<double>(rep.distance)) / 2.0;
      return rep;
    }
  }
  rep.max_level_on_path = std::max(lv, lw);
  rep.gromov = (static_cast<double>(lv) + lw - static_cast<double>(rep.distance)) / 2.0;
  return rep;
}

double GraphOracle::gromov_product(VertexId v, VertexId w, const Limits& lim) const {
  return (static_cast<double>(level(v)) + level(w) - static_cast<double>(distance(v, w, lim))) /
         2.0;
}

std::string GraphOracle::label(VertexId v) const {
  switch (impl_->family) {
    case GraphFamily::RegularTree:
    case GraphFamily::FreeProductZ3Z3: {
      auto w = word_of(v);
      if (w.empty()) return "e";
      std::ostringstream os;
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) os << '.';
        os << static_cast<int>(w[i]);
      }
      return os.str();
    }
    case GraphFamily::Lattice: {
      std::ostringstream os;
      for (int i = 0; i < impl_->dim; ++i) {
        if (i) os << ',';
        os << unpack16(v.v, i);
      }
      return os.str();
    }
    case GraphFamily::HalfLine:
    case GraphFamily::ExplicitFinite: return std::to_string(v.v);
  }
  return {};
}

std::uint64_t GraphOracle::ball_size_hint(int radius) const {
  if (radius < 0) return 0;
  auto R = static_cast<std::uint64_t>(radius);
  switch (impl_->family) {
    case GraphFamily::RegularTree: {
      std::size_t L = std::min<std::size_t>(static_cast<std::size_t>(radius) + 1,
                                            impl_->offsets.size() - 1);
      return radius >= static_cast<int>(impl_->offsets.size()) - 1 ? kU64Max : impl_->offsets[L];
    }
    case GraphFamily::Lattice: {
      // sum_k 2^k C(d,k) C(R,k)
      std::uint64_t total = 0;
      for (int k = 0; k <= impl_->dim; ++k) {
        std::uint64_t term = 1;
        for (int i = 0; i < k; ++i) {
          term = sat_mul(term, 2 * (static_cast<std::uint64_t>(impl_->dim) - i) * (R - i));
          term /= static_cast<std::uint64_t>(i + 1) * static_cast<std::uint64_t>(i + 1);
        }
        if (k > static_cast<int>(R) || k > impl_->dim) term = 0;
        total = sat_add(total, term);
      }
      return total;
    }
    case GraphFamily::HalfLine: return R + 1;
    case GraphFamily::FreeProductZ3Z3: {
      std::size_t L = std::min<std::size_t>(static_cast<std::size_t>(radius) + 1,
                                            impl_->offsets.size() - 1);
      return radius >= static_cast<int>(impl_->offsets.size()) - 1 ? kU64Max : impl_->offsets[L];
    }
    case GraphFamily::ExplicitFinite: return impl_->adj.size();
  }
  return 0;
}

int GraphOracle::max_encodable_level() const { return impl_->max_level; }

int GraphOracle::tree_branching() const {
  if (impl_->family != GraphFamily::RegularTree) throw_range("not a regular tree");
  return impl_->q;
}

int GraphOracle::lattice_dim() const {
  if (impl_->family != GraphFamily::Lattice) throw_range("not a lattice");
  return impl_->dim;
}

std::int32_t GraphOracle::lattice_coordinate(VertexId v, int axis) const {
  if (impl_->family != GraphFamily::Lattice) throw_range("not a lattice");
  if (axis < 0 || axis >= impl_->dim) throw_range("lattice axis out of range");
  return unpack16(v.v, axis);
}

const std::vector<std::vector<std::uint32_t>>& GraphOracle::explicit_adjacency() const {
  if (impl_->family != GraphFamily::ExplicitFinite) throw_range("not an explicit graph");
  return impl_->adj;
}

std::vector<std::uint8_t> GraphOracle::word_of(VertexId v) const {
  switch (impl_->family) {
    case GraphFamily::RegularTree: {
      auto [L, rank] = impl_->tree_decode(v.v);
      std::vector<std::uint8_t> w(static_cast<std::size_t>(L));
      std::uint64_t r = rank;
      for (int i = L - 1; i >= 1; --i) {
        w[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(r % impl_->q);
        r /= static_cast<std::uint64_t>(impl_->q);
      }
      if (L >= 1) w[0] = static_cast<std::uint8_t>(r);
      return w;
    }
    case GraphFamily::FreeProductZ3Z3: return impl_->fp_word(v.v);
    default: throw_range("word_of: family has no word encoding");
  }
}

VertexId GraphOracle::encode_word(const std::vector<std::uint8_t>& word) const {
  switch (impl_->family) {
    case GraphFamily::RegularTree: {
      int L = static_cast<int>(word.size());
      if (L > impl_->max_level) throw_range("regular_tree: word deeper than encodable range");
      std::uint64_t rank = 0;
      for (int i = 0; i < L; ++i) {
        int digit = word[static_cast<std::size_t>(i)];
        if (digit > (i == 0 ? impl_->q : impl_->q - 1))
          throw_config("regular_tree: word digit out of range");
        rank = rank * static_cast<std::uint64_t>(i == 0 ? 1 : impl_->q) +
               static_cast<std::uint64_t>(digit);
      }
      return VertexId{impl_->tree_encode(L, rank)};
    }
    case GraphFamily::FreeProductZ3Z3: {
      for (std::size_t i = 0; i < word.size(); ++i) {
        if (word[i] > 3) throw_config("free product: letter out of range");
        if (i > 0 && (word[i] >> 1) == (word[i - 1] >> 1))
          throw_config("free product: word is not in normal form");
      }
      return VertexId{impl_->fp_encode(word)};
    }
    default: throw_range("encode_word: family has no word encoding");
  }
}

std::uint32_t BallGraph::index_of(VertexId w) const {
  auto it = index.find(w.v);
  if (it == index.end()) throw_range("vertex not inside ball");
  return it->second;
}

std::optional<std::uint32_t> BallGraph::find(VertexId w) const {
  auto it = index.find(w.v);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

BallGraph build_ball(const GraphOracle& g, VertexId center, int radius, const Limits& lim) {
  if (radius < 0) throw_config("build_ball: radius must be >= 0");
  std::uint64_t hint = g.ball_size_hint(radius);
  if (hint > lim.max_ball_vertices)
    throw_cap("build_ball: predicted ball size " + std::to_string(hint) + " exceeds cap " +
              std::to_string(lim.max_ball_vertices));

  BallGraph b;
  b.center = center;
  b.radius = radius;
  b.index.reserve(static_cast<std::size_t>(hint) * 2);
  b.vertices.push_back(center);
  b.level.push_back(0);
  b.index.emplace(center.v, 0);
  for (std::uint32_t head = 0; head < b.vertices.size(); ++head) {
    if (b.level[head] >= static_cast<std::uint32_t>(radius)) continue;
    for (VertexId u : g.neighbors(b.vertices[head])) {
      if (b.index.count(u.v)) continue;
      if (b.vertices.size() >= lim.max_ball_vertices)
        throw_cap("build_ball: ball vertex cap exceeded");
      b.index.emplace(u.v, static_cast<std::uint32_t>(b.vertices.size()));
      b.vertices.push_back(u);
      b.level.push_back(b.level[head] + 1);
    }
  }

  std::size_t n = b.vertices.size();
  b.row_ptr.assign(n + 1, 0);
  b.exit_degree.assign(n, 0);
  std::vector<std::vector<std::uint32_t>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (VertexId u : g.neighbors(b.vertices[i])) {
      auto it = b.index.find(u.v);
      if (it == b.index.end())
        ++b.exit_degree[i];
      else
        rows[i].push_back(it->second);
    }
  }
  for (std::size_t i = 0; i < n; ++i) b.row_ptr[i + 1] = b.row_ptr[i] + static_cast<std::uint32_t>(rows[i].size());
  b.col.reserve(b.row_ptr[n]);
  for (auto& r : rows) b.col.insert(b.col.end(), r.begin(), r.end());

  std::uint32_t maxlev = 0;
  for (auto l : b.level) maxlev = std::max(maxlev, l);
  b.sphere.assign(maxlev + 1, {});
  for (std::size_t i = 0; i < n; ++i) b.sphere[b.level[i]].push_back(static_cast<std::uint32_t>(i));
  return b;
}

std::string export_edge_list(const GraphOracle& g, const BallGraph& ball) {
  std::ostringstream os;
  std::size_t internal = 0;
  for (std::size_t i = 0; i < ball.size(); ++i)
    for (std::uint32_t k = ball.row_ptr[i]; k < ball.row_ptr[i + 1]; ++k)
      if (ball.col[k] > i) ++internal;
  os << "# ball edge list\n";
  os << "# family=" << g.describe() << " center=" << g.label(ball.center)
     << " radius=" << ball.radius << " vertices=" << ball.size()
     << " internal_edges=" << internal << "\n";
  os << "# columns: u v (local indices, u<v); trailing section: exit u count\n";
  for (std::size_t i = 0; i < ball.size(); ++i)
    for (std::uint32_t k = ball.row_ptr[i]; k < ball.row_ptr[i + 1]; ++k)
      if (ball.col[k] > i) os << i << ' ' << ball.col[k] << '\n';
  for (std::size_t i = 0; i < ball.size(); ++i)
    if (ball.exit_degree[i] > 0) os << "exit " << i << ' ' << ball.exit_degree[i] << '\n';
  return os.str();
}

}  // namespace floydwalk
