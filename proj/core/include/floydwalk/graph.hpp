#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace floydwalk {

/// Opaque 64-bit vertex handle. For each graph family the packing is
/// canonical, injective and stable across runs: trees use layered word
/// arithmetic over child indices, lattices pack signed 16-bit coordinates,
/// the half line is the integer itself, the free-product preset packs the
/// reduced syllable word, explicit graphs use the adjacency index. Deep tree
/// vertices (beyond `max_encodable_level`) are not representable; encoding
/// such a vertex raises a Range error instead of aliasing silently.
struct VertexId {
  std::uint64_t v = 0;
  auto operator<=>(const VertexId&) const = default;
  bool operator==(const VertexId&) const = default;
};

enum class GraphFamily {
  RegularTree,      // (q+1)-regular tree, q >= 2
  Lattice,          // Z^d with 2d neighbours, 1 <= d <= 4
  HalfLine,         // 0 - 1 - 2 - ...
  FreeProductZ3Z3,  // Cayley graph of Z3 * Z3, generators {a, a^2, b, b^2}
  ExplicitFinite,   // user-supplied adjacency list
};

const char* family_name(GraphFamily f);

struct Limits {
  std::uint64_t max_ball_vertices = 2'000'000;
  std::uint64_t max_bfs_vertices = 2'000'000;
  std::uint64_t max_dense_dim = 200'000;      // direct sparse factorization cutoff
  std::uint64_t max_subset_visits = 4'000'000;  // isoperimetric enumeration guard
};

/// Ball B_R(center): vertices in BFS discovery order (deterministic since
/// neighbour order is), CSR adjacency over internal edges, and the number of
/// edges leaving the ball per vertex (kept, not silently dropped; they carry
/// the absorption mass of truncated operators).
struct BallGraph {
  VertexId center;
  int radius = 0;
  std::vector<VertexId> vertices;               // [0] == center
  std::vector<std::uint32_t> level;             // |v| relative to center
  std::vector<std::uint32_t> row_ptr;           // CSR, size vertices+1
  std::vector<std::uint32_t> col;
  std::vector<std::uint32_t> exit_degree;       // boundary-flagged edges
  std::vector<std::vector<std::uint32_t>> sphere;  // local indices per level

  std::uint32_t index_of(VertexId w) const;     // Range error when absent
  std::optional<std::uint32_t> find(VertexId w) const;
  std::size_t size() const { return vertices.size(); }

  std::unordered_map<std::uint64_t, std::uint32_t> index;
};

/// Result of locating a minimal-|.| vertex m on a concrete geodesic from v to
/// w. `max_level_on_path` bounds the ball radius needed to contain the
/// geodesic; `gromov` is the product (|v|+|w|-d(v,w))/2, always <= m_level.
struct NearestPointReport {
  VertexId m;
  std::uint32_t m_level = 0;
  std::uint64_t distance = 0;
  double gromov = 0.0;
  std::uint32_t max_level_on_path = 0;
};

/// Immutable, cheaply copyable description of one locally finite graph with a
/// distinguished base vertex e. All geometry (levels, distances, geodesics)
/// is exact: closed forms where the family admits them, bounded BFS otherwise.
class GraphOracle {
 public:
  static GraphOracle regular_tree(int q);  // branching number q >= 2, degree q+1
  static GraphOracle lattice(int dim);
  static GraphOracle half_line();
  static GraphOracle free_product_z3_z3();
  static GraphOracle explicit_finite(std::vector<std::vector<std::uint32_t>> adjacency,
                                     std::uint32_t base_index);

  GraphFamily family() const;
  VertexId base() const;
  std::string describe() const;

  int degree(VertexId v) const;
  int max_degree() const;
  bool vertex_transitive() const;
  bool bipartite() const;
  /// number of vertices for explicit graphs, 0 for the infinite families
  std::uint64_t vertex_count() const;

  /// Deterministically ordered neighbour list (trees: parent first, then
  /// children by index; lattices: +x1,-x1,+x2,...; free product: a,a2,b,b2).
  std::vector<VertexId> neighbors(VertexId v) const;

  std::uint32_t level(VertexId v) const;           // |v| = d(e, v)
  std::uint64_t distance(VertexId v, VertexId w, const Limits& lim = {}) const;
  NearestPointReport geodesic_nearest_point(VertexId v, VertexId w,
                                            const Limits& lim = {}) const;
  /// (|v| + |w| - d(v,w)) / 2, a value in half-integers >= 0
  double gromov_product(VertexId v, VertexId w, const Limits& lim = {}) const;

  /// canonical printable encoding ("0.2.1" tree word, "3,-2" coordinates, ...)
  std::string label(VertexId v) const;

  std::uint64_t ball_size_hint(int radius) const;  // saturating estimate
  int max_encodable_level() const;

  // family parameters (Range error when queried on the wrong family)
  int tree_branching() const;   // q
  int lattice_dim() const;
  std::int32_t lattice_coordinate(VertexId v, int axis) const;
  const std::vector<std::vector<std::uint32_t>>& explicit_adjacency() const;

  // tree/free-product word access used by walkers and labels
  std::vector<std::uint8_t> word_of(VertexId v) const;
  VertexId encode_word(const std::vector<std::uint8_t>& word) const;

  struct Impl;
  const Impl& impl() const { return *impl_; }

 private:
  explicit GraphOracle(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

BallGraph build_ball(const GraphOracle& g, VertexId center, int radius,
                     const Limits& lim = {});

/// Plain-text edge list: a `#`-comment header with the construction
/// parameters, internal edges as "u v" (u < v, local indices), then per-vertex
/// boundary-edge counts as "exit u count".
std::string export_edge_list(const GraphOracle& g, const BallGraph& ball);

}  // namespace floydwalk
