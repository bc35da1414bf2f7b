#include "floydwalk/config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "floydwalk/boundary.hpp"
#include "floydwalk/error.hpp"

namespace floydwalk {

using json = nlohmann::json;

namespace {

void check_fields(const json& j, const std::string& ctx, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw_config(ctx + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = std::any_of(allowed.begin(), allowed.end(),
                             [&](const char* k) { return it.key() == k; });
    if (!known) throw_config(ctx + ": unknown field '" + it.key() + "'");
  }
}

double to_double(const json& v, const std::string& ctx) {
  if (!v.is_number()) throw_config(ctx + ": expected a number");
  return v.get<double>();
}

std::uint64_t to_u64(const json& v, const std::string& ctx) {
  if (!v.is_number_unsigned()) throw_config(ctx + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::uint32_t to_u32(const json& v, const std::string& ctx) {
  auto x = to_u64(v, ctx);
  if (x > 0xFFFFFFFFull) throw_config(ctx + ": value too large");
  return static_cast<std::uint32_t>(x);
}

int to_int(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) throw_config(ctx + ": expected an integer");
  auto x = v.get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw_config(ctx + ": value out of range");
  return static_cast<int>(x);
}

bool to_bool(const json& v, const std::string& ctx) {
  if (!v.is_boolean()) throw_config(ctx + ": expected a boolean");
  return v.get<bool>();
}

std::string to_str(const json& v, const std::string& ctx) {
  if (!v.is_string()) throw_config(ctx + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> to_double_vec(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw_config(ctx + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_double(v[i], ctx));
  return out;
}

std::vector<std::uint32_t> to_u32_vec(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw_config(ctx + ": expected an array of non-negative integers");
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_u32(v[i], ctx));
  return out;
}

std::vector<int> to_int_vec(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw_config(ctx + ": expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_int(v[i], ctx));
  return out;
}

const json* maybe(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

GraphFamily parse_graph_family(const std::string& s, const std::string& ctx) {
  if (s == "regular_tree") return GraphFamily::RegularTree;
  if (s == "lattice") return GraphFamily::Lattice;
  if (s == "half_line") return GraphFamily::HalfLine;
  if (s == "free_product") return GraphFamily::FreeProductZ3Z3;
  if (s == "explicit_finite") return GraphFamily::ExplicitFinite;
  throw_config(ctx + ": unknown graph family '" + s + "'");
}

KernelRule parse_kernel_rule(const std::string& s, const std::string& ctx) {
  if (s == "simple_rw") return KernelRule::SimpleRw;
  if (s == "lazy_rw") return KernelRule::LazyRw;
  if (s == "tree_drift") return KernelRule::TreeDrift;
  if (s == "bounded_range_mixture") return KernelRule::BoundedRangeMixture;
  throw_config(ctx + ": unknown kernel rule '" + s + "'");
}

FloydFamily parse_floyd_family(const std::string& s, const std::string& ctx) {
  if (s == "geometric") return FloydFamily::Geometric;
  if (s == "polynomial") return FloydFamily::Polynomial;
  if (s == "custom_table") return FloydFamily::CustomTable;
  if (s == "lemma1") return FloydFamily::GreenScaledTable;
  throw_config(ctx + ": unknown floyd family '" + s + "'");
}

}  // namespace

const char* graph_family_string(GraphFamily f) { return family_name(f); }
const char* kernel_rule_string(KernelRule r) { return kernel_rule_name(r); }

const char* floyd_family_string(FloydFamily f) {
  switch (f) {
    case FloydFamily::Geometric: return "geometric";
    case FloydFamily::Polynomial: return "polynomial";
    case FloydFamily::CustomTable: return "custom_table";
    case FloydFamily::GreenScaledTable: return "lemma1";
  }
  return "?";
}

GraphOracle GraphSpec::build() const {
  switch (family) {
    case GraphFamily::RegularTree: return GraphOracle::regular_tree(q);
    case GraphFamily::Lattice: return GraphOracle::lattice(dim);
    case GraphFamily::HalfLine: return GraphOracle::half_line();
    case GraphFamily::FreeProductZ3Z3: return GraphOracle::free_product_z3_z3();
    case GraphFamily::ExplicitFinite:
      return GraphOracle::explicit_finite(adjacency, static_cast<std::uint32_t>(base));
  }
  throw_config("graph spec: unknown family");
}

Kernel KernelSpec::build() const {
  switch (rule) {
    case KernelRule::SimpleRw: return Kernel::simple_rw();
    case KernelRule::LazyRw: return Kernel::lazy_rw(hold);
    case KernelRule::TreeDrift: return Kernel::tree_drift(outward);
    case KernelRule::BoundedRangeMixture: return Kernel::bounded_range_mixture(step_weights);
  }
  throw_config("kernel spec: unknown rule");
}

FloydFunction FloydSpec::build() const {
  switch (family) {
    case FloydFamily::Geometric: return FloydFunction::geometric(a);
    case FloydFamily::Polynomial: return FloydFunction::polynomial(s);
    case FloydFamily::CustomTable: return FloydFunction::custom_table(table, lambda);
    case FloydFamily::GreenScaledTable: {
      if (table_file.empty())
        throw_config(
            "floyd.table_file: the green-scaled family needs a table file here; build one with "
            "the lemma1 verb");
      return read_floyd_table(table_file).f;
    }
  }
  throw_config("floyd spec: unknown family");
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw_config(std::string("config: ") + e.what());
  }
  check_fields(j, "config",
               {"graph", "kernel", "floyd", "operation", "params", "seed", "out_dir", "threads"});

  ExperimentConfig c;
  if (auto* jg = maybe(j, "graph")) {
    check_fields(*jg, "config.graph", {"family", "q", "dim", "adjacency", "base"});
    if (auto* v = maybe(*jg, "family"))
      c.graph.family = parse_graph_family(to_str(*v, "config.graph.family"), "config.graph.family");
    if (auto* v = maybe(*jg, "q")) c.graph.q = to_int(*v, "config.graph.q");
    if (auto* v = maybe(*jg, "dim")) c.graph.dim = to_int(*v, "config.graph.dim");
    if (auto* v = maybe(*jg, "base")) c.graph.base = to_u64(*v, "config.graph.base");
    if (auto* v = maybe(*jg, "adjacency")) {
      if (!v->is_array()) throw_config("config.graph.adjacency: expected an array of arrays");
      for (std::size_t i = 0; i < v->size(); ++i)
        c.graph.adjacency.push_back(to_u32_vec((*v)[i], "config.graph.adjacency"));
    }
    if (c.graph.q < 2) throw_config("config.graph.q: must be >= 2");
    if (c.graph.dim < 1 || c.graph.dim > 4) throw_config("config.graph.dim: must be in 1..4");
    if (c.graph.family == GraphFamily::ExplicitFinite) {
      if (c.graph.adjacency.empty()) throw_config("config.graph.adjacency: required for explicit_finite");
      if (c.graph.base >= c.graph.adjacency.size())
        throw_config("config.graph.base: outside the adjacency list");
    }
  }

  if (auto* jk = maybe(j, "kernel")) {
    check_fields(*jk, "config.kernel", {"rule", "hold", "outward", "step_weights"});
    if (auto* v = maybe(*jk, "rule"))
      c.kernel.rule = parse_kernel_rule(to_str(*v, "config.kernel.rule"), "config.kernel.rule");
    if (auto* v = maybe(*jk, "hold")) c.kernel.hold = to_double(*v, "config.kernel.hold");
    if (auto* v = maybe(*jk, "outward")) c.kernel.outward = to_double(*v, "config.kernel.outward");
    if (auto* v = maybe(*jk, "step_weights"))
      c.kernel.step_weights = to_double_vec(*v, "config.kernel.step_weights");
    if (!(c.kernel.hold > 0.0 && c.kernel.hold < 1.0))
      throw_config("config.kernel.hold: must be in (0,1)");
    if (!(c.kernel.outward > 0.0 && c.kernel.outward < 1.0))
      throw_config("config.kernel.outward: must be in (0,1)");
    if (c.kernel.rule == KernelRule::BoundedRangeMixture) {
      if (c.kernel.step_weights.empty() || c.kernel.step_weights.size() > 16)
        throw_config("config.kernel.step_weights: need 1..16 weights");
    }
  }

  if (auto* jf = maybe(j, "floyd")) {
    check_fields(*jf, "config.floyd", {"family", "a", "s", "table", "lambda", "table_file", "n_max"});
    if (auto* v = maybe(*jf, "family"))
      c.floyd.family = parse_floyd_family(to_str(*v, "config.floyd.family"), "config.floyd.family");
    if (auto* v = maybe(*jf, "a")) c.floyd.a = to_double(*v, "config.floyd.a");
    if (auto* v = maybe(*jf, "s")) c.floyd.s = to_double(*v, "config.floyd.s");
    if (auto* v = maybe(*jf, "table")) c.floyd.table = to_double_vec(*v, "config.floyd.table");
    if (auto* v = maybe(*jf, "lambda")) c.floyd.lambda = to_double(*v, "config.floyd.lambda");
    if (auto* v = maybe(*jf, "table_file")) c.floyd.table_file = to_str(*v, "config.floyd.table_file");
    if (auto* v = maybe(*jf, "n_max")) c.floyd.n_max = to_int(*v, "config.floyd.n_max");
    if (!(c.floyd.a > 0.0 && c.floyd.a < 1.0)) throw_config("config.floyd.a: must be in (0,1)");
    if (!(c.floyd.s > 1.0)) throw_config("config.floyd.s: must be > 1");
    if (c.floyd.n_max < 2) throw_config("config.floyd.n_max: must be >= 2");
    if (c.floyd.family == FloydFamily::CustomTable) {
      if (c.floyd.table.empty()) throw_config("config.floyd.table: required for custom_table");
      if (!(c.floyd.lambda > 0.0 && c.floyd.lambda <= 1.0))
        throw_config("config.floyd.lambda: must be in (0,1]");
    }
  }

  if (auto* v = maybe(j, "operation")) c.operation = to_str(*v, "config.operation");

  if (auto* jp = maybe(j, "params")) {
    check_fields(*jp, "config.params",
                 {"radius", "trials", "steps", "paths", "horizon", "n_max", "pairs", "rho_radii",
                  "ray_levels", "r_list", "skeleton_trials", "event_trials", "event_levels",
                  "event_horizon", "mc_paths", "mc_horizon", "measured_tails", "speed_tail",
                  "speed_trials", "table_file"});
    auto& p = c.params;
    if (auto* v = maybe(*jp, "radius")) p.radius = to_int(*v, "config.params.radius");
    if (auto* v = maybe(*jp, "trials")) p.trials = to_u32(*v, "config.params.trials");
    if (auto* v = maybe(*jp, "steps")) p.steps = to_u32(*v, "config.params.steps");
    if (auto* v = maybe(*jp, "paths")) p.paths = to_u32(*v, "config.params.paths");
    if (auto* v = maybe(*jp, "horizon")) p.horizon = to_u32(*v, "config.params.horizon");
    if (auto* v = maybe(*jp, "n_max")) p.n_max = to_int(*v, "config.params.n_max");
    if (auto* v = maybe(*jp, "pairs")) p.pairs = to_u32(*v, "config.params.pairs");
    if (auto* v = maybe(*jp, "rho_radii")) p.rho_radii = to_int_vec(*v, "config.params.rho_radii");
    if (auto* v = maybe(*jp, "ray_levels")) p.ray_levels = to_u32_vec(*v, "config.params.ray_levels");
    if (auto* v = maybe(*jp, "r_list")) p.r_list = to_double_vec(*v, "config.params.r_list");
    if (auto* v = maybe(*jp, "skeleton_trials"))
      p.skeleton_trials = to_u32(*v, "config.params.skeleton_trials");
    if (auto* v = maybe(*jp, "event_trials")) p.event_trials = to_u32(*v, "config.params.event_trials");
    if (auto* v = maybe(*jp, "event_levels"))
      p.event_levels = to_u32_vec(*v, "config.params.event_levels");
    if (auto* v = maybe(*jp, "event_horizon"))
      p.event_horizon = to_u32(*v, "config.params.event_horizon");
    if (auto* v = maybe(*jp, "mc_paths")) p.mc_paths = to_u32(*v, "config.params.mc_paths");
    if (auto* v = maybe(*jp, "mc_horizon")) p.mc_horizon = to_u32(*v, "config.params.mc_horizon");
    if (auto* v = maybe(*jp, "measured_tails"))
      p.measured_tails = to_u32(*v, "config.params.measured_tails");
    if (auto* v = maybe(*jp, "speed_tail")) p.speed_tail = to_bool(*v, "config.params.speed_tail");
    if (auto* v = maybe(*jp, "speed_trials")) p.speed_trials = to_u32(*v, "config.params.speed_trials");
    if (auto* v = maybe(*jp, "table_file")) p.table_file = to_str(*v, "config.params.table_file");

    if (p.radius < 1) throw_config("config.params.radius: must be >= 1");
    if (p.trials < 1) throw_config("config.params.trials: must be >= 1");
    if (p.steps < 1) throw_config("config.params.steps: must be >= 1");
    if (p.paths < 1) throw_config("config.params.paths: must be >= 1");
    if (p.horizon < 1) throw_config("config.params.horizon: must be >= 1");
    if (p.n_max < 2) throw_config("config.params.n_max: must be >= 2");
    if (p.event_horizon < 1) throw_config("config.params.event_horizon: must be >= 1");
    if (p.mc_horizon < 1) throw_config("config.params.mc_horizon: must be >= 1");
    for (double r : p.r_list)
      if (!(r > 0.0)) throw_config("config.params.r_list: radii must be positive");
    for (int r : p.rho_radii)
      if (r < 1) throw_config("config.params.rho_radii: radii must be >= 1");
    if (p.ray_levels.empty()) throw_config("config.params.ray_levels: must not be empty");
    for (std::size_t i = 0; i + 1 < p.ray_levels.size(); ++i)
      if (p.ray_levels[i] >= p.ray_levels[i + 1])
        throw_config("config.params.ray_levels: must be strictly increasing");
    if (p.event_levels.empty()) throw_config("config.params.event_levels: must not be empty");
    for (std::size_t i = 0; i + 1 < p.event_levels.size(); ++i)
      if (p.event_levels[i] >= p.event_levels[i + 1])
        throw_config("config.params.event_levels: must be strictly increasing");
  }

  if (auto* v = maybe(j, "seed")) c.seed = to_u64(*v, "config.seed");
  if (auto* v = maybe(j, "out_dir")) c.out_dir = to_str(*v, "config.out_dir");
  if (auto* v = maybe(j, "threads")) c.threads = to_int(*v, "config.threads");
  if (c.out_dir.empty()) throw_config("config.out_dir: must not be empty");
  if (c.threads < 0) throw_config("config.threads: must be >= 0");
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  json j;
  j["graph"]["family"] = graph_family_string(c.graph.family);
  j["graph"]["q"] = c.graph.q;
  j["graph"]["dim"] = c.graph.dim;
  j["graph"]["adjacency"] = c.graph.adjacency;
  j["graph"]["base"] = c.graph.base;

  j["kernel"]["rule"] = kernel_rule_string(c.kernel.rule);
  j["kernel"]["hold"] = c.kernel.hold;
  j["kernel"]["outward"] = c.kernel.outward;
  j["kernel"]["step_weights"] = c.kernel.step_weights;

  j["floyd"]["family"] = floyd_family_string(c.floyd.family);
  j["floyd"]["a"] = c.floyd.a;
  j["floyd"]["s"] = c.floyd.s;
  j["floyd"]["table"] = c.floyd.table;
  j["floyd"]["lambda"] = c.floyd.lambda;
  j["floyd"]["table_file"] = c.floyd.table_file;
  j["floyd"]["n_max"] = c.floyd.n_max;

  j["operation"] = c.operation;

  auto& p = j["params"];
  p["radius"] = c.params.radius;
  p["trials"] = c.params.trials;
  p["steps"] = c.params.steps;
  p["paths"] = c.params.paths;
  p["horizon"] = c.params.horizon;
  p["n_max"] = c.params.n_max;
  p["pairs"] = c.params.pairs;
  p["rho_radii"] = c.params.rho_radii;
  p["ray_levels"] = c.params.ray_levels;
  p["r_list"] = c.params.r_list;
  p["skeleton_trials"] = c.params.skeleton_trials;
  p["event_trials"] = c.params.event_trials;
  p["event_levels"] = c.params.event_levels;
  p["event_horizon"] = c.params.event_horizon;
  p["mc_paths"] = c.params.mc_paths;
  p["mc_horizon"] = c.params.mc_horizon;
  p["measured_tails"] = c.params.measured_tails;
  p["speed_tail"] = c.params.speed_tail;
  p["speed_trials"] = c.params.speed_trials;
  p["table_file"] = c.params.table_file;

  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  std::string s = serialize_config(c);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash_hex(const ExperimentConfig& c) {
  std::uint64_t h = config_hash(c);
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

}  // namespace floydwalk
