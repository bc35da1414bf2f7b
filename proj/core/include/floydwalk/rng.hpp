#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace floydwalk {

// splitmix64 step, used to expand (root seed, stream index) into independent
// generator seeds. Fixed constants from the reference implementation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// One reproducible random stream. The generator is std::mt19937_64, whose
// algorithm is pinned by the standard, and all derived draws below avoid
// std::*_distribution so that byte-level reproducibility does not depend on
// library internals. Stream i of root seed s is seeded with
// splitmix64(s ^ golden*(i+1)) iterated twice.
class RngStream {
 public:
  RngStream(std::uint64_t root_seed, std::uint64_t stream_index) {
    std::uint64_t st = root_seed ^ (0x9E3779B97F4A7C15ULL * (stream_index + 1));
    std::uint64_t a = splitmix64(st);
    std::uint64_t b = splitmix64(st);
    gen_.seed(a ^ (b << 1));
  }

  std::uint64_t raw() { return gen_(); }

  // uniform in [0,1) with 53 random bits
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n); n > 0. Multiply-shift map; bias is O(n/2^64).
  std::uint64_t below(std::uint64_t n) {
    using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(gen_()) * n) >> 64);
  }

  // index into a cumulative weight table (strictly increasing, back() ~ 1)
  std::size_t pick_cumulative(const std::vector<double>& cum) {
    double u = uniform01() * cum.back();
    std::size_t lo = 0, hi = cum.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (cum[mid] > u) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace floydwalk
