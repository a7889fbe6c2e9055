#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "gpmu/errors.hpp"

namespace gpmu::rng {

inline std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Deterministic stream keyed by (seed, name). Forking derives a child key
// from the parent key alone, so children are stable no matter how many
// values the parent has produced. All output is platform-independent.
class Stream {
 public:
  Stream(std::uint64_t seed, std::string_view name)
      : Stream(derive(seed, fnv1a(name))) {}

  Stream fork(std::string_view name) const {
    return Stream(derive(key_, fnv1a(name)));
  }

  Stream fork(std::uint64_t index) const {
    return Stream(derive(key_, 0x6a09e667f3bcc909ull ^ index));
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (no cached spare, for stable forking).
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ContractError("rng below(0)");
    return next_u64() % n;
  }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ContractError("rng range: hi < lo");
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

 private:
  explicit Stream(std::uint64_t key) : key_(key), state_(key) {}

  static std::uint64_t derive(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t s = base ^ (salt * 0x9e3779b97f4a7c15ull);
    // one mixing round so adjacent salts land far apart
    return splitmix64(s);
  }

  std::uint64_t key_;
  std::uint64_t state_;
};

}  // namespace gpmu::rng
