#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace ppl {

// Deterministic counter-style RNG built on splitmix64. Streams are derived
// by hashing a master seed with a purpose tag, integer coordinates, and an
// optional address string, so independent consumers (baseline vs factored
// LMH, naive vs iterative SMC) can draw identical values for the same
// (step, address) no matter in which order they ask.
class Rng {
public:
  explicit Rng(uint64_t seed) : s_(seed) {}

  static uint64_t hash_str(std::string_view s, uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1);
    x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27; x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

  static Rng keyed(uint64_t master, std::string_view purpose, uint64_t a = 0,
                   uint64_t b = 0, std::string_view addr = {}) {
    uint64_t h = mix(master, hash_str(purpose));
    h = mix(h, a);
    h = mix(h, b);
    if (!addr.empty()) h = mix(h, hash_str(addr));
    return Rng(h);
  }

  uint64_t next_u64() {
    s_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = s_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1) — safe for log().
  double next_open() {
    double u;
    do { u = next_double(); } while (u <= 0.0);
    return u;
  }

  // Standard normal via Box-Muller (no caching; two uniforms per draw,
  // so the stream position is deterministic).
  double next_normal() {
    double u1 = next_open();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

private:
  uint64_t s_;
};

// Kahan-compensated accumulator for log-density sums. Identical sequences
// of add() calls produce bit-identical (sum, c) states, which the SMC
// naive-vs-iterative equality and the LMH 1e-12 acceptance check rely on.
struct LogAccum {
  double sum = 0.0;
  double c = 0.0;

  void add(double x) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
  void reset() { sum = 0.0; c = 0.0; }
};

}  // namespace ppl
