#pragma once

// Deterministic PRNG for fault schedules, invoice ids and workload
// generation. splitmix64 is fully specified, so seeded runs reproduce
// bit-for-bit across platforms; <random> distributions are
// implementation-defined and would break byte-identical reports.

#include <cstdint>

namespace parsec {

// Exact probability as a fraction, evaluated with integer arithmetic only.
struct Rational {
  std::uint32_t num = 0;
  std::uint32_t den = 1;

  bool is_zero() const { return num == 0; }
  bool operator==(const Rational&) const = default;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). Rejection sampling keeps it exactly uniform.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % n;
  }

  // Uniform in [lo, hi], inclusive.
  std::uint64_t range(std::uint64_t lo, std::uint64_t hi) {
    return lo + below(hi - lo + 1);
  }

  bool chance(const Rational& p) {
    if (p.num == 0) return false;
    if (p.num >= p.den) return true;
    return below(p.den) < p.num;
  }

 private:
  std::uint64_t state_;
};

}  // namespace parsec
