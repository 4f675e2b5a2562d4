#ifndef SPPDM_RNG_HPP
#define SPPDM_RNG_HPP

#include <cmath>
#include <cstdint>

namespace sppdm {

// Counter-based pseudo-random numbers.  Every draw is a pure function of a
// 64-bit key, so any consumer (solver, simulator, replay oracle) that knows
// the key reproduces the exact same stream without sharing mutable state.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Mixes up to four words into one well-scrambled key.
inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b = 0,
                             std::uint64_t c = 0, std::uint64_t d = 0) {
  std::uint64_t h = detail::splitmix64(a);
  h = detail::splitmix64(h ^ b);
  h = detail::splitmix64(h ^ c);
  h = detail::splitmix64(h ^ d);
  return h;
}

// Sequential generator seeded from a key.  Satisfies
// UniformRandomBitGenerator but the distributions below are hand-rolled so
// streams are bit-identical regardless of the standard library.
class Prng {
 public:
  using result_type = std::uint64_t;

  explicit Prng(std::uint64_t key) : state_(detail::splitmix64(key)) {}
  Prng(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b = 0,
       std::uint64_t stream_c = 0)
      : state_(mix_key(seed, stream_a, stream_b, stream_c)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; two uniforms per draw, no cached state.
  double gaussian() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n).  Modulo bias is negligible for n << 2^64.
  std::uint64_t below(std::uint64_t n) { return (*this)() % n; }

 private:
  std::uint64_t state_;
};

// Identifies the mini-batch stream of one agent at one iteration.  Sample
// slot j of the batch maps to a fixed key, which is what lets the matrix
// solver, the message-passing simulator and the primal-dual replay oracle
// consume identical draws.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t agent = 0;
  std::uint64_t iteration = 0;

  std::uint64_t draw(std::uint64_t slot) const {
    return mix_key(seed, agent, iteration, slot);
  }
};

}  // namespace sppdm

#endif  // SPPDM_RNG_HPP
