#pragma once

// Portable deterministic random numbers.
//
// The standard <random> distributions are implementation-defined, so two
// standard libraries can turn the same engine output into different normals.
// Everything here is specified down to the bit:
//
//   engine   xoshiro256** (Blackman & Vigna), state seeded either from a
//            32-byte digest or by four SplitMix64 outputs of a 64-bit seed
//   uniform  (next() >> 11) * 2^-53, in [0, 1)
//   normal   Marsaglia polar method, spare value cached
//   gamma    Marsaglia-Tsang squeeze; shape < 1 boosted by U^(1/shape)
//   chi_n    sqrt(Gamma(n/2, scale 2))
//
// Sub-streams are derived from a master seed and an index path with
// `derive_seed`, so results never depend on scheduling or worker count.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>

namespace lsteg {

/// SplitMix64 finalizer applied to `x + golden`, advancing `x`.
std::uint64_t splitmix64(std::uint64_t& x) noexcept;

/// Mixes an index path into a master seed. Order matters.
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path) noexcept;

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;
  /// Seeds the full 256-bit state from a digest (little-endian words).
  explicit Rng(std::span<const std::uint8_t, 32> digest) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept;
  double uniform() noexcept;
  double normal() noexcept;
  double gamma(double shape, double scale) noexcept;
  double chi(std::uint64_t dof) noexcept;
  /// Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lsteg
