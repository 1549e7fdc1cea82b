#pragma once

#include <cstdint>

namespace ddro {

/// splitmix64 stream. Every draw primitive consumes exactly one 64-bit output,
/// so sequences are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Integer in [a, b] (both inclusive), by multiply-high range reduction.
  std::int64_t uniform_int(std::int64_t a, std::int64_t b) {
    const auto span = static_cast<unsigned __int128>(static_cast<std::uint64_t>(b - a)) + 1;
    const auto hi = static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * span) >> 64);
    return a + static_cast<std::int64_t>(hi);
  }

  /// Real in [a, b) from the top 53 bits of one output.
  double uniform_real(double a, double b) {
    const double unit = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return a + (b - a) * unit;
  }

 private:
  std::uint64_t state_;
};

}  // namespace ddro
