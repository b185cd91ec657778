#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sspg {

/// SplitMix64 generator, fixed as "sspg-splitmix64-v1".
///
/// Every trace in this library is a pure function of the 64-bit seed fed to
/// this generator, so its output sequence is frozen: changing the mixing
/// constants or the derived-draw formulas below requires bumping kVersion.
class Rng {
 public:
  static constexpr const char* kName = "sspg-splitmix64";
  static constexpr int kVersion = 1;

  constexpr explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  constexpr std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Independent child stream; the parent state is not advanced.
  constexpr Rng split(std::uint64_t stream) const {
    return Rng(mix(state_ ^ mix(stream + 0x632be59bd9b4e019ULL)));
  }

  /// Integer in [0, bound) by multiply-shift range reduction (no rejection).
  constexpr std::uint64_t below(std::uint64_t bound) {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(next()) * bound;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Standard normal draw (Box-Muller, one value per call).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t state() const { return state_; }
  constexpr bool operator==(const Rng&) const = default;

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace sspg
