#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "trustsim/error.hpp"

namespace trustsim {

/// splitmix64 finalizer; used to derive substream keys.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// A keyed random stream. Substreams are derived from the key alone, never
/// from the engine state, so the draws of one named field do not depend on
/// how many draws another field consumed.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : key_(key), engine_(mix64(key)) {}

  std::uint64_t key() const noexcept { return key_; }

  RandomStream substream(std::uint64_t tag) const {
    return RandomStream(mix64(key_ ^ mix64(tag + 0x632be59bd9b4e019ULL)));
  }
  RandomStream substream(std::string_view name) const { return substream(hash_name(name)); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps this unbiased and portable.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  double normal();

  /// Index drawn proportionally to non-negative weights. Weights must not all be 0.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw Error(ErrorKind::InvalidConfig, "categorical weights sum to zero");
    const double target = uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last_positive = i;
      if (target < acc) return i;
    }
    return last_positive;
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace trustsim

#include "trustsim/stats.hpp"

namespace trustsim {

inline double RandomStream::normal() { return normal_quantile(uniform()); }

}  // namespace trustsim
