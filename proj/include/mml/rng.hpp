#pragma once

#include <cmath>
#include <cstdint>

namespace mml {

//! Counter-based splittable random stream (SplitMix64 core).
//!
//! Streams are cheap value types. Independent substreams are derived by
//! hashing a (master seed, index) pair, so parallel Monte Carlo trials draw
//! from disjoint streams and results do not depend on scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  //! Stream for one trial, derived from a master seed and the trial index.
  static Rng for_trial(std::uint64_t master_seed, std::uint64_t index) {
    return Rng(mix(master_seed ^ mix(index * kGamma + 0x632BE59BD9B4E019ULL)));
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  //! Uniform double in the open interval (0,1).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  //! Standard normal deviate (Box-Muller, one spare cached).
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = kTwoPi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  //! Fair sign in {-1,+1}.
  int next_sign() { return (next_u64() >> 63) ? -1 : 1; }

  //! Bernoulli(p) draw.
  bool next_bernoulli(double p) { return next_unit() < p; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mml
