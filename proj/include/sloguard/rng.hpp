#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace sloguard {

// Deterministic random source (splitmix64). All draws are hand-rolled so
// streams are stable across standard libraries and platforms; replay and
// resume guarantees depend on that.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Unbiased integer in [0, n).
  uint64_t below(uint64_t n) {
    const uint64_t threshold = -n % n;
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  bool coin() { return (next() >> 63) != 0; }

  // Box-Muller without a cached spare: exactly two raw draws per call.
  double normal() {
    double u1 = u01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Normal clipped to +/- clip_sigmas, scaled by sd.
  double truncated_normal(double sd, double clip_sigmas = 3.0) {
    return std::clamp(normal(), -clip_sigmas, clip_sigmas) * sd;
  }

 private:
  uint64_t state_;
};

namespace rng_stream {
inline constexpr uint64_t kPropose = 0x70726f706f736531ULL;
inline constexpr uint64_t kSimulate = 0x73696d756c617465ULL;
inline constexpr uint64_t kObserve = 0x6f62736572766531ULL;
}  // namespace rng_stream

// Child seed for one (study seed, trial index, stream) triple. Trials draw
// from independent children so replay does not depend on how many draws any
// strategy consumed earlier in the study.
inline uint64_t child_seed(uint64_t study_seed, uint64_t trial_index, uint64_t stream) {
  auto mix = [](uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  uint64_t h = mix(study_seed + 0x9e3779b97f4a7c15ULL);
  h = mix(h ^ (trial_index * 0xff51afd7ed558ccdULL));
  h = mix(h ^ (stream * 0xc4ceb9fe1a85ec53ULL));
  return h;
}

}  // namespace sloguard
