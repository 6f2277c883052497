#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

namespace advtok {

// Distinguishes independent substreams drawn from the same (seed, example,
// iteration, r) key so that, e.g., site draws never alias replacement draws.
enum class StreamPhase : std::uint64_t {
  kSites = 1,
  kReplacements = 2,
  kInit = 3,
  kPostSample = 4,
  kShuffle = 5,
  kWeights = 6,
  kData = 7,
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t example = 0;
  std::uint64_t iteration = 0;
  std::uint64_t draw = 0;  // sampling round r
  StreamPhase phase = StreamPhase::kSites;
};

// Counter-based deterministic generator (SplitMix64 over a mixed stream key).
// All draws are derived from integer state only, so identical keys reproduce
// identical streams bit-for-bit on any platform.
class CounterRng {
 public:
  explicit CounterRng(const StreamKey& key) {
    std::uint64_t h = key.seed;
    h = mix(h + kGolden * (key.example + 1));
    h = mix(h + kGolden * (key.iteration + 1));
    h = mix(h + kGolden * (key.draw + 1));
    h = mix(h + kGolden * (static_cast<std::uint64_t>(key.phase) + 1));
    state_ = h;
  }

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  /// Uniform double in [0, 1), 53 bits of mantissa.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double next_range(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  bool bernoulli(double p) { return next_unit() < p; }

  /// Draws an index with probability weights[i] / sum(weights).
  /// Rejects non-positive total mass.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) {
      throw std::invalid_argument("categorical draw over non-positive mass");
    }
    const double v = next_unit() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      cum += weights[i];
      if (v < cum) return i;
    }
    return weights.size() - 1;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace advtok
