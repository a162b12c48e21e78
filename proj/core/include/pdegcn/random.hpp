#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pdegcn {

/// Seedable generator with portable draws. Each concern (parameter init,
/// dropout, data splits, test fixtures) owns its own instance so that
/// enabling one never perturbs the stream of another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal draw (Box-Muller, no cached second value).
  double normal();

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent seed for a named concern from a run seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view concern);

}  // namespace pdegcn
