#pragma once

#include <cmath>
#include <cstdint>

namespace joinsample {

// Deterministic counter-based generator (splitmix64 sequence). Every random
// decision in a run derives from the query seed through fixed fork labels,
// so identical (data, seed) pairs reproduce bit-identical samples on any
// platform with IEEE doubles.
class CounterRng {
 public:
  explicit CounterRng(uint64_t seed = 0) : seed_(seed) {}

  uint64_t next_u64() {
    uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * ++counter_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1].
  double next_unit_positive() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard exponential variate.
  double next_exp() { return -std::log(next_unit_positive()); }

  // Independent stream identified by a label; forking does not advance this
  // generator.
  CounterRng fork(uint64_t label) const {
    uint64_t z = seed_ ^ (0xD1B54A32D192ED03ULL * (label + 0x632BE59BD9B4E019ULL));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return CounterRng(z ^ (z >> 31));
  }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

}  // namespace joinsample
