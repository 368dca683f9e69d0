#pragma once

#include <cstdint>
#include <random>

namespace qphase {

// Deterministic splittable random stream. A child stream derived with
// split(key) depends only on (root seed, key), never on how many draws the
// parent has produced, so independent consumers can be re-seeded stably.
// All primitives are fully specified (mt19937_64 + explicit bit mappings);
// sequences are reproducible across platforms.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  RngStream split(std::uint64_t key) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits() { return eng_(); }

  // uniform in [0, 1), 53-bit resolution
  double uniform();

  // standard normal via Box-Muller (one cached spare)
  double normal();

  // uniform in [lo, hi)
  double uniform(double lo, double hi);

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

}  // namespace qphase
