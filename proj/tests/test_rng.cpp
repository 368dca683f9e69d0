#include <cmath>
#include <vector>

#include "doctest.h"
#include "qphase/rng.hpp"

using namespace qphase;

TEST_SUITE("rng") {

TEST_CASE("same seed gives the same sequence") {
  RngStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.bits() == b.bits());
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
}

TEST_CASE("different seeds differ") {
  RngStream a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.bits() == b.bits();
  CHECK(same == 0);
}

TEST_CASE("split child is independent of parent draw count") {
  RngStream a(7);
  RngStream c1 = a.split(3);
  for (int i = 0; i < 100; ++i) a.uniform();
  RngStream c2 = a.split(3);
  for (int i = 0; i < 100; ++i) CHECK(c1.bits() == c2.bits());
}

TEST_CASE("split children with different keys differ") {
  RngStream a(7);
  RngStream c1 = a.split(1), c2 = a.split(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += c1.bits() == c2.bits();
  CHECK(same == 0);
}

TEST_CASE("uniform moments and range") {
  RngStream r(5);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    s += u;
    s2 += u * u;
  }
  double mean = s / n, var = s2 / n - mean * mean;
  // se(mean) = sqrt(1/12/n) ~ 6.5e-4
  CHECK(std::abs(mean - 0.5) < 3 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(var - 1.0 / 12) < 1e-3);
}

TEST_CASE("normal moments") {
  RngStream r(9);
  const int n = 200000;
  double s = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    s += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  double mean = s / n, var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(double(n)));
  // se(var) ~ sqrt(2/n)
  CHECK(std::abs(var - 1.0) < 3 * std::sqrt(2.0 / n));
  // kurtosis of a standard normal is 3
  CHECK(std::abs(s4 / n - 3.0) < 0.1);
}

TEST_CASE("below stays in range and covers all residues") {
  RngStream r(11);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t v = r.below(10);
    REQUIRE(v < 10);
    ++counts[static_cast<int>(v)];
  }
  // each bin expects 1000, sd ~ 30
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
}

TEST_CASE("bounded uniform") {
  RngStream r(13);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
  }
}

TEST_CASE("mix64 is deterministic and key-sensitive") {
  CHECK(mix64(1, 2) == mix64(1, 2));
  CHECK(mix64(1, 2) != mix64(1, 3));
  CHECK(mix64(1, 2) != mix64(2, 2));
}

}  // TEST_SUITE
