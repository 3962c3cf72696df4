#include <doctest.h>

#include <algorithm>

#include "shad/rng.hpp"

using namespace shad;

TEST_SUITE("rng") {
  TEST_CASE("splitmix64 matches the reference output for state 0") {
    std::uint64_t state = 0;
    CHECK(splitmix64(state) == 0xe220a8397b1dcdafULL);
  }

  TEST_CASE("xoshiro256** stream for seed 42") {
    Rng rng(42);
    CHECK(rng.next() == 0x15780b2e0c2ec716ULL);
    CHECK(rng.next() == 0x6104d9866d113a7eULL);
    CHECK(rng.next() == 0xae17533239e499a1ULL);
  }

  TEST_CASE("uniform doubles for seed 7") {
    Rng rng(7);
    CHECK(rng.uniform() == 0.7005764821796896);
    CHECK(rng.uniform() == 0.2787512294737843);
  }

  TEST_CASE("below stays in range and shuffle is a permutation") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    rng.shuffle(v);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  }
}
