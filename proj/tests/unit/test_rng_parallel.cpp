#include <atomic>
#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "bftt3d/parallel.hpp"
#include "bftt3d/rng.hpp"

using namespace bftt3d;

TEST_CASE("counter rng streams are reproducible and distinct") {
  CounterRng a(5, "train", 3), b(5, "train", 3), c(5, "train", 4), d(5, "test", 3);
  const auto x = a.next_u64();
  CHECK(x == b.next_u64());
  CHECK(x != c.next_u64());
  CHECK(x != d.next_u64());
}

TEST_CASE("counter rng moments") {
  CounterRng rng(1, "moments", 0);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK_UNARY(u >= 0.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(std::abs(su / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(sn / n) < 5 / std::sqrt(double(n)));
  CHECK(std::abs(sn2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
  for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
}

TEST_CASE("parallel_for runs every index once") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; }, 4);
  for (const auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  try {
    parallel_for(
        100, [](std::size_t i) { if (i == 17 || i == 60) throw std::runtime_error(std::to_string(i)); }, 3);
    FAIL("expected exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "17");
  }
}
