#include <doctest.h>

#include "adaptdet/contention.hpp"

using namespace adaptdet;

// Live CPU load; tolerances allow for a shared machine.

TEST_CASE("idle level stays near zero") {
  const auto r = run_cpu_load(0.0, 0.5, 1);
  CHECK(r.workers == 1);
  CHECK(r.achieved_percent < 5.0);
}

TEST_CASE("half duty cycle") {
  const auto r = run_cpu_load(50.0, 2.0, 1);
  CHECK(r.achieved_percent == doctest::Approx(50.0).epsilon(0.2));
  CHECK(r.wall_seconds >= 1.9);
}

TEST_CASE("near-saturated duty cycle") {
  const auto r = run_cpu_load(99.0, 1.0, 1);
  CHECK(r.achieved_percent >= 90.0);
}
