#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "adaptdet/contention.hpp"
#include "adaptdet/error.hpp"
#include "adaptdet/profiles.hpp"

using namespace adaptdet;

namespace {

std::vector<CalibrationSample> line(double slope, double intercept, int max_threads, double noise = 0.0,
                                    std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise > 0.0 ? noise : 1.0);
  std::vector<CalibrationSample> s;
  for (int t = 0; t <= max_threads; ++t) {
    double u = std::min(99.0, intercept + slope * t);
    if (noise > 0.0) u = std::clamp(u + n(rng), 0.0, 100.0);
    s.push_back({t, u});
  }
  return s;
}

ErrorCode code_of(const std::vector<CalibrationSample>& s) {
  try {
    calibrate(s);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("exact line") {
  const auto cal = calibrate(line(0.5, 0.0, 220));
  CHECK(cal.slope == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cal.intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(cal.level_to_threads.at(50) == 100);
  CHECK(cal.level_to_threads.size() == kContentionLevels.size());
  for (int level : kContentionLevels) CHECK(cal.level_to_threads.count(level) == 1);
  CHECK(utilization_for(cal, 0) == doctest::Approx(0.0).scale(1.0));
  CHECK(utilization_for(cal, 1000) == 99.0);
  CHECK(utilization_for(cal, 60) == doctest::Approx(30.0));
}

TEST_CASE("noise-free slopes recover to 1e-9") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> s(0.02, 1.0), b(0.0, 5.0);
  for (int t = 0; t < 200; ++t) {
    const double slope = s(rng), intercept = b(rng);
    const int max_threads = static_cast<int>((99.0 - intercept) / slope) + 10;
    const auto cal = calibrate(line(slope, intercept, max_threads));
    CHECK(std::abs(cal.slope - slope) <= 1e-9 * slope);
  }
}

TEST_CASE("noisy line recovers within 5%") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto cal = calibrate(line(0.5, 0.0, 220, 1.0, seed));
    CHECK(std::abs(cal.slope - 0.5) <= 0.05 * 0.5);
  }
}

TEST_CASE("monotone mappings") {
  const auto cal = calibrate(line(0.37, 2.0, 300, 0.5, 4));
  double prev = -1.0;
  for (int t = 0; t <= 400; ++t) {
    const double u = utilization_for(cal, t);
    CHECK(u >= prev);
    CHECK(u <= 99.0);
    prev = u;
  }
  int prev_threads = -1;
  for (const auto& [level, threads] : cal.level_to_threads) {
    CHECK(threads >= prev_threads);
    CHECK(threads <= cal.max_threads);
    prev_threads = threads;
  }
}

TEST_CASE("calibration failures") {
  CHECK(code_of({{0, 0.0}, {1, 1.0}}) == ErrorCode::InsufficientSamples);
  CHECK(code_of({{1, 99.0}, {2, 99.0}, {3, 99.0}, {4, 99.0}}) == ErrorCode::DegenerateFit);
  CHECK(code_of({{1, 50.0}, {2, 40.0}, {3, 30.0}}) == ErrorCode::DegenerateFit);
  CHECK(code_of({{1, 5.0}, {1, 5.0}, {1, 5.0}}) == ErrorCode::DegenerateFit);
}

TEST_CASE("thread lookup clamps") {
  const auto cal = calibrate(line(0.5, 0.0, 220));
  CHECK(threads_for(cal, 0.0) == 0);
  CHECK(threads_for(cal, 99.0) == 198);
  CHECK(threads_for(cal, 150.0) <= cal.max_threads);
}
