#include <doctest.h>

#include <filesystem>

#include "adaptdet/error.hpp"
#include "adaptdet/io.hpp"
#include "adaptdet/profiles.hpp"
#include "support.hpp"

using namespace adaptdet;

namespace {

const RuntimeContext kCtx0{Device::Synthetic, 0, 0.0};
const RuntimeContext kCtx50{Device::Synthetic, 0, 50.0};

BranchProfile make(const std::string& id, RuntimeContext ctx, double lat, double acc = 0.5) {
  BranchProfile p;
  p.branch_id = id;
  p.context = ctx;
  p.detector_latency_ms = lat;
  p.accuracy = acc;
  p.energy_per_frame_j = lat / 100.0;
  p.sample_count = 10;
  return p;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("adaptdet-test-" + name)).string();
}

}  // namespace

TEST_CASE("store lookup and NotFound") {
  const ProfileStore store({make("d=effdet-d0;i=1", kCtx0, 20.0)});
  BranchConfig b;
  CHECK(lookup(store, b, kCtx0).detector_latency_ms == 20.0);
  try {
    lookup(store, b, kCtx50);
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }
}

TEST_CASE("store rejects duplicates and inconsistent accuracy") {
  const auto a = make("d=effdet-d0;i=1", kCtx0, 20.0);
  try {
    ProfileStore({a, a});
    FAIL("duplicate accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateEntry);
  }
  try {
    ProfileStore({a, make("d=effdet-d0;i=1", kCtx50, 40.0, 0.6)});
    FAIL("inconsistent accuracy accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentAccuracy);
  }
}

TEST_CASE("interpolation between stored levels") {
  auto lo = make("d=effdet-d0;i=1", RuntimeContext{Device::Synthetic, 0, 40.0}, 20.0);
  auto hi = make("d=effdet-d0;i=1", kCtx50, 40.0);
  const ProfileStore store({lo, hi});
  BranchConfig b;
  const auto mid = interpolate_context(store, b, Device::Synthetic, 0, 45.0);
  CHECK(mid.detector_latency_ms == doctest::Approx(30.0));
  CHECK(mid.accuracy == 0.5);
  CHECK(interpolate_context(store, b, Device::Synthetic, 0, 50.0) == hi);

  double prev = 0.0;
  for (double c = 40.0; c <= 50.0; c += 0.5) {
    const double l = interpolate_context(store, b, Device::Synthetic, 0, c).detector_latency_ms;
    CHECK(l >= prev);
    prev = l;
  }

  auto code = [&](double c) {
    try {
      interpolate_context(store, b, Device::Synthetic, 0, c);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code(120.0) == ErrorCode::OutOfRange);
  CHECK(code(-1.0) == ErrorCode::OutOfRange);
  CHECK(code(30.0) == ErrorCode::NotFound);
}

TEST_CASE("load/save round trip is byte stable") {
  const auto store = support::random_store(virtuoso_domain(), {kCtx0, kCtx50}, 11);
  CHECK(store.size() == 310);
  const auto p1 = temp_path("profiles-1.json");
  const auto p2 = temp_path("profiles-2.json");
  save_profiles(store, p1);
  const auto loaded = load_profiles(p1, nullptr);
  save_profiles(loaded, p2);
  CHECK(io::read_file(p1) == io::read_file(p2));
  CHECK(loaded.entries() == store.entries());
  const auto domain = virtuoso_domain();
  CHECK(load_profiles(p1, &domain).size() == 310);
}

TEST_CASE("missing coverage lists the absent pairs") {
  auto j = profiles_to_json(support::random_store(virtuoso_domain(), {kCtx0, kCtx50}, 3));
  j["profiles"].erase(j["profiles"].begin());
  try {
    profiles_from_json(j);
    FAIL("gap accepted");
  } catch (const MissingCoverageError& e) {
    CHECK(e.missing().size() == 1);
  }
}

TEST_CASE("malformed profile documents") {
  for (const char* text : {R"({"profiles": []})", R"({"schema_version": 2, "profiles": []})",
                           R"({"schema_version": 1, "profiles": [{"branch_id": "x"}]})"}) {
    INFO(text);
    try {
      profiles_from_json(nlohmann::json::parse(text));
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
    }
  }
}

TEST_CASE("detection-profile reuse") {
  const auto domain = virtuoso_domain();
  AccuracyTable base;
  for (const auto& b : enumerate_branches(domain))
    if (b.detector_only()) base[branch_id(b)] = 0.5 + 0.01 * static_cast<double>(base.size());
  int calls = 0;
  const auto table = reuse_detection_profiles(base, domain, [&](const BranchConfig& b, double a) {
    ++calls;
    CHECK(b.interval > 1);
    return a / static_cast<double>(b.interval);
  });
  CHECK(table.size() == 155);
  CHECK(calls == 150);
  for (const auto& [id, acc] : base) CHECK(table.at(id) == acc);

  // Monotone reuse gives accuracy non-increasing in the interval.
  for (const auto& b : enumerate_branches(domain)) {
    if (b.detector_only()) continue;
    CHECK(table.at(branch_id(b)) <= table.at(branch_id(detector_side(b))));
  }

  AccuracyTable partial = base;
  partial.erase(partial.begin());
  try {
    reuse_detection_profiles(partial, domain, [](const BranchConfig&, double a) { return a; });
    FAIL("missing base accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingBase);
  }
}

TEST_CASE("context labels") {
  const RuntimeContext c{Device::AgxXavier, 2, 50.0};
  CHECK(context_label(c) == "agx-xavier/2/50");
  CHECK(parse_context_label("agx-xavier/2/50") == c);
  CHECK_THROWS_AS(validate(RuntimeContext{Device::AgxXavier, 9, 0.0}, false), Error);
  CHECK_THROWS_AS(validate(RuntimeContext{Device::Synthetic, 0, 45.0}, true), Error);
  CHECK_NOTHROW(validate(RuntimeContext{Device::Synthetic, 0, 45.0}, false));
}
