#include <doctest.h>

#include <cmath>
#include <random>

#include "adaptdet/error.hpp"
#include "adaptdet/models.hpp"
#include "adaptdet/simulator.hpp"
#include "support.hpp"

using namespace adaptdet;

namespace {

const RuntimeContext kCtx{Device::Synthetic, 0, 0.0};

BranchConfig d0(int interval, double rf = 1.0, double ct = 0.15) {
  BranchConfig b;
  b.detector = DetectorKind::EffDetD0;
  b.interval = interval;
  if (interval > 1) {
    b.tracker = TrackerKind::MedianFlow;
    b.tracker_resize = rf;
    b.confidence_threshold = ct;
  }
  return b;
}

}  // namespace

TEST_CASE("detector-only GoFs") {
  const auto r = simulate_stream(d0(1), kCtx, support::closure_kernel(), 10);
  CHECK(r.gofs.size() == 10);
  for (const auto& g : r.gofs) {
    CHECK(g.frames == 1);
    CHECK(g.tracker_ms_total == 0.0);
  }
}

TEST_CASE("closed-form GoF latency") {
  auto k = support::closure_kernel(Device::Synthetic, 1);
  k.detectors[DetectorKind::EffDetD0].latency_ms = 100.0;
  k.trackers[TrackerKind::MedianFlow] = {5.0, 0.0, 1.0, 0.0};
  const auto r = simulate_stream(d0(8), kCtx, k, 800);
  CHECK(r.summary.mean_latency_ms_per_frame == doctest::Approx(16.875).epsilon(1e-12));
  for (const auto& g : r.gofs) CHECK(g.latency_ms_per_frame == doctest::Approx((g.detector_ms + g.tracker_ms_total) / g.frames));

  BranchProfile p;
  p.detector_latency_ms = 100.0;
  p.tracker_cost = {5.0, 0.0};
  CHECK(predict_latency(p, d0(8), 1.0) == doctest::Approx(r.summary.mean_latency_ms_per_frame).epsilon(1e-12));
}

TEST_CASE("final short GoF averages over its own frames") {
  const auto r = simulate_stream(d0(8), kCtx, support::closure_kernel(), 20);
  REQUIRE(r.gofs.size() == 3);
  CHECK(r.gofs.back().frames == 4);
  const auto& g = r.gofs.back();
  CHECK(g.latency_ms_per_frame == doctest::Approx((g.detector_ms + g.tracker_ms_total) / 4.0));
}

TEST_CASE("tracked objects follow the threshold") {
  auto k = support::closure_kernel(Device::Synthetic, 5);
  const auto r = simulate_stream(d0(4), kCtx, k, 40);
  for (const auto& g : r.gofs) CHECK(g.tracked_objects == 5);
  CHECK(expected_tracked_objects(k, d0(4)) == doctest::Approx(5.0));

  k.scene.true_confidence_lo = 0.0;
  k.scene.true_confidence_hi = 0.2;
  const auto none = simulate_stream(d0(4, 1.0, 0.3), kCtx, k, 40);
  for (const auto& g : none.gofs) CHECK(g.tracked_objects == 0);
  CHECK(expected_tracked_objects(k, d0(4, 1.0, 0.3)) == 0.0);
}

TEST_CASE("constant power closes with the energy model") {
  auto k = support::closure_kernel();
  k.idle_power_w = k.detector_power_w = k.tracker_power_w = 10.0;
  k.detectors[DetectorKind::EffDetD0].latency_ms = 100.0;
  const auto r = simulate_stream(d0(1), kCtx, k, 828);
  CHECK(r.trace.samples.size() == 83);
  for (const auto& s : r.trace.samples) CHECK(s.watts == doctest::Approx(10.0));
  CHECK(r.summary.energy_j_per_frame == doctest::Approx(1.002415).epsilon(1e-6));
  CHECK(r.summary.energy_j_per_frame == predict_energy(r.trace.watts(), 828));
}

TEST_CASE("trace timestamps and idle floor") {
  const auto k = default_kernel();
  const auto r = simulate_stream(d0(8, 0.5), kCtx, k, 300);
  for (std::size_t i = 0; i < r.trace.samples.size(); ++i) {
    CHECK(r.trace.samples[i].t_s == static_cast<long long>(i));
    CHECK(r.trace.samples[i].watts >= mode_idle_power_w(k, 0) - 1e-9);
  }
  CHECK(r.summary.exact_energy_j == doctest::Approx(r.summary.energy_j_per_frame * 300.0 * r.summary.duration_s /
                                                    std::ceil(r.summary.duration_s))
                                        .epsilon(0.2));
}

TEST_CASE("energy is additive across split runs") {
  const auto k = support::closure_kernel();
  const auto full = simulate_stream(d0(4), kCtx, k, 400);
  SimulateOptions second;
  second.start_frame = 200;
  const auto a = simulate_stream(d0(4), kCtx, k, 200);
  const auto b = simulate_stream(d0(4), kCtx, k, 200, second);
  CHECK(a.summary.exact_energy_j + b.summary.exact_energy_j == doctest::Approx(full.summary.exact_energy_j).epsilon(1e-12));
}

TEST_CASE("contention scales every latency") {
  const auto k = support::closure_kernel();
  for (int level : {10, 50, 99}) {
    const RuntimeContext c{Device::Synthetic, 0, static_cast<double>(level)};
    const double f = contention_scale(k, level);
    const auto base = simulate_stream(d0(8, 0.5), kCtx, k, 80);
    const auto hot = simulate_stream(d0(8, 0.5), c, k, 80);
    REQUIRE(base.gofs.size() == hot.gofs.size());
    for (std::size_t i = 0; i < base.gofs.size(); ++i) {
      CHECK(hot.gofs[i].detector_ms == doctest::Approx(f * base.gofs[i].detector_ms).epsilon(1e-12));
      CHECK(hot.gofs[i].tracker_ms_total == doctest::Approx(f * base.gofs[i].tracker_ms_total).epsilon(1e-12));
    }
  }
  CHECK(contention_scale(k, 50) == doctest::Approx(2.0));
  CHECK(contention_scale(k, 45) == doctest::Approx(1.9));
}

TEST_CASE("noisy latency averages to the noise-free prediction") {
  auto k = support::closure_kernel(Device::Synthetic, 3);
  k.latency_noise_cv = 0.1;
  const auto b = d0(4, 0.5);
  SimulateOptions o;
  o.seed = 5;
  const auto r = simulate_stream(b, kCtx, k, 8000, o);
  BranchProfile p;
  p.detector_latency_ms = kernel_detector_latency_ms(k, b, kCtx);
  p.tracker_cost = kernel_tracker_cost(k, TrackerKind::MedianFlow, kCtx);
  CHECK(r.summary.mean_latency_ms_per_frame == doctest::Approx(predict_latency(p, b, 3.0)).epsilon(0.02));
}

TEST_CASE("seeded runs are reproducible") {
  const auto k = default_kernel();
  SimulateOptions o;
  o.seed = 42;
  o.evaluate_accuracy = true;
  const auto a = simulate_stream(d0(8, 0.5), kCtx, k, 120, o);
  const auto b = simulate_stream(d0(8, 0.5), kCtx, k, 120, o);
  CHECK(gof_records_csv(a.gofs) == gof_records_csv(b.gofs));
  CHECK(power_trace_csv(a.trace) == power_trace_csv(b.trace));
  CHECK(summary_to_json(a.summary) == summary_to_json(b.summary));
  REQUIRE(a.summary.achieved_map.has_value());
  CHECK(*a.summary.achieved_map > 0.0);
  CHECK(*a.summary.achieved_map <= 1.0);
}

TEST_CASE("detector-only accuracy beats long intervals on the synthetic stream") {
  const auto k = default_kernel();
  SimulateOptions o;
  o.evaluate_accuracy = true;
  const auto every = simulate_stream(d0(1), kCtx, k, 200, o);
  const auto sparse = simulate_stream(d0(100, 0.25), kCtx, k, 200, o);
  CHECK(*every.summary.achieved_map > *sparse.summary.achieved_map);
}

TEST_CASE("power modes") {
  const auto agx = default_kernel(Device::AgxXavier);
  const auto m0 = power_mode_spec(Device::AgxXavier, 0);
  const auto m2 = power_mode_spec(Device::AgxXavier, 2);
  CHECK(apply_power_mode(100.0, m0, m2, agx) == doctest::Approx(180.0));
  CHECK(apply_power_mode(100.0, m0, m0, agx) == 100.0);
  try {
    apply_power_mode(100.0, m0, power_mode_spec(Device::XavierNX, 0), agx);
    FAIL("expected ModeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ModeMismatch);
  }
  CHECK(builtin_power_modes().size() == 14);
  CHECK(*power_mode_spec(Device::XavierNX, 4).idle_power_w == 3.08);
  CHECK_FALSE(power_mode_spec(Device::TX2, 0).max_dla_mhz.has_value());
  CHECK_THROWS_AS(power_mode_spec(Device::AgxXavier, 8), Error);
}

TEST_CASE("NX mode 4 lowers energy per frame") {
  const auto nx = default_kernel(Device::XavierNX);
  SimulateOptions o;
  o.frame_rate_hz = 10.0;
  const auto b = d0(8, 0.5);
  const auto e0 = simulate_stream(b, RuntimeContext{Device::XavierNX, 0, 0.0}, nx, 600, o).summary.energy_j_per_frame;
  const auto e4 = simulate_stream(b, RuntimeContext{Device::XavierNX, 4, 0.0}, nx, 600, o).summary.energy_j_per_frame;
  CHECK(e4 < e0);
  CHECK(e4 / e0 == doctest::Approx(0.9).epsilon(0.05));
}

TEST_CASE("coverage and argument errors") {
  auto k = default_kernel();
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code([&] { simulate_stream(d0(1), kCtx, k, 0); }) == ErrorCode::ZeroFrames);
  CHECK(code([&] { simulate_stream(d0(1), RuntimeContext{Device::Synthetic, 7, 0.0}, k, 10); }) ==
        ErrorCode::KernelCoverage);
  CHECK(code([&] { simulate_stream(d0(1), RuntimeContext{Device::AgxXavier, 0, 0.0}, k, 10); }) ==
        ErrorCode::KernelCoverage);
  k.trackers.clear();
  CHECK(code([&] { simulate_stream(d0(4), kCtx, k, 10); }) == ErrorCode::KernelCoverage);
}

TEST_CASE("schedule hook switches branches at GoF boundaries") {
  const auto k = support::closure_kernel();
  SimulateOptions o;
  std::vector<long long> starts;
  o.schedule_hook = [&](const GofBoundary& b) -> std::optional<BranchConfig> {
    starts.push_back(b.frame_index);
    return b.frame_index >= 16 ? std::optional(d0(4)) : std::nullopt;
  };
  const auto r = simulate_stream(d0(8), kCtx, k, 32, o);
  CHECK(starts == std::vector<long long>{0, 8, 16, 20, 24, 28});
  CHECK(r.summary.branch_switches == 1);
  CHECK(r.summary.final_branch_id == branch_id(d0(4)));
}

TEST_CASE("contention steps apply from their frame") {
  const auto k = support::closure_kernel();
  SimulateOptions o;
  o.contention_steps = {{16, 50.0}};
  std::vector<double> seen;
  o.schedule_hook = [&](const GofBoundary& b) -> std::optional<BranchConfig> {
    seen.push_back(b.context.contention);
    return std::nullopt;
  };
  const auto r = simulate_stream(d0(8), kCtx, k, 32, o);
  CHECK(seen == std::vector<double>{0, 0, 50, 50});
  CHECK(r.gofs[2].detector_ms == doctest::Approx(2.0 * r.gofs[0].detector_ms));
}

TEST_CASE("kernel JSON round trip") {
  for (Device d : {Device::Synthetic, Device::AgxXavier, Device::XavierNX, Device::TX2}) {
    const auto k = default_kernel(d);
    CHECK(kernel_to_json(kernel_from_json(kernel_to_json(k))) == kernel_to_json(k));
  }
  CHECK_THROWS_AS(kernel_from_json(nlohmann::json::parse(R"({"device": "synthetic"})")), Error);
}

TEST_CASE("generated profiles") {
  const auto k = support::closure_kernel();
  const std::vector<RuntimeContext> ctxs{kCtx, RuntimeContext{Device::Synthetic, 0, 50.0}};
  ProfilingOptions po;
  po.frames = 24;
  const auto store = generate_profiles(virtuoso_domain(), ctxs, k, po);
  CHECK(store.size() == 310);
  CHECK(profiles_from_json(profiles_to_json(store)).entries() == store.entries());

  for (const auto& b : enumerate_branches(virtuoso_domain())) {
    const auto& p = store.at(branch_id(b), kCtx);
    const double k_obj = expected_tracked_objects(k, b);
    SimulateOptions so;
    const long long frames = 10LL * b.interval;
    const auto sim = simulate_stream(b, kCtx, k, frames, so);
    CHECK(std::abs(predict_latency(p, b, k_obj) - sim.summary.mean_latency_ms_per_frame) <=
          1e-9 * sim.summary.mean_latency_ms_per_frame);
    if (!b.detector_only()) CHECK(p.accuracy <= store.at(branch_id(detector_side(b)), kCtx).accuracy);
    CHECK(p.accuracy == store.at(branch_id(b), ctxs[1]).accuracy);
  }
}

TEST_CASE("presets without detector-only branches still profile") {
  const auto k = default_kernel();
  ProfilingOptions po;
  po.frames = 16;
  for (const auto& domain : {frcnn_plus_domain(), yolo_plus_domain()}) {
    const auto store = generate_profiles(domain, {kCtx}, k, po);
    CHECK(store.size() == enumerate_branches(domain).size());
    for (const auto& b : enumerate_branches(domain))
      CHECK(store.at(branch_id(b), kCtx).accuracy == doctest::Approx(kernel_accuracy(k, b)).epsilon(1e-12));
  }
}
