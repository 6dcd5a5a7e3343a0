#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "adaptdet/branchspace.hpp"
#include "adaptdet/profiles.hpp"
#include "adaptdet/simulator.hpp"

namespace support {

/// Profiles with random but internally consistent values for every branch
/// of `domain` at the given contexts. Accuracy is fixed per branch;
/// quantized values make ties common.
inline adaptdet::ProfileStore random_store(const adaptdet::KnobDomain& domain,
                                           const std::vector<adaptdet::RuntimeContext>& contexts, std::uint64_t seed,
                                           bool quantize = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> det(5.0, 200.0), c0(0.5, 8.0), c1(0.2, 6.0), acc(0.2, 0.8), en(0.05, 3.0);
  auto q = [&](double v, double step) { return quantize ? std::round(v / step) * step : v; };
  std::vector<adaptdet::BranchProfile> out;
  for (const auto& b : adaptdet::enumerate_branches(domain)) {
    const double a = q(acc(rng), 0.01);
    const double lat = q(det(rng), 0.5);
    const double e = q(en(rng), 0.05);
    const adaptdet::TrackerCost tc = b.detector_only() ? adaptdet::TrackerCost{} : adaptdet::TrackerCost{c0(rng), c1(rng)};
    for (const auto& ctx : contexts) {
      const double scale = 1.0 + ctx.contention / 50.0;
      adaptdet::BranchProfile p;
      p.branch_id = adaptdet::branch_id(b);
      p.context = ctx;
      p.detector_latency_ms = lat * scale;
      p.tracker_cost = {tc.c0_ms * scale, tc.c1_ms_per_object * scale};
      p.accuracy = a;
      p.energy_per_frame_j = e;
      p.sample_count = 100;
      out.push_back(p);
    }
  }
  return adaptdet::ProfileStore(std::move(out));
}

/// A kernel whose every run is reproducible in closed form: no misses, no
/// clutter, no latency noise, one class per object so NMS never merges two
/// objects, and every true detection clears any threshold up to 0.3.
inline adaptdet::SyntheticKernelSpec closure_kernel(adaptdet::Device device = adaptdet::Device::Synthetic,
                                                    int objects = 4) {
  auto k = adaptdet::default_kernel(device);
  for (auto& [d, dk] : k.detectors) {
    dk.miss_rate = 0.0;
    dk.miss_resolution_slope = 0.0;
  }
  k.scene.objects = objects;
  k.scene.classes = std::max(1, objects);
  k.scene.clutter = 0;
  k.scene.true_confidence_lo = 0.5;
  k.scene.true_confidence_hi = 0.95;
  k.latency_noise_cv = 0.0;
  return k;
}

}  // namespace support
