#include "adaptdet/models.hpp"

#include <algorithm>
#include <cmath>

#include "adaptdet/error.hpp"

namespace adaptdet {

double tracker_latency_ms(const TrackerCost& cost, double resize_factor, double objects) {
  return cost.c0_ms + cost.c1_ms_per_object * resize_factor * resize_factor * objects;
}

double amortized_latency_ms(double detector_ms, double tracker_ms, int interval) {
  if (interval < 1) throw Error(ErrorCode::InvalidArgument, "interval must be >= 1");
  if (interval == 1) return detector_ms;
  return (detector_ms + static_cast<double>(interval - 1) * tracker_ms) / static_cast<double>(interval);
}

double predict_latency(const BranchProfile& profile, const BranchConfig& branch, double tracked_objects) {
  if (tracked_objects < 0.0) throw Error(ErrorCode::InvalidArgument, "tracked object count must be >= 0");
  if (branch.detector_only()) return profile.detector_latency_ms;
  const double trk = tracker_latency_ms(profile.tracker_cost, branch.tracker_resize.value_or(1.0), tracked_objects);
  return amortized_latency_ms(profile.detector_latency_ms, trk, branch.interval);
}

double predict_energy(std::span<const double> watts, long long frames, std::optional<double> idle_watts) {
  if (watts.empty()) throw Error(ErrorCode::EmptyTrace, "power trace has no samples");
  if (frames <= 0) throw Error(ErrorCode::ZeroFrames, "frame count must be positive");
  constexpr double kSampleSeconds = 1.0;
  double joules = 0.0;
  for (double w : watts) {
    const double p = idle_watts ? std::max(0.0, w - *idle_watts) : w;
    joules += p * kSampleSeconds;
  }
  return joules / static_cast<double>(frames);
}

double predict_accuracy(const ProfileStore& store, const BranchConfig& branch, const RuntimeContext& ctx) {
  return profile_for(store, branch, ctx).accuracy;
}

PredictedMetrics predict_metrics(const BranchProfile& profile, const BranchConfig& branch, const PredictOptions& opts) {
  PredictedMetrics m;
  m.latency_ms_per_frame = predict_latency(profile, branch, opts.objects_for(branch));
  m.energy_j_per_frame = profile.energy_per_frame_j;
  if (opts.idle_watts) {
    m.energy_j_per_frame = std::max(0.0, m.energy_j_per_frame - *opts.idle_watts * m.latency_ms_per_frame / 1000.0);
  }
  m.accuracy = profile.accuracy;
  return m;
}

PredictedMetrics predict_metrics(const ProfileStore& store, const BranchConfig& branch, const RuntimeContext& ctx,
                                 const PredictOptions& opts) {
  return predict_metrics(profile_for(store, branch, ctx), branch, opts);
}

}  // namespace adaptdet
