#pragma once

#include <functional>
#include <optional>
#include <span>

#include "adaptdet/branchspace.hpp"
#include "adaptdet/profiles.hpp"

namespace adaptdet {

struct PredictedMetrics {
  double latency_ms_per_frame = 0.0;
  double energy_j_per_frame = 0.0;
  double accuracy = 0.0;

  bool operator==(const PredictedMetrics&) const = default;
};

/// Per-frame tracker cost for `objects` tracked boxes at resize factor `rf`:
/// c0 + c1 * rf^2 * objects.
double tracker_latency_ms(const TrackerCost& cost, double resize_factor, double objects);

/// Amortized latency of a group of `interval` frames with one detector run:
/// (detector + (interval - 1) * tracker) / interval.
double amortized_latency_ms(double detector_ms, double tracker_ms, int interval);

/// Per-frame latency of `branch` from its profile. The tracker side is
/// ignored for detector-only branches.
double predict_latency(const BranchProfile& profile, const BranchConfig& branch, double tracked_objects);

/// Energy per frame from a power trace sampled once per second: the sum of
/// samples times one second, divided by `frames`. With `idle_watts`, each
/// sample is reduced by the idle draw (clamped at zero) first.
/// Throws EmptyTrace and ZeroFrames.
double predict_energy(std::span<const double> watts, long long frames, std::optional<double> idle_watts = {});

/// Throws NotFound.
double predict_accuracy(const ProfileStore& store, const BranchConfig& branch, const RuntimeContext& ctx);

struct PredictOptions {
  /// Tracked-object count k used for every branch, unless `tracked_objects_fn`
  /// supplies a per-branch value.
  double tracked_objects = 0.0;
  std::function<double(const BranchConfig&)> tracked_objects_fn;
  /// Report energy net of the idle draw over the frame time.
  std::optional<double> idle_watts;

  double objects_for(const BranchConfig& branch) const {
    return tracked_objects_fn ? tracked_objects_fn(branch) : tracked_objects;
  }
};

/// Latency, energy and accuracy of one branch from an already resolved profile.
PredictedMetrics predict_metrics(const BranchProfile& profile, const BranchConfig& branch, const PredictOptions& opts);

/// Resolves the profile (interpolating contention when needed) and predicts.
PredictedMetrics predict_metrics(const ProfileStore& store, const BranchConfig& branch, const RuntimeContext& ctx,
                                 const PredictOptions& opts);

}  // namespace adaptdet
