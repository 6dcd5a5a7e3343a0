#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adaptdet/branchspace.hpp"
#include "adaptdet/evalmetrics.hpp"
#include "adaptdet/profiles.hpp"

namespace adaptdet {

/// Board configuration for one power mode. Frequencies are the pinned
/// maxima (DVFS disabled).
struct PowerModeSpec {
  Device device = Device::Synthetic;
  int mode_id = 0;
  std::optional<double> power_budget_w;
  int online_cpu_cores = 1;
  double max_cpu_mhz = 0.0;
  double max_gpu_mhz = 0.0;
  std::optional<double> max_dla_mhz;
  std::optional<double> idle_power_w;
};

/// Jetson AGX Xavier modes 0-7, Xavier NX modes 0-4, TX2 mode 0.
const std::vector<PowerModeSpec>& builtin_power_modes();
/// Built-in spec, or a generic one for Synthetic. Throws NotFound.
PowerModeSpec power_mode_spec(Device device, int mode);

struct DetectorKernel {
  double latency_ms = 10.0;
  /// Resolution at which `latency_ms` and `accuracy` hold. Ignored for
  /// fixed-resolution detectors.
  int reference_resolution = 0;
  double resolution_exponent = 2.0;
  double latency_per_proposal_ms = 0.0;
  int reference_proposals = 100;
  int feature_map_count = 6;
  double accuracy = 0.5;
  /// Accuracy lost per unit of (1 - rd / reference) below the reference.
  double resolution_accuracy_slope = 0.0;
  /// Accuracy lost per unit of (1 - log(1+np) / log(1+reference)).
  double proposal_accuracy_slope = 0.0;
  double feature_map_accuracy_slope = 0.0;
  /// Fraction of objects the detector misses at the reference resolution.
  double miss_rate = 0.0;
  double miss_resolution_slope = 0.0;
  /// Localization noise (pixels, std dev) at the reference resolution.
  double box_jitter_px = 0.0;
};

struct TrackerKernel {
  double c0_ms = 3.0;
  double c1_ms_per_object = 3.0;
  /// Multiplier on accuracy for branches that track with this tracker.
  double accuracy_factor = 1.0;
  /// Random-walk drift (pixels per frame) at resize factor 1.
  double drift_px_per_frame = 0.0;
};

struct ModeScaling {
  double latency_scale = 1.0;
  double power_scale = 1.0;
  /// Board idle draw in this mode. Defaults to the kernel idle draw times
  /// `power_scale`.
  std::optional<double> idle_power_w;
};

/// Scripted video content: objects moving at constant speed, bouncing off
/// the frame edges.
struct SceneSpec {
  int width = 1280;
  int height = 720;
  int objects = 4;
  int classes = 3;
  double object_size_px = 120.0;
  double speed_px_per_frame = 4.0;
  /// Confidence of true detections, uniform in [lo, hi].
  double true_confidence_lo = 0.35;
  double true_confidence_hi = 0.95;
  /// Low-confidence false positives per detector run.
  int clutter = 6;
  double clutter_confidence_max = 0.4;
  /// Near-duplicate boxes per detected object (removed by NMS).
  int duplicates = 1;
};

/// Accuracy degradation of tracking branches relative to their
/// detector-only configuration.
struct DegradationSpec {
  /// Loss per doubling of the detector interval.
  double interval_decay = 0.04;
  /// Loss per unit of (1 - resize factor).
  double resize_penalty = 0.08;
  /// Loss per unit of confidence threshold.
  double threshold_penalty = 0.05;
};

struct SyntheticKernelSpec {
  Device device = Device::Synthetic;
  std::map<DetectorKind, DetectorKernel> detectors;
  std::map<TrackerKind, TrackerKernel> trackers;
  std::map<int, ModeScaling> power_modes;
  /// Latency multiplier per calibrated contention level.
  std::map<int, double> contention_scale;
  double idle_power_w = 4.0;
  /// Board draw while the detector runs (or the tracker), reference mode.
  double detector_power_w = 14.0;
  double tracker_power_w = 7.0;
  /// Coefficient of variation of per-invocation latency; 0 is deterministic.
  double latency_noise_cv = 0.0;
  double nms_iou = 0.6;
  SceneSpec scene;
  DegradationSpec degradation;
};

/// Default kernel for a device. AGX Xavier carries mode 0 and mode 2
/// (latency x1.8, power x0.6); Xavier NX carries modes 0, 2, 4 with their
/// measured idle draw; Synthetic carries modes 0-2.
SyntheticKernelSpec default_kernel(Device device = Device::Synthetic);

SyntheticKernelSpec kernel_from_json(const nlohmann::json& j);
nlohmann::json kernel_to_json(const SyntheticKernelSpec& kernel);
SyntheticKernelSpec load_kernel(const std::string& path);

/// Throws KernelCoverage if the kernel lacks the branch's detector or
/// tracker, the context's power mode, or a contention scale for its level.
void check_coverage(const SyntheticKernelSpec& kernel, const BranchConfig& branch, const RuntimeContext& ctx);

/// Board idle draw in a power mode of the kernel. Throws KernelCoverage.
double mode_idle_power_w(const SyntheticKernelSpec& kernel, int power_mode);

/// Latency multiplier at `contention` percent, linear between table levels.
double contention_scale(const SyntheticKernelSpec& kernel, double contention);

/// Detector latency of the branch at the context (noise-free).
double kernel_detector_latency_ms(const SyntheticKernelSpec& kernel, const BranchConfig& branch,
                                  const RuntimeContext& ctx);
/// Tracker affine cost at the context, resize factor 1 (noise-free).
TrackerCost kernel_tracker_cost(const SyntheticKernelSpec& kernel, TrackerKind tracker, const RuntimeContext& ctx);

/// Ground-truth accuracy of the branch: detector-family base level adjusted
/// for resolution, proposals and feature maps, then degraded for tracking.
double kernel_accuracy(const SyntheticKernelSpec& kernel, const BranchConfig& branch);
/// Tracking degradation alone, applied to a detector-only accuracy.
double kernel_degrade(const SyntheticKernelSpec& kernel, const BranchConfig& branch, double detector_only_accuracy);

/// Expected number of boxes at or above the branch's confidence threshold
/// per detector run (0 for detector-only branches).
double expected_tracked_objects(const SyntheticKernelSpec& kernel, const BranchConfig& branch);

/// Rescales a latency between two modes of the same device using the
/// kernel's per-mode latency factors. Throws ModeMismatch.
double apply_power_mode(double base_latency_ms, const PowerModeSpec& from, const PowerModeSpec& to,
                        const SyntheticKernelSpec& kernel);

struct GoFRecord {
  long long gof_index = 0;
  std::string branch_id;
  int frames = 0;
  double detector_ms = 0.0;
  double tracker_ms_total = 0.0;
  double latency_ms_per_frame = 0.0;
  int tracked_objects = 0;
};

struct PowerSample {
  long long t_s = 0;
  double watts = 0.0;
};

/// Average board draw over consecutive 1-second windows; the last window
/// averages over its covered part.
struct PowerTrace {
  std::vector<PowerSample> samples;
  Device device = Device::Synthetic;
  int mode_id = 0;

  std::vector<double> watts() const;
};

struct ContentionStep {
  long long frame = 0;
  double contention = 0.0;
};

struct GofBoundary {
  long long gof_index = 0;
  long long frame_index = 0;
  RuntimeContext context;
  const BranchConfig* current = nullptr;
};

/// Called on the simulation thread before every GoF. Returning a branch
/// switches to it for that GoF.
using ScheduleHook = std::function<std::optional<BranchConfig>(const GofBoundary&)>;

struct SimulateOptions {
  std::uint64_t seed = 1;
  /// Contention changes taking effect at the given frame.
  std::vector<ContentionStep> contention_steps;
  /// Frames arrive at this rate and the board holds the draw of the stage
  /// that last ran until the next arrival. Without it frames are processed
  /// back to back.
  std::optional<double> frame_rate_hz;
  ScheduleHook schedule_hook;
  /// Score emitted boxes against the scripted ground truth.
  bool evaluate_accuracy = false;
  long long start_frame = 0;
};

struct SimulationSummary {
  long long frames = 0;
  long long gofs = 0;
  double duration_s = 0.0;
  double mean_latency_ms_per_frame = 0.0;
  double energy_j_per_frame = 0.0;
  double exact_energy_j = 0.0;
  std::optional<double> achieved_map;
  int branch_switches = 0;
  std::string final_branch_id;
};

struct SimulationResult {
  std::vector<GoFRecord> gofs;
  PowerTrace trace;
  SimulationSummary summary;
};

/// Runs `frames` frames of tracking-by-detection in groups of the branch's
/// interval. Throws ZeroFrames and KernelCoverage.
SimulationResult simulate_stream(const BranchConfig& branch, const RuntimeContext& ctx,
                                 const SyntheticKernelSpec& kernel, long long frames,
                                 const SimulateOptions& opts = {});

/// Ground-truth boxes of the scripted scene at one frame.
std::vector<DetectionBox> scene_ground_truth(const SyntheticKernelSpec& kernel, std::uint64_t seed, long long frame);

struct ProfilingOptions {
  long long frames = 200;
  std::uint64_t seed = 1;
};

/// Offline profiling against the synthetic kernel: detector latency and
/// energy from simulated sample streams, tracker cost from a separate
/// tracker sweep, accuracy from detector-only results reused across
/// intervals.
ProfileStore generate_profiles(const KnobDomain& domain, const std::vector<RuntimeContext>& contexts,
                               const SyntheticKernelSpec& kernel, const ProfilingOptions& opts = {});

std::string gof_records_csv(const std::vector<GoFRecord>& gofs);
std::string power_trace_csv(const PowerTrace& trace);
nlohmann::json summary_to_json(const SimulationSummary& summary);

}  // namespace adaptdet
