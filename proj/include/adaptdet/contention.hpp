#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace adaptdet {

/// One calibration measurement of the contention generator.
struct CalibrationSample {
  int threads = 0;
  double utilization_percent = 0.0;
};

/// Linear threads -> utilization model of the contention generator,
/// saturating at `saturation` percent.
struct CGCalibration {
  double slope = 0.0;      // percent per thread
  double intercept = 0.0;  // percent
  double saturation = 99.0;
  int max_threads = 0;
  /// Thread count for each of the 12 calibrated levels.
  std::map<int, int> level_to_threads;
};

/// Least-squares line through the samples below the saturation plateau. The
/// plateau starts at the first pair of consecutive samples (by thread count)
/// within 1 point of 99%. `max_threads` defaults to the largest sampled
/// count. Throws InsufficientSamples (fewer than 3) and DegenerateFit.
CGCalibration calibrate(std::span<const CalibrationSample> samples, int max_threads = -1);

/// clamp(intercept + slope * threads, 0, saturation)
double utilization_for(const CGCalibration& cal, int threads);

/// Threads needed for `level` percent, rounded and clamped to [0, max_threads].
int threads_for(const CGCalibration& cal, double level);

/// CSV with header `threads,utilization`.
std::vector<CalibrationSample> load_calibration_csv(const std::string& path);

struct LoadReport {
  double requested_percent = 0.0;
  double achieved_percent = 0.0;
  std::vector<double> per_worker_percent;
  double wall_seconds = 0.0;
  int workers = 0;
};

/// Runs `workers` threads that each spin for level% of every 100 ms period
/// and sleep for the rest, for `duration_s` seconds. Achieved duty cycle is
/// measured from each worker's CPU time. Throws SpawnFailure.
LoadReport run_cpu_load(double level_percent, double duration_s, int workers);

}  // namespace adaptdet
