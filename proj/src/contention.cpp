#include "adaptdet/contention.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <system_error>
#include <thread>

#include "adaptdet/error.hpp"
#include "adaptdet/io.hpp"
#include "adaptdet/profiles.hpp"

namespace adaptdet {

namespace {

constexpr double kPlateauTolerance = 1.0;

bool near_saturation(double util, double saturation) { return util >= saturation - kPlateauTolerance; }

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

}  // namespace

CGCalibration calibrate(std::span<const CalibrationSample> samples, int max_threads) {
  if (samples.size() < 3) {
    throw Error(ErrorCode::InsufficientSamples, "calibration needs at least 3 samples, got " +
                                                    std::to_string(samples.size()));
  }
  std::vector<CalibrationSample> sorted(samples.begin(), samples.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.threads < b.threads; });
  for (const auto& s : sorted) {
    if (s.threads < 0) throw Error(ErrorCode::InvalidArgument, "thread count must be >= 0");
  }

  CGCalibration cal;
  std::size_t plateau = sorted.size();
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (!near_saturation(sorted[k].utilization_percent, cal.saturation)) continue;
    const bool last = k + 1 == sorted.size();
    if (last || near_saturation(sorted[k + 1].utilization_percent, cal.saturation)) {
      plateau = k;
      break;
    }
  }

  // Centered sums keep noise-free fits exact to rounding.
  const std::size_t n = plateau;
  if (n < 2) throw Error(ErrorCode::DegenerateFit, "fewer than 2 samples below saturation");
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mean_x += sorted[k].threads;
    mean_y += sorted[k].utilization_percent;
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = sorted[k].threads - mean_x;
    sxx += dx * dx;
    sxy += dx * (sorted[k].utilization_percent - mean_y);
  }
  if (sxx == 0.0) throw Error(ErrorCode::DegenerateFit, "all sub-saturation samples share one thread count");
  cal.slope = sxy / sxx;
  if (!(cal.slope > 0.0)) throw Error(ErrorCode::DegenerateFit, "fitted slope is not positive");
  cal.intercept = mean_y - cal.slope * mean_x;
  cal.max_threads = max_threads >= 0 ? max_threads : sorted.back().threads;
  for (int level : kContentionLevels) cal.level_to_threads[level] = threads_for(cal, level);
  return cal;
}

double utilization_for(const CGCalibration& cal, int threads) {
  if (threads < 0) throw Error(ErrorCode::InvalidArgument, "thread count must be >= 0");
  return std::clamp(cal.intercept + cal.slope * threads, 0.0, cal.saturation);
}

int threads_for(const CGCalibration& cal, double level) {
  const double raw = std::round((level - cal.intercept) / cal.slope);
  return static_cast<int>(std::clamp(raw, 0.0, static_cast<double>(cal.max_threads)));
}

std::vector<CalibrationSample> load_calibration_csv(const std::string& path) {
  auto table = io::read_csv(path);
  if (table.header.size() < 2 || table.header[0] != "threads" || table.header[1] != "utilization") {
    throw Error(ErrorCode::ParseError, path + ": expected header 'threads,utilization'");
  }
  std::vector<CalibrationSample> out;
  for (const auto& row : table.rows) {
    if (row.size() < 2) throw Error(ErrorCode::ParseError, path + ": short row");
    out.push_back({static_cast<int>(io::parse_int(row[0])), io::parse_double(row[1])});
  }
  return out;
}

LoadReport run_cpu_load(double level_percent, double duration_s, int workers) {
  if (!(level_percent >= 0.0 && level_percent <= 99.0)) {
    throw Error(ErrorCode::OutOfRange, "load level must be in [0, 99]");
  }
  if (!(duration_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be positive");
  if (workers < 1) throw Error(ErrorCode::InvalidArgument, "need at least one worker");

  using clock = std::chrono::steady_clock;
  constexpr auto kPeriod = std::chrono::milliseconds(100);
  const auto busy = std::chrono::duration_cast<clock::duration>(kPeriod * (level_percent / 100.0));

  LoadReport report;
  report.requested_percent = level_percent;
  report.workers = workers;
  report.per_worker_percent.assign(static_cast<std::size_t>(workers), 0.0);

  const auto start = clock::now();
  const auto end = start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(duration_s));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::atomic<bool> abort{false};

  auto body = [&, end, busy](std::size_t slot) {
    const double cpu0 = thread_cpu_seconds();
    const auto t0 = clock::now();
    volatile std::uint64_t sink = 0;
    for (auto period_start = t0; period_start < end && !abort.load(std::memory_order_relaxed);
         period_start += kPeriod) {
      const auto spin_until = std::min(period_start + busy, end);
      while (clock::now() < spin_until) sink = sink + 1;
      const auto next = std::min(period_start + kPeriod, end);
      std::this_thread::sleep_until(next);
    }
    const double wall = std::chrono::duration<double>(clock::now() - t0).count();
    report.per_worker_percent[slot] = wall > 0.0 ? 100.0 * (thread_cpu_seconds() - cpu0) / wall : 0.0;
  };

  try {
    for (std::size_t k = 0; k < static_cast<std::size_t>(workers); ++k) pool.emplace_back(body, k);
  } catch (const std::system_error& e) {
    abort = true;
    for (auto& t : pool) t.join();
    throw Error(ErrorCode::SpawnFailure, e.what());
  }
  for (auto& t : pool) t.join();

  report.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  double sum = 0.0;
  for (double p : report.per_worker_percent) sum += p;
  report.achieved_percent = sum / workers;
  return report;
}

}  // namespace adaptdet
