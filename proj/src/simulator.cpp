#include "adaptdet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adaptdet/error.hpp"
#include "adaptdet/io.hpp"
#include "adaptdet/models.hpp"
#include "rng.hpp"

namespace adaptdet {

namespace {

using detail::fnv1a;
using detail::mix;
using detail::Rng;

[[noreturn]] void coverage_error(const std::string& what) { throw Error(ErrorCode::KernelCoverage, what); }

const DetectorKernel& detector_kernel(const SyntheticKernelSpec& kernel, DetectorKind d) {
  auto it = kernel.detectors.find(d);
  if (it == kernel.detectors.end()) coverage_error("kernel has no detector " + std::string(to_string(d)));
  return it->second;
}

const TrackerKernel& tracker_kernel(const SyntheticKernelSpec& kernel, TrackerKind t) {
  auto it = kernel.trackers.find(t);
  if (it == kernel.trackers.end()) coverage_error("kernel has no tracker " + std::string(to_string(t)));
  return it->second;
}

const ModeScaling& mode_scaling(const SyntheticKernelSpec& kernel, int mode) {
  auto it = kernel.power_modes.find(mode);
  if (it == kernel.power_modes.end()) coverage_error("kernel has no power mode " + std::to_string(mode));
  return it->second;
}

double mode_idle_w(const SyntheticKernelSpec& kernel, const ModeScaling& m) {
  return m.idle_power_w.value_or(kernel.idle_power_w * m.power_scale);
}

// Board draw in a mode for a reference-mode level.
double mode_level_w(const SyntheticKernelSpec& kernel, const ModeScaling& m, double reference_w) {
  return mode_idle_w(kernel, m) + (reference_w - kernel.idle_power_w) * m.power_scale;
}

double resolution_ratio(const DetectorKernel& dk, const BranchConfig& b) {
  if (!b.resolution) return 1.0;
  if (dk.reference_resolution <= 0) {
    coverage_error("kernel detector " + std::string(to_string(b.detector)) + " has no reference resolution");
  }
  return static_cast<double>(*b.resolution) / static_cast<double>(dk.reference_resolution);
}

double miss_rate(const DetectorKernel& dk, const BranchConfig& b) {
  const double shortfall = std::max(0.0, 1.0 - resolution_ratio(dk, b));
  return std::clamp(dk.miss_rate + dk.miss_resolution_slope * shortfall, 0.0, 1.0);
}

// Scripted object trajectory.
struct SceneObject {
  double x0, y0, vx, vy, w, h;
  int class_id;
};

std::vector<SceneObject> make_scene(const SceneSpec& scene, std::uint64_t seed) {
  Rng rng(mix(seed, fnv1a("scene")));
  std::vector<SceneObject> objs;
  for (int o = 0; o < scene.objects; ++o) {
    SceneObject s{};
    s.w = scene.object_size_px * rng.uniform(0.75, 1.25);
    s.h = scene.object_size_px * rng.uniform(0.75, 1.25);
    s.x0 = rng.uniform(0.0, std::max(1.0, scene.width - s.w));
    s.y0 = rng.uniform(0.0, std::max(1.0, scene.height - s.h));
    const double angle = rng.uniform(0.0, 6.283185307179586);
    s.vx = scene.speed_px_per_frame * std::cos(angle);
    s.vy = scene.speed_px_per_frame * std::sin(angle);
    s.class_id = scene.classes > 0 ? o % scene.classes : 0;
    objs.push_back(s);
  }
  return objs;
}

double bounce(double start, double velocity, double frame, double span) {
  if (span <= 0.0) return 0.0;
  double p = std::fmod(start + velocity * frame, 2.0 * span);
  if (p < 0.0) p += 2.0 * span;
  return p <= span ? p : 2.0 * span - p;
}

DetectionBox object_box(const SceneSpec& scene, const SceneObject& o, long long frame) {
  DetectionBox b;
  b.frame_id = frame;
  b.class_id = o.class_id;
  b.x_min = bounce(o.x0, o.vx, static_cast<double>(frame), scene.width - o.w);
  b.y_min = bounce(o.y0, o.vy, static_cast<double>(frame), scene.height - o.h);
  b.x_max = b.x_min + o.w;
  b.y_max = b.y_min + o.h;
  return b;
}

DetectionBox jittered(DetectionBox b, Rng& rng, double sigma, double min_side) {
  if (sigma > 0.0) {
    b.x_min += sigma * rng.normal();
    b.y_min += sigma * rng.normal();
    b.x_max += sigma * rng.normal();
    b.y_max += sigma * rng.normal();
  }
  b.x_max = std::max(b.x_max, b.x_min + min_side);
  b.y_max = std::max(b.y_max, b.y_min + min_side);
  return b;
}

struct TrackedBox {
  DetectionBox box;
  int object = -1;  // scene object index, -1 for clutter
};

// One detector run on `frame`. Output survives NMS; thresholding is left to
// the caller. Randomness depends only on the detector-side configuration so
// that branches differing in tracker knobs see the same detections.
std::vector<TrackedBox> run_detector(const SyntheticKernelSpec& kernel, const std::vector<SceneObject>& scene,
                                     const BranchConfig& branch, std::uint64_t seed, long long frame) {
  const auto& dk = detector_kernel(kernel, branch.detector);
  const auto& sc = kernel.scene;
  Rng rng(mix(mix(seed, fnv1a(branch_id(detector_side(branch)))), static_cast<std::uint64_t>(frame)));
  const double ratio = resolution_ratio(dk, branch);
  const double sigma = dk.box_jitter_px / std::max(ratio, 1e-3);
  const double miss = miss_rate(dk, branch);

  std::vector<TrackedBox> raw;
  for (std::size_t o = 0; o < scene.size(); ++o) {
    const double u_miss = rng.uniform();
    const double conf = rng.uniform(sc.true_confidence_lo, sc.true_confidence_hi);
    DetectionBox b = jittered(object_box(sc, scene[o], frame), rng, sigma, 4.0);
    if (u_miss < miss) continue;
    b.confidence = conf;
    raw.push_back({b, static_cast<int>(o)});
    for (int k = 0; k < sc.duplicates; ++k) {
      DetectionBox dup = b;
      const double dx = 0.05 * (b.x_max - b.x_min) * (k + 1);
      const double dy = 0.05 * (b.y_max - b.y_min) * (k + 1);
      dup.x_min += dx;
      dup.x_max += dx;
      dup.y_min += dy;
      dup.y_max += dy;
      dup.confidence = conf * 0.9;
      raw.push_back({dup, static_cast<int>(o)});
    }
  }
  for (int k = 0; k < sc.clutter; ++k) {
    DetectionBox b;
    b.frame_id = frame;
    b.class_id = sc.classes > 0 ? static_cast<int>(rng.next() % static_cast<std::uint64_t>(sc.classes)) : 0;
    const double w = rng.uniform(40.0, 120.0);
    const double h = rng.uniform(40.0, 120.0);
    b.x_min = rng.uniform(0.0, std::max(1.0, sc.width - w));
    b.y_min = rng.uniform(0.0, std::max(1.0, sc.height - h));
    b.x_max = b.x_min + w;
    b.y_max = b.y_min + h;
    b.confidence = rng.uniform() * sc.clutter_confidence_max;
    raw.push_back({b, -1});
  }

  std::vector<DetectionBox> boxes;
  boxes.reserve(raw.size());
  for (const auto& t : raw) boxes.push_back(t.box);
  std::vector<TrackedBox> kept;
  for (std::size_t i : nms_indices(boxes, kernel.nms_iou)) kept.push_back(raw[i]);
  return kept;
}

// Per-second energy bins for the power trace.
class PowerAccumulator {
 public:
  void add(double start_s, double end_s, double watts) {
    if (end_s <= start_s) return;
    exact_j_ += (end_s - start_s) * watts;
    double t = start_s;
    while (t < end_s) {
      const auto bin = static_cast<std::size_t>(std::floor(t));
      const double bin_end = std::min(end_s, static_cast<double>(bin + 1));
      if (bins_.size() <= bin) bins_.resize(bin + 1, 0.0);
      bins_[bin] += (bin_end - t) * watts;
      t = bin_end;
    }
  }

  PowerTrace finish(double duration_s, Device device, int mode) const {
    PowerTrace trace;
    trace.device = device;
    trace.mode_id = mode;
    const auto n = static_cast<std::size_t>(std::ceil(duration_s));
    for (std::size_t k = 0; k < n; ++k) {
      const double covered = std::min(duration_s, static_cast<double>(k + 1)) - static_cast<double>(k);
      const double joules = k < bins_.size() ? bins_[k] : 0.0;
      trace.samples.push_back({static_cast<long long>(k), covered > 0.0 ? joules / covered : 0.0});
    }
    return trace;
  }

  double exact_j() const { return exact_j_; }

 private:
  std::vector<double> bins_;
  double exact_j_ = 0.0;
};

double noisy(double ms, double cv, Rng& rng) {
  if (cv <= 0.0) return ms;
  return ms * std::max(0.05, 1.0 + cv * rng.normal());
}

void check_kernel(const SyntheticKernelSpec& k) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "kernel: " + what); };
  if (!(k.idle_power_w >= 0.0)) fail("idle power must be >= 0");
  if (k.detector_power_w < k.idle_power_w || k.tracker_power_w < k.idle_power_w)
    fail("active power levels must be >= idle power");
  if (!(k.latency_noise_cv >= 0.0)) fail("latency noise must be >= 0");
  if (!(k.nms_iou > 0.0 && k.nms_iou < 1.0)) fail("nms_iou must be in (0,1)");
  for (const auto& [d, dk] : k.detectors) {
    if (!(dk.latency_ms > 0.0)) fail("detector latency must be > 0");
    if (!(dk.accuracy >= 0.0 && dk.accuracy <= 1.0)) fail("detector accuracy must be in [0,1]");
  }
  for (const auto& [t, tk] : k.trackers) {
    if (!(tk.c0_ms >= 0.0 && tk.c1_ms_per_object >= 0.0)) fail("tracker costs must be >= 0");
  }
  for (const auto& [m, s] : k.power_modes) {
    if (!(s.latency_scale > 0.0 && s.power_scale > 0.0)) fail("mode scales must be > 0");
  }
  for (const auto& [level, s] : k.contention_scale) {
    if (!(s > 0.0)) fail("contention scales must be > 0");
  }
  const auto& sc = k.scene;
  if (sc.width <= 0 || sc.height <= 0 || sc.objects < 0 || sc.classes < 1 || sc.clutter < 0 || sc.duplicates < 0)
    fail("invalid scene");
  if (!(sc.true_confidence_lo <= sc.true_confidence_hi)) fail("true confidence range is inverted");
}

}  // namespace

const std::vector<PowerModeSpec>& builtin_power_modes() {
  static const std::vector<PowerModeSpec> modes = [] {
    std::vector<PowerModeSpec> v;
    // Jetson AGX Xavier
    const std::optional<double> agx_budget[] = {std::nullopt, 10.0, 15.0, 30.0, 30.0, 30.0, 30.0, 15.0};
    const int agx_cores[] = {8, 2, 4, 8, 6, 4, 2, 4};
    const double agx_cpu[] = {2265.6, 1200, 1200, 1200, 1450, 1780, 2100, 2188};
    const double agx_gpu[] = {1377, 520, 670, 900, 900, 900, 900, 670};
    const double agx_dla[] = {1395.2, 550, 750, 1050, 1050, 1050, 1050, 115.2};
    for (int m = 0; m < 8; ++m) {
      v.push_back({Device::AgxXavier, m, agx_budget[m], agx_cores[m], agx_cpu[m], agx_gpu[m], agx_dla[m], {}});
    }
    // Jetson Xavier NX
    const double nx_budget[] = {15, 15, 15, 10, 10};
    const int nx_cores[] = {2, 4, 6, 2, 4};
    const double nx_cpu[] = {1900, 1400, 1400, 1500, 1200};
    const double nx_gpu[] = {1100, 1100, 1100, 800, 800};
    const double nx_dla[] = {1100, 1100, 1100, 900, 900};
    const std::optional<double> nx_idle[] = {3.25, std::nullopt, 3.38, std::nullopt, 3.08};
    for (int m = 0; m < 5; ++m) {
      v.push_back({Device::XavierNX, m, nx_budget[m], nx_cores[m], nx_cpu[m], nx_gpu[m], nx_dla[m], nx_idle[m]});
    }
    // Jetson TX2 MAXN; no DL accelerator.
    v.push_back({Device::TX2, 0, std::nullopt, 6, 2035.2, 1300.5, std::nullopt, {}});
    return v;
  }();
  return modes;
}

PowerModeSpec power_mode_spec(Device device, int mode) {
  if (device == Device::Synthetic) {
    if (mode < 0) throw Error(ErrorCode::NotFound, "negative power mode");
    return PowerModeSpec{Device::Synthetic, mode, std::nullopt, 4, 2000.0, 1000.0, std::nullopt, std::nullopt};
  }
  for (const auto& s : builtin_power_modes())
    if (s.device == device && s.mode_id == mode) return s;
  throw Error(ErrorCode::NotFound,
              "no power mode " + std::to_string(mode) + " for " + std::string(to_string(device)));
}

SyntheticKernelSpec default_kernel(Device device) {
  SyntheticKernelSpec k;
  k.device = device;

  DetectorKernel d0;
  d0.latency_ms = 28.0;
  d0.accuracy = 0.5507;
  d0.miss_rate = 0.10;
  d0.box_jitter_px = 6.0;
  k.detectors[DetectorKind::EffDetD0] = d0;

  DetectorKernel d3;
  d3.latency_ms = 95.0;
  d3.accuracy = 0.6387;
  d3.miss_rate = 0.05;
  d3.box_jitter_px = 4.0;
  k.detectors[DetectorKind::EffDetD3] = d3;

  DetectorKernel ssd;
  ssd.latency_ms = 22.0;
  ssd.reference_resolution = 320;
  ssd.accuracy = 0.52;
  ssd.resolution_accuracy_slope = 0.35;
  ssd.feature_map_accuracy_slope = 0.3;
  ssd.miss_rate = 0.12;
  ssd.miss_resolution_slope = 0.3;
  ssd.box_jitter_px = 8.0;
  k.detectors[DetectorKind::SSD] = ssd;

  DetectorKernel frcnn;
  frcnn.latency_ms = 160.0;
  frcnn.reference_resolution = 576;
  frcnn.latency_per_proposal_ms = 0.6;
  frcnn.accuracy = 0.60;
  frcnn.resolution_accuracy_slope = 0.3;
  frcnn.proposal_accuracy_slope = 0.3;
  frcnn.miss_rate = 0.06;
  frcnn.miss_resolution_slope = 0.2;
  frcnn.box_jitter_px = 4.0;
  k.detectors[DetectorKind::FRCNN] = frcnn;

  DetectorKernel yolo;
  yolo.latency_ms = 60.0;
  yolo.reference_resolution = 576;
  yolo.accuracy = 0.5125;
  yolo.resolution_accuracy_slope = 0.3;
  yolo.miss_rate = 0.10;
  yolo.miss_resolution_slope = 0.25;
  yolo.box_jitter_px = 7.0;
  k.detectors[DetectorKind::YOLO] = yolo;

  // MedianFlow's affine cost passes through 6.5 ms at 1 object and 344 ms at 100.
  k.trackers[TrackerKind::MedianFlow] = {3.0909090909090908, 3.4090909090909092, 0.97, 1.5};
  k.trackers[TrackerKind::KCF] = {2.0, 4.5, 0.98, 1.2};
  k.trackers[TrackerKind::CSRT] = {6.0, 9.0, 0.99, 0.8};
  k.trackers[TrackerKind::OpticalFlow] = {1.5, 1.2, 0.95, 2.5};

  for (int level : kContentionLevels) k.contention_scale[level] = 1.0 + level / 50.0;

  switch (device) {
    case Device::AgxXavier:
      k.power_modes[0] = {1.0, 1.0, std::nullopt};
      k.power_modes[2] = {1.8, 0.6, std::nullopt};
      break;
    case Device::XavierNX:
      k.idle_power_w = 3.25;
      k.detector_power_w = 11.0;
      k.tracker_power_w = 6.0;
      k.power_modes[0] = {1.0, 1.0, 3.25};
      k.power_modes[2] = {1.1, 0.95, 3.38};
      k.power_modes[4] = {1.18, 0.88, 3.08};
      break;
    case Device::TX2:
      k.power_modes[0] = {1.0, 1.0, std::nullopt};
      break;
    case Device::Synthetic:
      k.power_modes[0] = {1.0, 1.0, std::nullopt};
      k.power_modes[1] = {1.4, 0.75, std::nullopt};
      k.power_modes[2] = {1.8, 0.6, std::nullopt};
      break;
  }
  return k;
}

void check_coverage(const SyntheticKernelSpec& kernel, const BranchConfig& branch, const RuntimeContext& ctx) {
  if (ctx.device != kernel.device) {
    coverage_error("kernel models " + std::string(to_string(kernel.device)) + ", context is " +
                   std::string(to_string(ctx.device)));
  }
  const auto& dk = detector_kernel(kernel, branch.detector);
  resolution_ratio(dk, branch);
  if (branch.tracker) tracker_kernel(kernel, *branch.tracker);
  mode_scaling(kernel, ctx.power_mode);
  contention_scale(kernel, ctx.contention);
}

double mode_idle_power_w(const SyntheticKernelSpec& kernel, int power_mode) {
  return mode_idle_w(kernel, mode_scaling(kernel, power_mode));
}

double contention_scale(const SyntheticKernelSpec& kernel, double contention) {
  const auto& table = kernel.contention_scale;
  if (table.empty()) coverage_error("kernel has no contention scale table");
  if (contention < table.begin()->first || contention > table.rbegin()->first) {
    coverage_error("contention " + io::format_double(contention) + " outside the kernel's table");
  }
  auto hi = table.lower_bound(static_cast<int>(std::ceil(contention)));
  if (hi->first == contention) return hi->second;
  auto lo = std::prev(hi);
  const double t = (contention - lo->first) / static_cast<double>(hi->first - lo->first);
  return lo->second + (hi->second - lo->second) * t;
}

double kernel_detector_latency_ms(const SyntheticKernelSpec& kernel, const BranchConfig& branch,
                                  const RuntimeContext& ctx) {
  const auto& dk = detector_kernel(kernel, branch.detector);
  double ms = dk.latency_ms;
  if (branch.resolution) ms *= std::pow(resolution_ratio(dk, branch), dk.resolution_exponent);
  if (branch.proposals) ms += dk.latency_per_proposal_ms * *branch.proposals;
  if (branch.feature_maps) {
    const double used = static_cast<double>(branch.feature_maps->size()) / std::max(1, dk.feature_map_count);
    ms *= 0.4 + 0.6 * std::min(1.0, used);
  }
  return ms * mode_scaling(kernel, ctx.power_mode).latency_scale * contention_scale(kernel, ctx.contention);
}

TrackerCost kernel_tracker_cost(const SyntheticKernelSpec& kernel, TrackerKind tracker, const RuntimeContext& ctx) {
  const auto& tk = tracker_kernel(kernel, tracker);
  const double s = mode_scaling(kernel, ctx.power_mode).latency_scale * contention_scale(kernel, ctx.contention);
  return {tk.c0_ms * s, tk.c1_ms_per_object * s};
}

double kernel_degrade(const SyntheticKernelSpec& kernel, const BranchConfig& branch, double detector_only_accuracy) {
  if (branch.detector_only()) return detector_only_accuracy;
  const auto& deg = kernel.degradation;
  double a = detector_only_accuracy * tracker_kernel(kernel, *branch.tracker).accuracy_factor;
  a *= std::max(0.0, 1.0 - deg.interval_decay * std::log2(static_cast<double>(branch.interval)));
  a *= std::max(0.0, 1.0 - deg.resize_penalty * (1.0 - *branch.tracker_resize));
  a *= std::max(0.0, 1.0 - deg.threshold_penalty * *branch.confidence_threshold);
  return std::clamp(a, 0.0, 1.0);
}

double kernel_accuracy(const SyntheticKernelSpec& kernel, const BranchConfig& branch) {
  const auto& dk = detector_kernel(kernel, branch.detector);
  double a = dk.accuracy;
  a *= std::max(0.0, 1.0 - dk.resolution_accuracy_slope * std::max(0.0, 1.0 - resolution_ratio(dk, branch)));
  if (branch.proposals) {
    const double frac = std::log1p(*branch.proposals) / std::log1p(std::max(1, dk.reference_proposals));
    a *= std::max(0.0, 1.0 - dk.proposal_accuracy_slope * std::max(0.0, 1.0 - frac));
  }
  if (branch.feature_maps) {
    const double used = static_cast<double>(branch.feature_maps->size()) / std::max(1, dk.feature_map_count);
    a *= std::max(0.0, 1.0 - dk.feature_map_accuracy_slope * std::max(0.0, 1.0 - used));
  }
  return kernel_degrade(kernel, branch, std::clamp(a, 0.0, 1.0));
}

double expected_tracked_objects(const SyntheticKernelSpec& kernel, const BranchConfig& branch) {
  if (branch.detector_only()) return 0.0;
  const auto& sc = kernel.scene;
  const double ct = *branch.confidence_threshold;
  const double detect = 1.0 - miss_rate(detector_kernel(kernel, branch.detector), branch);
  double p_true = 0.0;
  if (sc.true_confidence_hi > sc.true_confidence_lo) {
    p_true = std::clamp((sc.true_confidence_hi - ct) / (sc.true_confidence_hi - sc.true_confidence_lo), 0.0, 1.0);
  } else {
    p_true = sc.true_confidence_lo >= ct ? 1.0 : 0.0;
  }
  const double p_clutter =
      sc.clutter_confidence_max > 0.0 ? std::clamp(1.0 - ct / sc.clutter_confidence_max, 0.0, 1.0) : 0.0;
  return sc.objects * detect * p_true + sc.clutter * p_clutter;
}

double apply_power_mode(double base_latency_ms, const PowerModeSpec& from, const PowerModeSpec& to,
                        const SyntheticKernelSpec& kernel) {
  if (from.device != to.device) {
    throw Error(ErrorCode::ModeMismatch, "cannot rescale between " + std::string(to_string(from.device)) + " and " +
                                             std::string(to_string(to.device)));
  }
  if (from.mode_id == to.mode_id) return base_latency_ms;
  return base_latency_ms * mode_scaling(kernel, to.mode_id).latency_scale /
         mode_scaling(kernel, from.mode_id).latency_scale;
}

std::vector<double> PowerTrace::watts() const {
  std::vector<double> w;
  w.reserve(samples.size());
  for (const auto& s : samples) w.push_back(s.watts);
  return w;
}

std::vector<DetectionBox> scene_ground_truth(const SyntheticKernelSpec& kernel, std::uint64_t seed, long long frame) {
  std::vector<DetectionBox> out;
  for (const auto& o : make_scene(kernel.scene, seed)) out.push_back(object_box(kernel.scene, o, frame));
  return out;
}

SimulationResult simulate_stream(const BranchConfig& initial, const RuntimeContext& ctx,
                                 const SyntheticKernelSpec& kernel, long long frames, const SimulateOptions& opts) {
  if (frames < 1) throw Error(ErrorCode::ZeroFrames, "simulation needs at least one frame");
  if (opts.frame_rate_hz && !(*opts.frame_rate_hz > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "frame rate must be positive");
  }
  check_kernel(kernel);
  validate(initial);
  validate(ctx, false);
  check_coverage(kernel, initial, ctx);

  auto steps = opts.contention_steps;
  std::stable_sort(steps.begin(), steps.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
  for (const auto& s : steps) {
    RuntimeContext c = ctx;
    c.contention = s.contention;
    validate(c, false);
    check_coverage(kernel, initial, c);
  }
  auto context_at = [&](long long frame) {
    RuntimeContext c = ctx;
    for (const auto& s : steps) {
      if (s.frame > frame) break;
      c.contention = s.contention;
    }
    return c;
  };

  const auto scene = make_scene(kernel.scene, opts.seed);
  const ModeScaling& mode = mode_scaling(kernel, ctx.power_mode);
  const double idle_w = mode_idle_w(kernel, mode);
  const double detector_w = mode_level_w(kernel, mode, kernel.detector_power_w);
  const double tracker_w = mode_level_w(kernel, mode, kernel.tracker_power_w);

  SimulationResult result;
  PowerAccumulator power;
  std::vector<DetectionBox> emitted;
  std::vector<DetectionBox> truth;

  BranchConfig branch = initial;
  std::string current_id = branch_id(branch);
  double clock_s = 0.0;  // time the pipeline becomes free
  double busy_ms = 0.0;
  long long gof_index = 0;
  const long long end_frame = opts.start_frame + frames;

  // With pinned clocks the board stays at the last stage's draw while it
  // waits for the next frame.
  double hold_w = idle_w;
  auto start_frame_at = [&](long long frame) {
    if (!opts.frame_rate_hz) return;
    const double arrival = static_cast<double>(frame - opts.start_frame) / *opts.frame_rate_hz;
    if (arrival > clock_s) {
      power.add(clock_s, arrival, hold_w);
      clock_s = arrival;
    }
  };
  auto run_for = [&](double ms, double watts) {
    power.add(clock_s, clock_s + ms / 1000.0, watts);
    clock_s += ms / 1000.0;
    busy_ms += ms;
    hold_w = watts;
  };

  for (long long frame = opts.start_frame; frame < end_frame; ++gof_index) {
    RuntimeContext gof_ctx = context_at(frame);
    if (opts.schedule_hook) {
      GofBoundary boundary{gof_index, frame, gof_ctx, &branch};
      if (auto next = opts.schedule_hook(boundary)) {
        validate(*next);
        check_coverage(kernel, *next, gof_ctx);
        std::string next_id = branch_id(*next);
        if (next_id != current_id) {
          branch = std::move(*next);
          current_id = std::move(next_id);
          ++result.summary.branch_switches;
        }
      }
    }

    const std::uint64_t branch_key = fnv1a(current_id);
    const int gof_frames = static_cast<int>(std::min<long long>(branch.interval, end_frame - frame));
    GoFRecord rec;
    rec.gof_index = gof_index;
    rec.branch_id = current_id;
    rec.frames = gof_frames;

    Rng timing(mix(mix(opts.seed, branch_key), static_cast<std::uint64_t>(frame) ^ 0x5a5a5a5aULL));

    // Detector frame.
    start_frame_at(frame);
    rec.detector_ms = noisy(kernel_detector_latency_ms(kernel, branch, gof_ctx), kernel.latency_noise_cv, timing);
    run_for(rec.detector_ms, detector_w);

    auto detections = run_detector(kernel, scene, branch, opts.seed, frame);
    std::vector<TrackedBox> tracked;
    if (branch.detector_only()) {
      tracked = std::move(detections);
    } else {
      for (auto& t : detections)
        if (t.box.confidence.value_or(0.0) >= *branch.confidence_threshold) tracked.push_back(std::move(t));
      rec.tracked_objects = static_cast<int>(tracked.size());
    }
    if (opts.evaluate_accuracy) {
      for (const auto& t : tracked) emitted.push_back(t.box);
      for (const auto& o : scene) truth.push_back(object_box(kernel.scene, o, frame));
    }

    // Tracker frames.
    if (gof_frames > 1) {
      const auto& tk = tracker_kernel(kernel, *branch.tracker);
      const double rf = *branch.tracker_resize;
      Rng drift(mix(mix(opts.seed, branch_key), static_cast<std::uint64_t>(frame)));
      for (long long f = frame + 1; f < frame + gof_frames; ++f) {
        const RuntimeContext frame_ctx = context_at(f);
        const TrackerCost cost = kernel_tracker_cost(kernel, *branch.tracker, frame_ctx);
        const double ms = noisy(tracker_latency_ms(cost, rf, rec.tracked_objects), kernel.latency_noise_cv, timing);
        start_frame_at(f);
        run_for(ms, tracker_w);
        rec.tracker_ms_total += ms;

        if (!opts.evaluate_accuracy) continue;
        const double sigma = tk.drift_px_per_frame / rf;
        for (auto& t : tracked) {
          double dx = 0.0;
          double dy = 0.0;
          if (t.object >= 0) {
            const auto prev = object_box(kernel.scene, scene[static_cast<std::size_t>(t.object)], f - 1);
            const auto now = object_box(kernel.scene, scene[static_cast<std::size_t>(t.object)], f);
            dx = now.x_min - prev.x_min;
            dy = now.y_min - prev.y_min;
          }
          if (sigma > 0.0) {
            dx += sigma * drift.normal();
            dy += sigma * drift.normal();
          }
          t.box.frame_id = f;
          t.box.x_min += dx;
          t.box.x_max += dx;
          t.box.y_min += dy;
          t.box.y_max += dy;
          emitted.push_back(t.box);
        }
        for (const auto& o : scene) truth.push_back(object_box(kernel.scene, o, f));
      }
    }

    rec.latency_ms_per_frame = (rec.detector_ms + rec.tracker_ms_total) / gof_frames;
    result.gofs.push_back(std::move(rec));
    frame += gof_frames;
  }

  double duration = clock_s;
  if (opts.frame_rate_hz) {
    const double stream_end = static_cast<double>(frames) / *opts.frame_rate_hz;
    if (stream_end > duration) {
      power.add(duration, stream_end, hold_w);
      duration = stream_end;
    }
  }

  result.trace = power.finish(duration, ctx.device, ctx.power_mode);
  auto& s = result.summary;
  s.frames = frames;
  s.gofs = static_cast<long long>(result.gofs.size());
  s.duration_s = duration;
  s.mean_latency_ms_per_frame = busy_ms / static_cast<double>(frames);
  s.energy_j_per_frame = predict_energy(result.trace.watts(), frames);
  s.exact_energy_j = power.exact_j();
  s.final_branch_id = current_id;
  if (opts.evaluate_accuracy && !truth.empty()) s.achieved_map = mean_ap(emitted, truth, 0.5).mean_ap;
  return result;
}

ProfileStore generate_profiles(const KnobDomain& domain, const std::vector<RuntimeContext>& contexts,
                               const SyntheticKernelSpec& kernel, const ProfilingOptions& opts) {
  check_kernel(kernel);
  const auto branches = enumerate_branches(domain);
  for (const auto& ctx : contexts) {
    validate(ctx, true);
    for (const auto& b : branches) check_coverage(kernel, b, ctx);
  }

  // Detector-only accuracy, reused for every interval.
  // Presets without i = 1 still need the detector-side base of each branch.
  AccuracyTable base;
  for (const auto& b : branches) {
    const auto side = detector_side(b);
    base.emplace(branch_id(side), kernel_accuracy(kernel, side));
  }
  const AccuracyTable accuracy = reuse_detection_profiles(
      base, domain, [&](const BranchConfig& b, double a) { return kernel_degrade(kernel, b, a); });

  std::vector<BranchProfile> profiles;
  for (const auto& ctx : contexts) {
    // Tracker sweep: fit c0 + c1 * k over object counts at resize 1.
    std::map<TrackerKind, TrackerCost> tracker_fit;
    for (TrackerKind t : domain.trackers) {
      const TrackerCost truth = kernel_tracker_cost(kernel, t, ctx);
      Rng rng(mix(mix(opts.seed, fnv1a(context_label(ctx))), static_cast<std::uint64_t>(t)));
      const int counts[] = {1, 2, 4, 8, 16};
      double sx = 0, sy = 0, n = 0;
      std::vector<std::pair<double, double>> pts;
      for (int k : counts) {
        for (int rep = 0; rep < 4; ++rep) {
          const double ms = noisy(tracker_latency_ms(truth, 1.0, k), kernel.latency_noise_cv, rng);
          pts.emplace_back(k, ms);
          sx += k;
          sy += ms;
          n += 1;
        }
      }
      const double mx = sx / n;
      const double my = sy / n;
      double sxx = 0, sxy = 0;
      for (auto [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
      }
      const double c1 = std::max(0.0, sxy / sxx);
      tracker_fit[t] = {std::max(0.0, my - c1 * mx), c1};
    }

    for (const auto& b : branches) {
      SimulateOptions sim_opts;
      sim_opts.seed = opts.seed;
      const auto sim = simulate_stream(b, ctx, kernel, opts.frames, sim_opts);
      double detector_ms = 0.0;
      for (const auto& g : sim.gofs) detector_ms += g.detector_ms;

      BranchProfile p;
      p.branch_id = branch_id(b);
      p.context = ctx;
      p.detector_latency_ms = detector_ms / static_cast<double>(sim.gofs.size());
      if (b.tracker) p.tracker_cost = tracker_fit.at(*b.tracker);
      p.accuracy = accuracy.at(p.branch_id);
      p.energy_per_frame_j = sim.summary.energy_j_per_frame;
      p.sample_count = opts.frames;
      profiles.push_back(std::move(p));
    }
  }
  return ProfileStore(std::move(profiles));
}

std::string gof_records_csv(const std::vector<GoFRecord>& gofs) {
  std::ostringstream out;
  out << "gof_index,branch_id,frames,detector_ms,tracker_ms_total,latency_ms_per_frame,tracked_objects\n";
  for (const auto& g : gofs) {
    out << g.gof_index << ',' << g.branch_id << ',' << g.frames << ',' << io::format_double(g.detector_ms) << ','
        << io::format_double(g.tracker_ms_total) << ',' << io::format_double(g.latency_ms_per_frame) << ','
        << g.tracked_objects << '\n';
  }
  return out.str();
}

std::string power_trace_csv(const PowerTrace& trace) {
  std::ostringstream out;
  out << "t_s,watts\n";
  for (const auto& s : trace.samples) out << s.t_s << ',' << io::format_double(s.watts) << '\n';
  return out.str();
}

nlohmann::json summary_to_json(const SimulationSummary& s) {
  nlohmann::json j{
      {"frames", s.frames},
      {"gofs", s.gofs},
      {"duration_s", s.duration_s},
      {"mean_latency_ms_per_frame", s.mean_latency_ms_per_frame},
      {"energy_j_per_frame", s.energy_j_per_frame},
      {"exact_energy_j", s.exact_energy_j},
      {"branch_switches", s.branch_switches},
      {"final_branch_id", s.final_branch_id},
  };
  j["achieved_map"] = s.achieved_map ? nlohmann::json(*s.achieved_map) : nlohmann::json(nullptr);
  return j;
}

namespace {

nlohmann::json detector_kernel_json(const DetectorKernel& d) {
  return {{"latency_ms", d.latency_ms},
          {"reference_resolution", d.reference_resolution},
          {"resolution_exponent", d.resolution_exponent},
          {"latency_per_proposal_ms", d.latency_per_proposal_ms},
          {"reference_proposals", d.reference_proposals},
          {"feature_map_count", d.feature_map_count},
          {"accuracy", d.accuracy},
          {"resolution_accuracy_slope", d.resolution_accuracy_slope},
          {"proposal_accuracy_slope", d.proposal_accuracy_slope},
          {"feature_map_accuracy_slope", d.feature_map_accuracy_slope},
          {"miss_rate", d.miss_rate},
          {"miss_resolution_slope", d.miss_resolution_slope},
          {"box_jitter_px", d.box_jitter_px}};
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

nlohmann::json kernel_to_json(const SyntheticKernelSpec& k) {
  nlohmann::json j;
  j["device"] = std::string(to_string(k.device));
  for (const auto& [d, dk] : k.detectors) j["detectors"][std::string(to_string(d))] = detector_kernel_json(dk);
  for (const auto& [t, tk] : k.trackers) {
    j["trackers"][std::string(to_string(t))] = {{"c0_ms", tk.c0_ms},
                                                {"c1_ms_per_object", tk.c1_ms_per_object},
                                                {"accuracy_factor", tk.accuracy_factor},
                                                {"drift_px_per_frame", tk.drift_px_per_frame}};
  }
  for (const auto& [m, s] : k.power_modes) {
    nlohmann::json mj{{"latency_scale", s.latency_scale}, {"power_scale", s.power_scale}};
    if (s.idle_power_w) mj["idle_power_w"] = *s.idle_power_w;
    j["power_modes"][std::to_string(m)] = mj;
  }
  for (const auto& [level, s] : k.contention_scale) j["contention_scale"][std::to_string(level)] = s;
  j["idle_power_w"] = k.idle_power_w;
  j["detector_power_w"] = k.detector_power_w;
  j["tracker_power_w"] = k.tracker_power_w;
  j["latency_noise_cv"] = k.latency_noise_cv;
  j["nms_iou"] = k.nms_iou;
  const auto& sc = k.scene;
  j["scene"] = {{"width", sc.width},
                {"height", sc.height},
                {"objects", sc.objects},
                {"classes", sc.classes},
                {"object_size_px", sc.object_size_px},
                {"speed_px_per_frame", sc.speed_px_per_frame},
                {"true_confidence_lo", sc.true_confidence_lo},
                {"true_confidence_hi", sc.true_confidence_hi},
                {"clutter", sc.clutter},
                {"clutter_confidence_max", sc.clutter_confidence_max},
                {"duplicates", sc.duplicates}};
  const auto& dg = k.degradation;
  j["degradation"] = {{"interval_decay", dg.interval_decay},
                      {"resize_penalty", dg.resize_penalty},
                      {"threshold_penalty", dg.threshold_penalty}};
  return j;
}

SyntheticKernelSpec kernel_from_json(const nlohmann::json& j) {
  SyntheticKernelSpec k;
  try {
    k.device = parse_device(j.at("device").get<std::string>());
    for (const auto& [name, dj] : j.at("detectors").items()) {
      DetectorKernel d;
      read_opt(dj, "latency_ms", d.latency_ms);
      read_opt(dj, "reference_resolution", d.reference_resolution);
      read_opt(dj, "resolution_exponent", d.resolution_exponent);
      read_opt(dj, "latency_per_proposal_ms", d.latency_per_proposal_ms);
      read_opt(dj, "reference_proposals", d.reference_proposals);
      read_opt(dj, "feature_map_count", d.feature_map_count);
      read_opt(dj, "accuracy", d.accuracy);
      read_opt(dj, "resolution_accuracy_slope", d.resolution_accuracy_slope);
      read_opt(dj, "proposal_accuracy_slope", d.proposal_accuracy_slope);
      read_opt(dj, "feature_map_accuracy_slope", d.feature_map_accuracy_slope);
      read_opt(dj, "miss_rate", d.miss_rate);
      read_opt(dj, "miss_resolution_slope", d.miss_resolution_slope);
      read_opt(dj, "box_jitter_px", d.box_jitter_px);
      k.detectors[parse_detector(name)] = d;
    }
    for (const auto& [name, tj] : j.at("trackers").items()) {
      TrackerKernel t;
      read_opt(tj, "c0_ms", t.c0_ms);
      read_opt(tj, "c1_ms_per_object", t.c1_ms_per_object);
      read_opt(tj, "accuracy_factor", t.accuracy_factor);
      read_opt(tj, "drift_px_per_frame", t.drift_px_per_frame);
      k.trackers[parse_tracker(name)] = t;
    }
    for (const auto& [mode, mj] : j.at("power_modes").items()) {
      ModeScaling s;
      read_opt(mj, "latency_scale", s.latency_scale);
      read_opt(mj, "power_scale", s.power_scale);
      if (mj.contains("idle_power_w")) s.idle_power_w = mj.at("idle_power_w").get<double>();
      k.power_modes[static_cast<int>(io::parse_int(mode))] = s;
    }
    for (const auto& [level, v] : j.at("contention_scale").items()) {
      k.contention_scale[static_cast<int>(io::parse_int(level))] = v.get<double>();
    }
    read_opt(j, "idle_power_w", k.idle_power_w);
    read_opt(j, "detector_power_w", k.detector_power_w);
    read_opt(j, "tracker_power_w", k.tracker_power_w);
    read_opt(j, "latency_noise_cv", k.latency_noise_cv);
    read_opt(j, "nms_iou", k.nms_iou);
    if (j.contains("scene")) {
      const auto& sj = j.at("scene");
      auto& sc = k.scene;
      read_opt(sj, "width", sc.width);
      read_opt(sj, "height", sc.height);
      read_opt(sj, "objects", sc.objects);
      read_opt(sj, "classes", sc.classes);
      read_opt(sj, "object_size_px", sc.object_size_px);
      read_opt(sj, "speed_px_per_frame", sc.speed_px_per_frame);
      read_opt(sj, "true_confidence_lo", sc.true_confidence_lo);
      read_opt(sj, "true_confidence_hi", sc.true_confidence_hi);
      read_opt(sj, "clutter", sc.clutter);
      read_opt(sj, "clutter_confidence_max", sc.clutter_confidence_max);
      read_opt(sj, "duplicates", sc.duplicates);
    }
    if (j.contains("degradation")) {
      const auto& dj = j.at("degradation");
      read_opt(dj, "interval_decay", k.degradation.interval_decay);
      read_opt(dj, "resize_penalty", k.degradation.resize_penalty);
      read_opt(dj, "threshold_penalty", k.degradation.threshold_penalty);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("kernel: ") + e.what());
  }
  check_kernel(k);
  return k;
}

SyntheticKernelSpec load_kernel(const std::string& path) { return kernel_from_json(io::read_json(path)); }

}  // namespace adaptdet
