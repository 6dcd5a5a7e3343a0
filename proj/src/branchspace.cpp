#include "adaptdet/branchspace.hpp"

#include <algorithm>
#include <array>

#include "adaptdet/error.hpp"
#include "adaptdet/io.hpp"

namespace adaptdet {

namespace {

constexpr std::array<std::pair<DetectorKind, std::string_view>, 5> kDetectorNames{{
    {DetectorKind::EffDetD0, "effdet-d0"},
    {DetectorKind::EffDetD3, "effdet-d3"},
    {DetectorKind::SSD, "ssd"},
    {DetectorKind::FRCNN, "frcnn"},
    {DetectorKind::YOLO, "yolo"},
}};

constexpr std::array<std::pair<TrackerKind, std::string_view>, 4> kTrackerNames{{
    {TrackerKind::MedianFlow, "medianflow"},
    {TrackerKind::KCF, "kcf"},
    {TrackerKind::CSRT, "csrt"},
    {TrackerKind::OpticalFlow, "opticalflow"},
}};

constexpr std::array<std::pair<Knob, std::string_view>, 8> kKnobNames{{
    {Knob::Detector, "detector"},
    {Knob::Resolution, "resolution"},
    {Knob::Proposals, "proposals"},
    {Knob::FeatureMaps, "feature-maps"},
    {Knob::Tracker, "tracker"},
    {Knob::Resize, "resize"},
    {Knob::Threshold, "threshold"},
    {Knob::Interval, "interval"},
}};

constexpr std::array<std::pair<Knob, std::string_view>, 8> kKnobSymbols{{
    {Knob::Detector, "d"},
    {Knob::Resolution, "rd"},
    {Knob::Proposals, "np"},
    {Knob::FeatureMaps, "nm"},
    {Knob::Tracker, "t"},
    {Knob::Resize, "rf"},
    {Knob::Threshold, "ct"},
    {Knob::Interval, "i"},
}};

template <typename T>
bool strictly_ascending(const std::vector<T>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](const T& a, const T& b) { return !(a < b); }) == v.end();
}

[[noreturn]] void invalid_domain(const std::string& what) { throw Error(ErrorCode::InvalidDomain, what); }

std::string join_ints(const std::vector<int>& v, char sep) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += sep;
    out += std::to_string(v[k]);
  }
  return out;
}

// Detector-side configurations (interval 1, no tracker knobs) in canonical order.
std::vector<BranchConfig> detector_configs(const KnobDomain& domain) {
  std::vector<BranchConfig> out;
  for (DetectorKind d : domain.detectors) {
    std::vector<std::optional<int>> resolutions{std::nullopt};
    if (auto it = domain.detector_resolutions.find(d); it != domain.detector_resolutions.end()) {
      resolutions.assign(it->second.begin(), it->second.end());
    }
    std::vector<std::optional<int>> proposals{std::nullopt};
    if (has_proposals(d)) proposals.assign(domain.proposal_counts.begin(), domain.proposal_counts.end());
    std::vector<std::optional<std::vector<int>>> maps{std::nullopt};
    if (has_feature_maps(d) && !domain.feature_map_sets.empty()) {
      maps.assign(domain.feature_map_sets.begin(), domain.feature_map_sets.end());
    }
    for (const auto& rd : resolutions)
      for (const auto& np : proposals)
        for (const auto& nm : maps) {
          BranchConfig b;
          b.detector = d;
          b.resolution = rd;
          b.proposals = np;
          b.feature_maps = nm;
          b.interval = 1;
          out.push_back(std::move(b));
        }
  }
  return out;
}

}  // namespace

std::string_view to_string(DetectorKind d) {
  for (auto& [k, n] : kDetectorNames)
    if (k == d) return n;
  return "?";
}

std::string_view to_string(TrackerKind t) {
  for (auto& [k, n] : kTrackerNames)
    if (k == t) return n;
  return "?";
}

DetectorKind parse_detector(std::string_view name) {
  for (auto& [k, n] : kDetectorNames)
    if (n == name) return k;
  throw Error(ErrorCode::ParseError, "unknown detector '" + std::string(name) + "'");
}

TrackerKind parse_tracker(std::string_view name) {
  for (auto& [k, n] : kTrackerNames)
    if (n == name) return k;
  throw Error(ErrorCode::ParseError, "unknown tracker '" + std::string(name) + "'");
}

bool resolution_settable(DetectorKind d) noexcept {
  return d == DetectorKind::SSD || d == DetectorKind::FRCNN || d == DetectorKind::YOLO;
}
bool has_proposals(DetectorKind d) noexcept { return d == DetectorKind::FRCNN; }
bool has_feature_maps(DetectorKind d) noexcept { return d == DetectorKind::SSD; }

void validate(const BranchConfig& b) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (b.interval < 1) fail("interval must be >= 1");
  if (b.resolution) {
    if (!resolution_settable(b.detector)) fail(std::string(to_string(b.detector)) + " has a fixed resolution");
    if (*b.resolution <= 0) fail("resolution must be positive");
  }
  if (has_proposals(b.detector) != b.proposals.has_value()) fail("proposals are present iff the detector is frcnn");
  if (b.proposals && *b.proposals <= 0) fail("proposal count must be positive");
  if (b.feature_maps) {
    if (!has_feature_maps(b.detector)) fail("feature maps apply to ssd only");
    if (b.feature_maps->empty() || !strictly_ascending(*b.feature_maps) || b.feature_maps->front() < 0)
      fail("feature-map set must be non-empty, ascending, non-negative");
  }
  const bool has_tracking = b.tracker || b.tracker_resize || b.confidence_threshold;
  if (b.interval == 1 && has_tracking) fail("detector-only branch (i=1) carries tracker knobs");
  if (b.interval > 1) {
    if (!b.tracker || !b.tracker_resize || !b.confidence_threshold)
      fail("branch with i>1 needs tracker, resize factor and confidence threshold");
    if (!(*b.tracker_resize > 0.0 && *b.tracker_resize <= 1.0)) fail("resize factor must be in (0,1]");
    if (!(*b.confidence_threshold > 0.0 && *b.confidence_threshold < 1.0))
      fail("confidence threshold must be in (0,1)");
  }
}

void validate(const KnobDomain& domain) {
  if (domain.detectors.empty()) throw Error(ErrorCode::EmptyDomain, "no detectors");
  if (domain.detector_intervals.empty()) throw Error(ErrorCode::EmptyDomain, "no detector intervals");
  if (!strictly_ascending(domain.detectors)) invalid_domain("detectors must be sorted and unique");
  if (!strictly_ascending(domain.detector_intervals)) invalid_domain("intervals must be sorted and unique");
  if (domain.detector_intervals.front() < 1) invalid_domain("intervals must be >= 1");

  for (const auto& [d, res] : domain.detector_resolutions) {
    if (!resolution_settable(d)) invalid_domain(std::string(to_string(d)) + " has a fixed resolution");
    if (res.empty()) throw Error(ErrorCode::EmptyDomain, "empty resolution list for " + std::string(to_string(d)));
    if (!strictly_ascending(res)) invalid_domain("resolutions must be sorted and unique");
    if (res.front() <= 0) invalid_domain("resolutions must be positive");
  }

  const bool frcnn = std::find(domain.detectors.begin(), domain.detectors.end(), DetectorKind::FRCNN) !=
                     domain.detectors.end();
  if (frcnn && domain.proposal_counts.empty()) throw Error(ErrorCode::EmptyDomain, "frcnn needs proposal counts");
  if (!strictly_ascending(domain.proposal_counts)) invalid_domain("proposal counts must be sorted and unique");
  if (!domain.proposal_counts.empty() && domain.proposal_counts.front() <= 0)
    invalid_domain("proposal counts must be positive");

  if (!strictly_ascending(domain.feature_map_sets)) invalid_domain("feature-map sets must be sorted and unique");
  for (const auto& set : domain.feature_map_sets) {
    if (set.empty() || !strictly_ascending(set) || set.front() < 0)
      invalid_domain("feature-map set must be non-empty, ascending, non-negative");
  }

  if (!strictly_ascending(domain.trackers)) invalid_domain("trackers must be sorted and unique");
  if (!strictly_ascending(domain.tracker_resize_factors)) invalid_domain("resize factors must be sorted and unique");
  if (!strictly_ascending(domain.confidence_thresholds)) invalid_domain("thresholds must be sorted and unique");
  for (double rf : domain.tracker_resize_factors)
    if (!(rf > 0.0 && rf <= 1.0)) invalid_domain("resize factors must be in (0,1]");
  for (double ct : domain.confidence_thresholds)
    if (!(ct > 0.0 && ct < 1.0)) invalid_domain("confidence thresholds must be in (0,1)");

  if (domain.detector_intervals.back() > 1) {
    if (domain.trackers.empty()) throw Error(ErrorCode::EmptyDomain, "intervals > 1 need at least one tracker");
    if (domain.tracker_resize_factors.empty())
      throw Error(ErrorCode::EmptyDomain, "intervals > 1 need at least one resize factor");
    if (domain.confidence_thresholds.empty())
      throw Error(ErrorCode::EmptyDomain, "intervals > 1 need at least one confidence threshold");
  }
}

std::string branch_id(const BranchConfig& b) {
  std::string id = "d=";
  id += to_string(b.detector);
  if (b.resolution) id += ";rd=" + std::to_string(*b.resolution);
  if (b.proposals) id += ";np=" + std::to_string(*b.proposals);
  if (b.feature_maps) id += ";nm=" + join_ints(*b.feature_maps, ',');
  if (b.tracker) {
    id += ";t=";
    id += to_string(*b.tracker);
  }
  if (b.tracker_resize) id += ";rf=" + io::format_double(*b.tracker_resize);
  if (b.confidence_threshold) id += ";ct=" + io::format_double(*b.confidence_threshold);
  id += ";i=" + std::to_string(b.interval);
  return id;
}

BranchConfig parse_branch_id(std::string_view id) {
  static constexpr std::array<std::string_view, 8> kOrder{"d", "rd", "np", "nm", "t", "rf", "ct", "i"};
  auto fail = [&](const std::string& why) -> BranchConfig {
    throw Error(ErrorCode::ParseError, "bad branch id '" + std::string(id) + "': " + why);
  };

  BranchConfig b;
  bool seen_d = false;
  bool seen_i = false;
  std::size_t next = 0;
  for (const auto& field : io::split(id, ';')) {
    auto eq = field.find('=');
    if (eq == std::string::npos) return fail("field without '='");
    std::string key = field.substr(0, eq);
    std::string val = field.substr(eq + 1);
    if (val.empty()) return fail("empty value for " + key);
    auto pos = std::find(kOrder.begin() + static_cast<long>(next), kOrder.end(), key);
    if (pos == kOrder.end()) return fail("unknown or out-of-order key '" + key + "'");
    next = static_cast<std::size_t>(pos - kOrder.begin()) + 1;
    try {
      if (key == "d") {
        b.detector = parse_detector(val);
        seen_d = true;
      } else if (key == "rd") {
        b.resolution = static_cast<int>(io::parse_int(val));
      } else if (key == "np") {
        b.proposals = static_cast<int>(io::parse_int(val));
      } else if (key == "nm") {
        std::vector<int> maps;
        for (const auto& part : io::split(val, ',')) maps.push_back(static_cast<int>(io::parse_int(part)));
        b.feature_maps = std::move(maps);
      } else if (key == "t") {
        b.tracker = parse_tracker(val);
      } else if (key == "rf") {
        b.tracker_resize = io::parse_double(val);
      } else if (key == "ct") {
        b.confidence_threshold = io::parse_double(val);
      } else {
        b.interval = static_cast<int>(io::parse_int(val));
        seen_i = true;
      }
    } catch (const Error& e) {
      return fail(e.what());
    }
  }
  if (!seen_d || !seen_i) return fail("d and i are required");
  try {
    validate(b);
  } catch (const Error& e) {
    return fail(e.what());
  }
  if (branch_id(b) != id) return fail("not in canonical form");
  return b;
}

BranchConfig detector_side(const BranchConfig& branch) {
  BranchConfig b = branch;
  b.tracker.reset();
  b.tracker_resize.reset();
  b.confidence_threshold.reset();
  b.interval = 1;
  return b;
}

std::vector<BranchConfig> enumerate_branches(const KnobDomain& domain) {
  validate(domain);
  std::vector<BranchConfig> out;
  for (const auto& base : detector_configs(domain)) {
    for (int i : domain.detector_intervals) {
      if (i == 1) {
        out.push_back(base);
        continue;
      }
      for (TrackerKind t : domain.trackers)
        for (double rf : domain.tracker_resize_factors)
          for (double ct : domain.confidence_thresholds) {
            BranchConfig b = base;
            b.tracker = t;
            b.tracker_resize = rf;
            b.confidence_threshold = ct;
            b.interval = i;
            out.push_back(std::move(b));
          }
    }
  }
  return out;
}

KnobDomain virtuoso_domain() {
  KnobDomain d;
  d.detectors = {DetectorKind::EffDetD0, DetectorKind::EffDetD3, DetectorKind::SSD};
  d.detector_resolutions[DetectorKind::SSD] = {192, 256, 320};
  d.trackers = {TrackerKind::MedianFlow};
  d.tracker_resize_factors = {0.25, 0.5, 1.0};
  d.confidence_thresholds = {0.15, 0.30};
  d.detector_intervals = {1, 2, 4, 8, 20, 100};
  return d;
}

KnobDomain frcnn_plus_domain() {
  KnobDomain d;
  d.detectors = {DetectorKind::FRCNN};
  d.detector_resolutions[DetectorKind::FRCNN] = {224, 320, 448, 576};
  d.proposal_counts = {1, 3, 5, 10, 20, 50, 100};
  d.trackers = {TrackerKind::MedianFlow};
  d.tracker_resize_factors = {1.0};
  d.confidence_thresholds = {0.15};
  d.detector_intervals = {8};
  return d;
}

KnobDomain yolo_plus_domain() {
  KnobDomain d;
  d.detectors = {DetectorKind::YOLO};
  d.detector_resolutions[DetectorKind::YOLO] = {224, 256, 288, 320, 352, 384, 416, 448, 480, 512, 544, 576};
  d.trackers = {TrackerKind::MedianFlow};
  d.tracker_resize_factors = {1.0};
  d.confidence_thresholds = {0.15};
  d.detector_intervals = {8};
  return d;
}

KnobDomain preset_domain(std::string_view name) {
  if (name == "virtuoso") return virtuoso_domain();
  if (name == "frcnn+") return frcnn_plus_domain();
  if (name == "yolo+") return yolo_plus_domain();
  throw Error(ErrorCode::NotFound, "unknown domain preset '" + std::string(name) + "'");
}

KnobDomain domain_from_json(const nlohmann::json& j) {
  KnobDomain d;
  try {
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "domain must be a JSON object");
    for (const auto& name : j.at("detectors")) d.detectors.push_back(parse_detector(name.get<std::string>()));
    if (j.contains("detector_resolutions")) {
      for (const auto& [name, list] : j.at("detector_resolutions").items()) {
        d.detector_resolutions[parse_detector(name)] = list.get<std::vector<int>>();
      }
    }
    if (j.contains("proposals")) d.proposal_counts = j.at("proposals").get<std::vector<int>>();
    if (j.contains("feature_maps")) d.feature_map_sets = j.at("feature_maps").get<std::vector<std::vector<int>>>();
    if (j.contains("trackers")) {
      for (const auto& name : j.at("trackers")) d.trackers.push_back(parse_tracker(name.get<std::string>()));
    }
    if (j.contains("tracker_resize")) d.tracker_resize_factors = j.at("tracker_resize").get<std::vector<double>>();
    if (j.contains("confidence_thresholds"))
      d.confidence_thresholds = j.at("confidence_thresholds").get<std::vector<double>>();
    d.detector_intervals = j.at("intervals").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("domain: ") + e.what());
  }
  // Sort for a deterministic order; duplicates are still rejected by validate().
  std::sort(d.detectors.begin(), d.detectors.end());
  for (auto& [_, res] : d.detector_resolutions) std::sort(res.begin(), res.end());
  std::sort(d.proposal_counts.begin(), d.proposal_counts.end());
  std::sort(d.feature_map_sets.begin(), d.feature_map_sets.end());
  std::sort(d.trackers.begin(), d.trackers.end());
  std::sort(d.tracker_resize_factors.begin(), d.tracker_resize_factors.end());
  std::sort(d.confidence_thresholds.begin(), d.confidence_thresholds.end());
  std::sort(d.detector_intervals.begin(), d.detector_intervals.end());
  validate(d);
  return d;
}

nlohmann::json domain_to_json(const KnobDomain& d) {
  nlohmann::json j;
  j["detectors"] = nlohmann::json::array();
  for (auto det : d.detectors) j["detectors"].push_back(std::string(to_string(det)));
  j["detector_resolutions"] = nlohmann::json::object();
  for (const auto& [det, res] : d.detector_resolutions) j["detector_resolutions"][std::string(to_string(det))] = res;
  j["proposals"] = d.proposal_counts;
  j["feature_maps"] = d.feature_map_sets;
  j["trackers"] = nlohmann::json::array();
  for (auto t : d.trackers) j["trackers"].push_back(std::string(to_string(t)));
  j["tracker_resize"] = d.tracker_resize_factors;
  j["confidence_thresholds"] = d.confidence_thresholds;
  j["intervals"] = d.detector_intervals;
  return j;
}

KnobDomain load_domain(const std::string& path) { return domain_from_json(io::read_json(path)); }

std::string_view to_string(Knob k) {
  for (auto& [kk, n] : kKnobNames)
    if (kk == k) return n;
  return "?";
}

Knob parse_knob(std::string_view name) {
  for (auto& [k, n] : kKnobNames)
    if (n == name) return k;
  for (auto& [k, n] : kKnobSymbols)
    if (n == name) return k;
  throw Error(ErrorCode::ParseError, "unknown knob '" + std::string(name) + "'");
}

KnobDomain ablate(const KnobDomain& domain, Knob knob) {
  validate(domain);
  KnobDomain out = domain;

  auto owner = [&](auto pred) -> std::optional<DetectorKind> {
    for (DetectorKind d : domain.detectors)
      if (pred(d)) return d;
    return std::nullopt;
  };

  std::optional<DetectorKind> pinned_detector = domain.detectors.front();
  if (knob == Knob::Detector) {
    pinned_detector.reset();
  } else if (knob == Knob::Resolution) {
    if (auto o = owner([&](DetectorKind d) { return domain.detector_resolutions.count(d) > 0; })) pinned_detector = o;
  } else if (knob == Knob::Proposals) {
    if (auto o = owner(has_proposals)) pinned_detector = o;
  } else if (knob == Knob::FeatureMaps) {
    if (auto o = owner([&](DetectorKind d) { return has_feature_maps(d) && !domain.feature_map_sets.empty(); }))
      pinned_detector = o;
  }
  if (pinned_detector) out.detectors = {*pinned_detector};

  for (auto it = out.detector_resolutions.begin(); it != out.detector_resolutions.end();) {
    if (std::find(out.detectors.begin(), out.detectors.end(), it->first) == out.detectors.end()) {
      it = out.detector_resolutions.erase(it);
      continue;
    }
    if (knob != Knob::Resolution) it->second = {it->second.back()};
    ++it;
  }
  const bool keeps_frcnn =
      std::find(out.detectors.begin(), out.detectors.end(), DetectorKind::FRCNN) != out.detectors.end();
  if (!keeps_frcnn) {
    out.proposal_counts.clear();
  } else if (knob != Knob::Proposals) {
    out.proposal_counts = {domain.proposal_counts.back()};
  }
  if (knob != Knob::FeatureMaps && !out.feature_map_sets.empty()) out.feature_map_sets = {out.feature_map_sets.back()};

  if (knob != Knob::Tracker && !out.trackers.empty()) out.trackers = {out.trackers.front()};
  if (knob != Knob::Resize && !out.tracker_resize_factors.empty())
    out.tracker_resize_factors = {out.tracker_resize_factors.back()};
  if (knob != Knob::Threshold && !out.confidence_thresholds.empty())
    out.confidence_thresholds = {out.confidence_thresholds.front()};

  if (knob != Knob::Interval) {
    // Reference interval: the middle of the tracking intervals, so that the
    // tracker-side knobs stay live in their own ablations.
    std::vector<int> tracking;
    for (int i : domain.detector_intervals)
      if (i > 1) tracking.push_back(i);
    out.detector_intervals = {tracking.empty() ? domain.detector_intervals.front() : tracking[tracking.size() / 2]};
  }
  validate(out);
  return out;
}

std::vector<Knob> active_knobs(const KnobDomain& domain) {
  std::vector<Knob> out;
  if (domain.detectors.size() > 1) out.push_back(Knob::Detector);
  for (const auto& [_, res] : domain.detector_resolutions) {
    if (res.size() > 1) {
      out.push_back(Knob::Resolution);
      break;
    }
  }
  if (domain.proposal_counts.size() > 1) out.push_back(Knob::Proposals);
  if (domain.feature_map_sets.size() > 1) out.push_back(Knob::FeatureMaps);
  if (domain.trackers.size() > 1) out.push_back(Knob::Tracker);
  if (domain.tracker_resize_factors.size() > 1) out.push_back(Knob::Resize);
  if (domain.confidence_thresholds.size() > 1) out.push_back(Knob::Threshold);
  if (domain.detector_intervals.size() > 1) out.push_back(Knob::Interval);
  return out;
}

}  // namespace adaptdet
