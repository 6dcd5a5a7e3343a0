#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace adaptdet {

// Enum order is the canonical enumeration order.
enum class DetectorKind { EffDetD0, EffDetD3, SSD, FRCNN, YOLO };
enum class TrackerKind { MedianFlow, KCF, CSRT, OpticalFlow };

std::string_view to_string(DetectorKind d);
std::string_view to_string(TrackerKind t);
DetectorKind parse_detector(std::string_view name);
TrackerKind parse_tracker(std::string_view name);

/// Detectors whose input resolution is a knob. EfficientDet variants run at
/// their built-in resolution.
bool resolution_settable(DetectorKind d) noexcept;
/// Proposal count is an FRCNN-only knob.
bool has_proposals(DetectorKind d) noexcept;
/// Feature-map selection is an SSD-only knob.
bool has_feature_maps(DetectorKind d) noexcept;

/// Discrete choices for every efficiency knob. All lists are sorted
/// ascending and duplicate-free; `validate()` enforces this.
struct KnobDomain {
  std::vector<DetectorKind> detectors;
  /// Only detectors with a settable resolution may appear here. A settable
  /// detector without an entry runs at its default resolution.
  std::map<DetectorKind, std::vector<int>> detector_resolutions;
  std::vector<int> proposal_counts;
  std::vector<std::vector<int>> feature_map_sets;
  std::vector<TrackerKind> trackers;
  std::vector<double> tracker_resize_factors;
  std::vector<double> confidence_thresholds;
  std::vector<int> detector_intervals;

  bool operator==(const KnobDomain&) const = default;
};

/// One execution branch: (d, rd, np, nm, t, rf, ct, i).
///
/// Interval 1 is a detector-only branch and carries no tracker-side knobs.
/// Interval > 1 carries all three tracker-side knobs.
struct BranchConfig {
  DetectorKind detector = DetectorKind::EffDetD0;
  std::optional<int> resolution;
  std::optional<int> proposals;
  std::optional<std::vector<int>> feature_maps;
  std::optional<TrackerKind> tracker;
  std::optional<double> tracker_resize;
  std::optional<double> confidence_threshold;
  int interval = 1;

  bool operator==(const BranchConfig&) const = default;
  bool detector_only() const noexcept { return interval == 1; }
};

/// Throws Error{InvalidArgument} when the branch breaks a dependency rule.
void validate(const BranchConfig& branch);

/// Throws Error{EmptyDomain} or Error{InvalidDomain}.
void validate(const KnobDomain& domain);

/// Canonical key, e.g. "d=ssd;rd=256;t=medianflow;rf=0.5;ct=0.15;i=8".
std::string branch_id(const BranchConfig& branch);

/// Inverse of branch_id. Rejects anything that is not the canonical form
/// with Error{ParseError}.
BranchConfig parse_branch_id(std::string_view id);

/// The same branch with interval 1 and the tracker-side knobs cleared; this
/// is the detector-side configuration whose detections an i > 1 branch reuses.
BranchConfig detector_side(const BranchConfig& branch);

/// Every valid branch of `domain` in a deterministic order: detector-side
/// configurations outermost, then interval, tracker, resize, threshold.
/// Tracker-side knobs collapse to a single branch when the interval is 1.
std::vector<BranchConfig> enumerate_branches(const KnobDomain& domain);

KnobDomain virtuoso_domain();
KnobDomain frcnn_plus_domain();
KnobDomain yolo_plus_domain();

/// Named presets: "virtuoso", "frcnn+", "yolo+".
KnobDomain preset_domain(std::string_view name);

KnobDomain domain_from_json(const nlohmann::json& j);
nlohmann::json domain_to_json(const KnobDomain& domain);
KnobDomain load_domain(const std::string& path);

enum class Knob { Detector, Resolution, Proposals, FeatureMaps, Tracker, Resize, Threshold, Interval };

std::string_view to_string(Knob k);
/// Accepts long names ("interval") and tuple symbols ("i").
Knob parse_knob(std::string_view name);

/// Single-knob restriction of `domain`: the chosen knob keeps its full list
/// and every other knob is pinned to one reference value taken from the
/// domain. Knobs owned by one detector family pin the detector to that
/// family. The result enumerates to a subset of the full domain.
KnobDomain ablate(const KnobDomain& domain, Knob knob);

/// Knobs with more than one choice in `domain`.
std::vector<Knob> active_knobs(const KnobDomain& domain);

}  // namespace adaptdet
