#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adaptdet {

struct DetectionBox {
  long long frame_id = 0;
  int class_id = 0;
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  /// Absent for ground truth.
  std::optional<double> confidence;

  double area() const noexcept { return (x_max - x_min) * (y_max - y_min); }
  bool operator==(const DetectionBox&) const = default;
};

/// Intersection over union; 0 for disjoint boxes.
double iou(const DetectionBox& a, const DetectionBox& b);

/// Greedy non-max suppression within each (frame, class): keep the most
/// confident box, drop same-group boxes with IoU >= threshold, repeat.
/// Output is ordered by descending confidence, ties in input order.
std::vector<DetectionBox> nms(std::span<const DetectionBox> boxes, double iou_threshold);
/// Same as nms(), returning indices into `boxes`.
std::vector<std::size_t> nms_indices(std::span<const DetectionBox> boxes, double iou_threshold);

/// Area under the precision/recall curve for one class with all-point
/// interpolation. Detections are matched in descending confidence order to
/// the unmatched same-frame ground-truth box of highest IoU >= threshold.
/// Throws NoGroundTruth when the class has no ground-truth box.
double average_precision(std::span<const DetectionBox> detections, std::span<const DetectionBox> ground_truth,
                         int class_id, double iou_threshold);

struct EvalResult {
  std::map<int, double> per_class_ap;
  double mean_ap = 0.0;
  double iou_threshold = 0.5;
};

/// Mean AP over classes present in the ground truth. Throws EmptyGroundTruth.
EvalResult mean_ap(std::span<const DetectionBox> detections, std::span<const DetectionBox> ground_truth,
                   double iou_threshold = 0.5);

/// CSV `frame_id,class_id,xmin,ymin,xmax,ymax[,confidence]` with header.
std::vector<DetectionBox> load_boxes_csv(const std::string& path);

}  // namespace adaptdet
