#include "adaptdet/evalmetrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "adaptdet/error.hpp"
#include "adaptdet/io.hpp"

namespace adaptdet {

namespace {

void check_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) throw Error(ErrorCode::InvalidArgument, "IoU threshold must be in (0,1)");
}

// Indices sorted by descending confidence, stable in input order.
template <typename Range>
std::vector<std::size_t> by_confidence(const Range& boxes) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].confidence.value_or(0.0) > boxes[b].confidence.value_or(0.0);
  });
  return order;
}

}  // namespace

double iou(const DetectionBox& a, const DetectionBox& b) {
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

std::vector<std::size_t> nms_indices(std::span<const DetectionBox> boxes, double iou_threshold) {
  check_threshold(iou_threshold);
  const auto order = by_confidence(boxes);
  std::vector<bool> suppressed(boxes.size(), false);
  std::vector<std::size_t> kept;
  for (std::size_t a = 0; a < order.size(); ++a) {
    const std::size_t i = order[a];
    if (suppressed[i]) continue;
    kept.push_back(i);
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const std::size_t j = order[b];
      if (suppressed[j] || boxes[j].frame_id != boxes[i].frame_id || boxes[j].class_id != boxes[i].class_id) continue;
      if (iou(boxes[i], boxes[j]) >= iou_threshold) suppressed[j] = true;
    }
  }
  return kept;
}

std::vector<DetectionBox> nms(std::span<const DetectionBox> boxes, double iou_threshold) {
  std::vector<DetectionBox> kept;
  for (std::size_t i : nms_indices(boxes, iou_threshold)) kept.push_back(boxes[i]);
  return kept;
}

double average_precision(std::span<const DetectionBox> detections, std::span<const DetectionBox> ground_truth,
                         int class_id, double iou_threshold) {
  check_threshold(iou_threshold);
  std::vector<DetectionBox> gts;
  for (const auto& g : ground_truth)
    if (g.class_id == class_id) gts.push_back(g);
  if (gts.empty()) throw Error(ErrorCode::NoGroundTruth, "class " + std::to_string(class_id) + " has no ground truth");
  std::vector<DetectionBox> dets;
  for (const auto& d : detections)
    if (d.class_id == class_id) dets.push_back(d);

  std::map<long long, std::vector<std::size_t>> gt_by_frame;
  for (std::size_t g = 0; g < gts.size(); ++g) gt_by_frame[gts[g].frame_id].push_back(g);

  std::vector<bool> matched(gts.size(), false);
  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t k : by_confidence(dets)) {
    const auto& d = dets[k];
    std::size_t best = gts.size();
    double best_iou = iou_threshold;
    auto frame_gts = gt_by_frame.find(d.frame_id);
    const std::vector<std::size_t> none;
    for (std::size_t g : frame_gts == gt_by_frame.end() ? none : frame_gts->second) {
      if (matched[g]) continue;
      const double v = iou(d, gts[g]);
      if (v >= best_iou && (best == gts.size() || v > best_iou)) {
        best = g;
        best_iou = v;
      }
    }
    ++seen;
    if (best != gts.size()) {
      matched[best] = true;
      ++tp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(seen));
  }

  // Precision envelope from the right, then sum over recall steps.
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < recall.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

EvalResult mean_ap(std::span<const DetectionBox> detections, std::span<const DetectionBox> ground_truth,
                   double iou_threshold) {
  if (ground_truth.empty()) throw Error(ErrorCode::EmptyGroundTruth, "no ground-truth boxes");
  std::set<int> classes;
  for (const auto& g : ground_truth) classes.insert(g.class_id);
  EvalResult r;
  r.iou_threshold = iou_threshold;
  double sum = 0.0;
  for (int c : classes) {
    const double ap = average_precision(detections, ground_truth, c, iou_threshold);
    r.per_class_ap[c] = ap;
    sum += ap;
  }
  r.mean_ap = sum / static_cast<double>(classes.size());
  return r;
}

std::vector<DetectionBox> load_boxes_csv(const std::string& path) {
  auto table = io::read_csv(path);
  const std::vector<std::string> expected{"frame_id", "class_id", "xmin", "ymin", "xmax", "ymax"};
  if (table.header.size() < expected.size() ||
      !std::equal(expected.begin(), expected.end(), table.header.begin())) {
    throw Error(ErrorCode::ParseError, path + ": expected header 'frame_id,class_id,xmin,ymin,xmax,ymax[,confidence]'");
  }
  const bool with_conf = table.header.size() >= 7 && table.header[6] == "confidence";
  std::vector<DetectionBox> out;
  for (const auto& row : table.rows) {
    if (row.size() < expected.size() + (with_conf ? 1 : 0)) throw Error(ErrorCode::ParseError, path + ": short row");
    DetectionBox b;
    b.frame_id = io::parse_int(row[0]);
    b.class_id = static_cast<int>(io::parse_int(row[1]));
    b.x_min = io::parse_double(row[2]);
    b.y_min = io::parse_double(row[3]);
    b.x_max = io::parse_double(row[4]);
    b.y_max = io::parse_double(row[5]);
    if (with_conf) b.confidence = io::parse_double(row[6]);
    if (!(b.x_max > b.x_min && b.y_max > b.y_min)) {
      throw Error(ErrorCode::ParseError, path + ": box with non-positive extent");
    }
    out.push_back(b);
  }
  return out;
}

}  // namespace adaptdet
