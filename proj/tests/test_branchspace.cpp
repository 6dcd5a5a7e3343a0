#include <doctest.h>

#include <algorithm>
#include <set>

#include "adaptdet/branchspace.hpp"
#include "adaptdet/error.hpp"

using namespace adaptdet;

namespace {

std::set<std::string> ids_of(const std::vector<BranchConfig>& branches) {
  std::set<std::string> ids;
  for (const auto& b : branches) ids.insert(branch_id(b));
  return ids;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("preset branch counts") {
  CHECK(enumerate_branches(virtuoso_domain()).size() == 155);
  CHECK(enumerate_branches(frcnn_plus_domain()).size() == 28);
  CHECK(enumerate_branches(yolo_plus_domain()).size() == 12);
}

TEST_CASE("virtuoso domain contents") {
  const auto d = virtuoso_domain();
  CHECK(d.detector_intervals == std::vector<int>{1, 2, 4, 8, 20, 100});
  CHECK(d.detector_resolutions.at(DetectorKind::SSD) == std::vector<int>{192, 256, 320});
  CHECK(d.trackers == std::vector<TrackerKind>{TrackerKind::MedianFlow});
  CHECK(d.tracker_resize_factors == std::vector<double>{0.25, 0.5, 1.0});
  CHECK(d.confidence_thresholds == std::vector<double>{0.15, 0.30});
  CHECK(d.proposal_counts.empty());
  CHECK(d.feature_map_sets.empty());
}

TEST_CASE("enumeration is duplicate-free, valid and stable") {
  for (const auto& domain : {virtuoso_domain(), frcnn_plus_domain(), yolo_plus_domain()}) {
    const auto a = enumerate_branches(domain);
    const auto b = enumerate_branches(domain);
    CHECK(a == b);
    CHECK(ids_of(a).size() == a.size());
    for (const auto& br : a) CHECK_NOTHROW(validate(br));
  }
}

TEST_CASE("interval-1 branches carry no tracker knobs") {
  for (const auto& b : enumerate_branches(virtuoso_domain())) {
    if (b.interval == 1) {
      CHECK_FALSE(b.tracker.has_value());
      CHECK_FALSE(b.tracker_resize.has_value());
      CHECK_FALSE(b.confidence_threshold.has_value());
    } else {
      CHECK(b.tracker.has_value());
    }
  }
}

TEST_CASE("canonical ids") {
  BranchConfig d0;
  d0.detector = DetectorKind::EffDetD0;
  CHECK(branch_id(d0) == "d=effdet-d0;i=1");

  BranchConfig ssd;
  ssd.detector = DetectorKind::SSD;
  ssd.resolution = 256;
  ssd.tracker = TrackerKind::MedianFlow;
  ssd.tracker_resize = 0.5;
  ssd.confidence_threshold = 0.15;
  ssd.interval = 8;
  CHECK(branch_id(ssd) == "d=ssd;rd=256;t=medianflow;rf=0.5;ct=0.15;i=8");
  CHECK(parse_branch_id(branch_id(ssd)) == ssd);
  CHECK(detector_side(ssd).interval == 1);
  CHECK(branch_id(detector_side(ssd)) == "d=ssd;rd=256;i=1");
}

TEST_CASE("ids round-trip over every preset branch") {
  for (const auto& domain : {virtuoso_domain(), frcnn_plus_domain(), yolo_plus_domain()})
    for (const auto& b : enumerate_branches(domain)) CHECK(parse_branch_id(branch_id(b)) == b);
}

TEST_CASE("malformed ids are rejected") {
  for (const char* bad : {"", "d=ssd", "d=nope;i=1", "i=1;d=ssd", "d=effdet-d0;i=0", "d=effdet-d0;i=1;",
                          "d=effdet-d0;rd=320;i=1", "d=ssd;rd=256;i=8", "d=effdet-d0;i=01",
                          "d=frcnn;rd=320;i=1", "d=ssd;rd=abc;i=1"}) {
    INFO(bad);
    CHECK(code_of([&] { parse_branch_id(bad); }) == ErrorCode::ParseError);
  }
}

TEST_CASE("restricting a knob list yields a subset") {
  const auto full = virtuoso_domain();
  const auto all = ids_of(enumerate_branches(full));

  auto sub = full;
  sub.detector_intervals = {1, 8, 100};
  sub.tracker_resize_factors = {0.5};
  const auto part = ids_of(enumerate_branches(sub));
  CHECK(std::includes(all.begin(), all.end(), part.begin(), part.end()));

  for (Knob k : active_knobs(full)) {
    const auto ab = ids_of(enumerate_branches(ablate(full, k)));
    CHECK(std::includes(all.begin(), all.end(), ab.begin(), ab.end()));
    CHECK(ab.size() < all.size());
  }
}

TEST_CASE("ablation keeps only the chosen knob free") {
  const auto abl = ablate(virtuoso_domain(), Knob::Interval);
  CHECK(abl.detector_intervals.size() == 6);
  CHECK(abl.detectors.size() == 1);
  CHECK(abl.tracker_resize_factors.size() == 1);
  CHECK(abl.confidence_thresholds.size() == 1);
  CHECK(enumerate_branches(abl).size() == 6);

  const auto res = ablate(virtuoso_domain(), Knob::Resolution);
  CHECK(res.detectors == std::vector<DetectorKind>{DetectorKind::SSD});
  CHECK(enumerate_branches(res).size() == 3);
}

TEST_CASE("domain validation") {
  auto d = virtuoso_domain();
  d.detectors.clear();
  CHECK(code_of([&] { enumerate_branches(d); }) == ErrorCode::EmptyDomain);

  d = virtuoso_domain();
  d.detector_intervals = {4, 2};
  CHECK(code_of([&] { validate(d); }) == ErrorCode::InvalidDomain);

  d = virtuoso_domain();
  d.detector_resolutions[DetectorKind::EffDetD0] = {512};
  CHECK(code_of([&] { validate(d); }) == ErrorCode::InvalidDomain);
}

TEST_CASE("domain JSON round trip") {
  for (const auto& domain : {virtuoso_domain(), frcnn_plus_domain(), yolo_plus_domain()}) {
    CHECK(domain_from_json(domain_to_json(domain)) == domain);
  }
  const auto j = nlohmann::json::parse(R"({
    "detectors": ["ssd"], "detector_resolutions": {"ssd": [320, 192]},
    "feature_maps": [[0,1,2], [0,1,2,3,4,5]],
    "trackers": ["kcf", "medianflow"], "tracker_resize": [1.0], "confidence_thresholds": [0.3],
    "intervals": [1, 4]})");
  const auto d = domain_from_json(j);
  CHECK(d.detector_resolutions.at(DetectorKind::SSD) == std::vector<int>{192, 320});
  // 2 resolutions x 2 feature-map sets x (1 + 2 trackers)
  CHECK(enumerate_branches(d).size() == 12);
}

TEST_CASE("knob names") {
  CHECK(parse_knob("i") == Knob::Interval);
  CHECK(parse_knob("interval") == Knob::Interval);
  CHECK(parse_knob("rf") == Knob::Resize);
  CHECK(code_of([] { parse_knob("bogus"); }) == ErrorCode::ParseError);
}
