#include <doctest.h>

#include <random>

#include "adaptdet/error.hpp"
#include "adaptdet/scheduler.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace adaptdet;

namespace {

const RuntimeContext kCtx{Device::Synthetic, 0, 0.0};

// Three detector-only branches with hand-picked metrics.
struct Abc {
  std::vector<BranchConfig> branches;
  ProfileStore store;
};

Abc abc_store() {
  Abc s;
  std::vector<BranchProfile> ps;
  const struct {
    DetectorKind d;
    double a, e, l;
  } rows[] = {{DetectorKind::EffDetD0, 0.5, 1.0, 10.0},
              {DetectorKind::SSD, 0.6, 2.0, 20.0},
              {DetectorKind::EffDetD3, 0.7, 5.0, 50.0}};
  for (const auto& r : rows) {
    BranchConfig b;
    b.detector = r.d;
    if (r.d == DetectorKind::SSD) b.resolution = 320;
    BranchProfile p;
    p.branch_id = branch_id(b);
    p.context = kCtx;
    p.detector_latency_ms = r.l;
    p.accuracy = r.a;
    p.energy_per_frame_j = r.e;
    ps.push_back(p);
    s.branches.push_back(b);
  }
  s.store = ProfileStore(ps);
  return s;
}

Budget budget(std::optional<double> e, std::optional<double> l) { return Budget{e, l}; }

}  // namespace

TEST_CASE("hand-worked schedule") {
  const auto s = abc_store();
  const auto d = schedule(s.store, s.branches, kCtx, budget(3.0, 30.0));
  CHECK(d.branch_id == "d=ssd;rd=320;i=1");
  CHECK(d.feasible_count == 2);
  CHECK(d.decision_time_us >= 0.0);
  CHECK(schedule(s.store, s.branches, kCtx, budget(std::nullopt, std::nullopt)).branch.detector ==
        DetectorKind::EffDetD3);

  try {
    schedule(s.store, s.branches, kCtx, budget(0.1, 1.0));
    FAIL("expected NoFeasibleBranch");
  } catch (const NoFeasibleBranchError& e) {
    CHECK(e.min_latency_ms() == 10.0);
    CHECK(e.min_energy_j() == 1.0);
  }

  ScheduleOptions fb;
  fb.fallback_closest = true;
  const auto closest = schedule(s.store, s.branches, kCtx, budget(0.1, 1.0), fb);
  CHECK(closest.fallback);
  CHECK(closest.feasible_count == 0);
  CHECK(closest.branch.detector == DetectorKind::EffDetD0);

  CHECK_THROWS_AS(schedule(s.store, s.branches, kCtx, budget(-1.0, std::nullopt)), Error);
}

TEST_CASE("tie-break order") {
  const PredictedMetrics a{10.0, 1.0, 0.5};
  CHECK(preferred({20.0, 2.0, 0.6}, "z", a, "a"));
  CHECK(preferred({20.0, 0.5, 0.5}, "z", a, "a"));
  CHECK(preferred({5.0, 1.0, 0.5}, "z", a, "a"));
  CHECK(preferred(a, "a", a, "b"));
  CHECK_FALSE(preferred(a, "b", a, "a"));
}

TEST_CASE("oracle equivalence on random stores") {
  const auto domain = virtuoso_domain();
  const auto branches = enumerate_branches(domain);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> e(0.05, 3.0), l(1.0, 120.0);
  std::uniform_int_distribution<int> which(0, 3);
  for (std::uint64_t seed : {1u, 2u}) {
    const auto store = support::random_store(domain, {kCtx}, seed);
    PredictOptions po;
    po.tracked_objects = 3.0;
    const auto cands = evaluate_branches(store, branches, kCtx, po);
    for (int q = 0; q < 150; ++q) {
      const int w = which(rng);
      Budget b{w & 1 ? std::optional<double>(e(rng)) : std::nullopt,
               w & 2 ? std::optional<double>(l(rng)) : std::nullopt};
      if (w == 0) b.energy_j_per_frame = e(rng);
      const auto expect = oracle::argmax(cands, b);
      ScheduleOptions so;
      so.predict = po;
      try {
        const auto d = schedule(store, branches, kCtx, b, so);
        REQUIRE(expect.has_value());
        CHECK(d.branch_id == *expect);
        CHECK(b.admits(d.predicted));
      } catch (const NoFeasibleBranchError&) {
        CHECK_FALSE(expect.has_value());
      }
    }
  }
}

TEST_CASE("relaxing a budget never lowers accuracy") {
  const auto domain = virtuoso_domain();
  const auto branches = enumerate_branches(domain);
  const auto store = support::random_store(domain, {kCtx}, 4);
  ScheduleOptions so;
  so.predict.tracked_objects = 2.0;
  for (double l0 : {15.0, 40.0, 100.0}) {
    double prev = -1.0;
    for (double e0 = 0.05; e0 < 3.2; e0 += 0.15) {
      try {
        const double acc = schedule(store, branches, kCtx, budget(e0, l0), so).predicted.accuracy;
        CHECK(acc >= prev);
        prev = acc;
      } catch (const NoFeasibleBranchError&) {
        CHECK(prev < 0.0);
      }
    }
  }
}

TEST_CASE("frontier equals the quadratic filter") {
  const auto domain = virtuoso_domain();
  const auto branches = enumerate_branches(domain);
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const auto store = support::random_store(domain, {kCtx}, seed);
    PredictOptions po;
    po.tracked_objects = 4.0;
    const auto cands = evaluate_branches(store, branches, kCtx, po);
    for (auto obj : {CostObjective::Latency, CostObjective::Energy}) {
      const auto front = pareto_frontier(store, branches, kCtx, obj, po);
      std::vector<std::string> ids;
      for (const auto& p : front) ids.push_back(p.branch_id);
      CHECK(ids == oracle::frontier_ids(cands, obj));
      for (std::size_t i = 1; i < front.size(); ++i) {
        CHECK(cost_of(front[i].metrics, obj) > cost_of(front[i - 1].metrics, obj));
        CHECK(front[i].metrics.accuracy > front[i - 1].metrics.accuracy);
      }
    }
  }
}

TEST_CASE("one dominating branch gives a frontier of one") {
  const auto s = abc_store();
  std::vector<Candidate> c{{s.branches[0], "a", {10.0, 1.0, 0.9}}, {s.branches[1], "b", {20.0, 2.0, 0.5}}};
  const auto f = pareto_filter(c, CostObjective::Latency);
  REQUIRE(f.size() == 1);
  CHECK(f[0].branch_id == "a");
}

TEST_CASE("rescheduling keeps a still-optimal decision") {
  const auto s = abc_store();
  const auto d = schedule(s.store, s.branches, kCtx, budget(3.0, 30.0));
  const auto again = reschedule_on_context_change(d, s.store, s.branches, kCtx, budget(3.0, 30.0));
  CHECK(again.branch_id == d.branch_id);
  CHECK(again.decision_time_us == d.decision_time_us);
  CHECK_THROWS_AS(reschedule_on_context_change(d, s.store, s.branches, kCtx, budget(0.1, 1.0)),
                  NoFeasibleBranchError);
}

TEST_CASE("contention doubling forces a lighter branch") {
  const auto domain = virtuoso_domain();
  const auto branches = enumerate_branches(domain);
  const RuntimeContext c50{Device::Synthetic, 0, 50.0};
  const auto store = support::random_store(domain, {kCtx, c50}, 17);
  ScheduleOptions so;
  so.predict.tracked_objects = 2.0;
  const Budget b = budget(std::nullopt, 33.3);
  const auto before = schedule(store, branches, kCtx, b, so);
  const auto after = reschedule_on_context_change(before, store, branches, c50, b, so);
  CHECK(after.predicted.latency_ms_per_frame <= 33.3);
  if (before.predicted.latency_ms_per_frame * 2.0 > 33.3) CHECK(after.branch_id != before.branch_id);
}
