#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptdet/branchspace.hpp"
#include "adaptdet/models.hpp"
#include "adaptdet/profiles.hpp"

namespace adaptdet {

/// Per-frame user constraints. An absent bound is unconstrained.
struct Budget {
  std::optional<double> energy_j_per_frame;
  std::optional<double> latency_ms_per_frame;

  bool admits(const PredictedMetrics& m) const noexcept {
    return (!energy_j_per_frame || m.energy_j_per_frame <= *energy_j_per_frame) &&
           (!latency_ms_per_frame || m.latency_ms_per_frame <= *latency_ms_per_frame);
  }
  bool operator==(const Budget&) const = default;
};

/// Throws Error{InvalidBudget} for a non-positive bound.
void validate(const Budget& budget);

struct ScheduleOptions {
  PredictOptions predict;
  /// On an infeasible budget, return the minimum-latency branch instead of
  /// throwing. The decision then has feasible_count 0 and fallback set.
  bool fallback_closest = false;
};

struct ScheduleDecision {
  BranchConfig branch;
  std::string branch_id;
  PredictedMetrics predicted;
  int feasible_count = 0;
  double decision_time_us = 0.0;
  bool fallback = false;
};

/// A branch with its predicted metrics under one context.
struct Candidate {
  BranchConfig branch;
  std::string branch_id;
  PredictedMetrics metrics;
};

std::vector<Candidate> evaluate_branches(const ProfileStore& store, std::span<const BranchConfig> branches,
                                         const RuntimeContext& ctx, const PredictOptions& opts);

/// Selection order among feasible branches: higher accuracy, then lower
/// energy, then lower latency, then the lexicographically smaller id.
bool preferred(const PredictedMetrics& a, std::string_view id_a, const PredictedMetrics& b, std::string_view id_b);

/// Most accurate branch within `budget`. Throws NoFeasibleBranchError
/// carrying the smallest achievable latency and energy, unless
/// `opts.fallback_closest` is set.
ScheduleDecision schedule(const ProfileStore& store, std::span<const BranchConfig> branches, const RuntimeContext& ctx,
                          const Budget& budget, const ScheduleOptions& opts = {});
ScheduleDecision schedule(const ProfileStore& store, const KnobDomain& domain, const RuntimeContext& ctx,
                          const Budget& budget, const ScheduleOptions& opts = {});

/// Schedules under `new_ctx` and keeps `prev` untouched when the same branch
/// is still the best choice.
ScheduleDecision reschedule_on_context_change(const ScheduleDecision& prev, const ProfileStore& store,
                                              std::span<const BranchConfig> branches, const RuntimeContext& new_ctx,
                                              const Budget& budget, const ScheduleOptions& opts = {});

enum class CostObjective { Latency, Energy };

std::string_view to_string(CostObjective objective);
CostObjective parse_objective(std::string_view name);

double cost_of(const PredictedMetrics& m, CostObjective objective) noexcept;

/// `a` weakly dominates `b`: no more cost, no less accuracy, and strictly
/// better in one of the two.
bool dominates(const PredictedMetrics& a, const PredictedMetrics& b, CostObjective objective) noexcept;

struct FrontierPoint {
  BranchConfig branch;
  std::string branch_id;
  PredictedMetrics metrics;
};

/// Non-dominated subset of `candidates`, sorted by ascending cost with
/// strictly increasing accuracy. Among points with identical (cost,
/// accuracy) only the first by (other cost, id) is kept.
std::vector<FrontierPoint> pareto_filter(std::vector<Candidate> candidates, CostObjective objective);

std::vector<FrontierPoint> pareto_frontier(const ProfileStore& store, std::span<const BranchConfig> branches,
                                           const RuntimeContext& ctx, CostObjective objective,
                                           const PredictOptions& opts = {});
std::vector<FrontierPoint> pareto_frontier(const ProfileStore& store, const KnobDomain& domain,
                                           const RuntimeContext& ctx, CostObjective objective,
                                           const PredictOptions& opts = {});

}  // namespace adaptdet
