#include "adaptdet/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "adaptdet/error.hpp"
#include "adaptdet/io.hpp"

namespace adaptdet {

void validate(const Budget& budget) {
  auto check = [](const std::optional<double>& v, const char* what) {
    if (v && !(*v > 0.0 && std::isfinite(*v))) {
      throw Error(ErrorCode::InvalidBudget, std::string(what) + " bound must be a positive number");
    }
  };
  check(budget.energy_j_per_frame, "energy");
  check(budget.latency_ms_per_frame, "latency");
}

std::vector<Candidate> evaluate_branches(const ProfileStore& store, std::span<const BranchConfig> branches,
                                         const RuntimeContext& ctx, const PredictOptions& opts) {
  std::vector<Candidate> out;
  out.reserve(branches.size());
  for (const auto& b : branches) {
    Candidate c{b, branch_id(b), {}};
    const bool stored = is_contention_level(ctx.contention);
    if (stored) {
      c.metrics = predict_metrics(store.at(c.branch_id, ctx), b, opts);
    } else {
      c.metrics = predict_metrics(store, b, ctx, opts);
    }
    out.push_back(std::move(c));
  }
  return out;
}

bool preferred(const PredictedMetrics& a, std::string_view id_a, const PredictedMetrics& b, std::string_view id_b) {
  if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
  if (a.energy_j_per_frame != b.energy_j_per_frame) return a.energy_j_per_frame < b.energy_j_per_frame;
  if (a.latency_ms_per_frame != b.latency_ms_per_frame) return a.latency_ms_per_frame < b.latency_ms_per_frame;
  return id_a < id_b;
}

ScheduleDecision schedule(const ProfileStore& store, std::span<const BranchConfig> branches, const RuntimeContext& ctx,
                          const Budget& budget, const ScheduleOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  validate(budget);
  if (branches.empty()) throw Error(ErrorCode::EmptyDomain, "no branches to schedule");

  const auto candidates = evaluate_branches(store, branches, ctx, opts.predict);

  const Candidate* best = nullptr;
  const Candidate* fastest = nullptr;
  int feasible = 0;
  double min_energy = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    min_energy = std::min(min_energy, c.metrics.energy_j_per_frame);
    if (!fastest || c.metrics.latency_ms_per_frame < fastest->metrics.latency_ms_per_frame ||
        (c.metrics.latency_ms_per_frame == fastest->metrics.latency_ms_per_frame &&
         (c.metrics.energy_j_per_frame < fastest->metrics.energy_j_per_frame ||
          (c.metrics.energy_j_per_frame == fastest->metrics.energy_j_per_frame && c.branch_id < fastest->branch_id)))) {
      fastest = &c;
    }
    if (!budget.admits(c.metrics)) continue;
    ++feasible;
    if (!best || preferred(c.metrics, c.branch_id, best->metrics, best->branch_id)) best = &c;
  }

  ScheduleDecision d;
  if (!best) {
    if (!opts.fallback_closest) {
      throw NoFeasibleBranchError(fastest->metrics.latency_ms_per_frame, min_energy,
                                  "no branch meets the budget (min latency " +
                                      io::format_double(fastest->metrics.latency_ms_per_frame) + " ms, min energy " +
                                      io::format_double(min_energy) + " J per frame)");
    }
    best = fastest;
    d.fallback = true;
  }
  d.branch = best->branch;
  d.branch_id = best->branch_id;
  d.predicted = best->metrics;
  d.feasible_count = feasible;
  d.decision_time_us =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  return d;
}

ScheduleDecision schedule(const ProfileStore& store, const KnobDomain& domain, const RuntimeContext& ctx,
                          const Budget& budget, const ScheduleOptions& opts) {
  const auto branches = enumerate_branches(domain);
  return schedule(store, branches, ctx, budget, opts);
}

ScheduleDecision reschedule_on_context_change(const ScheduleDecision& prev, const ProfileStore& store,
                                              std::span<const BranchConfig> branches, const RuntimeContext& new_ctx,
                                              const Budget& budget, const ScheduleOptions& opts) {
  ScheduleDecision next = schedule(store, branches, new_ctx, budget, opts);
  if (next.branch_id == prev.branch_id) return prev;
  return next;
}

std::string_view to_string(CostObjective objective) {
  return objective == CostObjective::Latency ? "latency" : "energy";
}

CostObjective parse_objective(std::string_view name) {
  if (name == "latency") return CostObjective::Latency;
  if (name == "energy") return CostObjective::Energy;
  throw Error(ErrorCode::ParseError, "unknown objective '" + std::string(name) + "'");
}

double cost_of(const PredictedMetrics& m, CostObjective objective) noexcept {
  return objective == CostObjective::Latency ? m.latency_ms_per_frame : m.energy_j_per_frame;
}

bool dominates(const PredictedMetrics& a, const PredictedMetrics& b, CostObjective objective) noexcept {
  const double ca = cost_of(a, objective);
  const double cb = cost_of(b, objective);
  return ca <= cb && a.accuracy >= b.accuracy && (ca < cb || a.accuracy > b.accuracy);
}

std::vector<FrontierPoint> pareto_filter(std::vector<Candidate> candidates, CostObjective objective) {
  const CostObjective other = objective == CostObjective::Latency ? CostObjective::Energy : CostObjective::Latency;
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    const double ca = cost_of(a.metrics, objective);
    const double cb = cost_of(b.metrics, objective);
    if (ca != cb) return ca < cb;
    if (a.metrics.accuracy != b.metrics.accuracy) return a.metrics.accuracy > b.metrics.accuracy;
    const double oa = cost_of(a.metrics, other);
    const double ob = cost_of(b.metrics, other);
    if (oa != ob) return oa < ob;
    return a.branch_id < b.branch_id;
  });
  std::vector<FrontierPoint> out;
  double best_accuracy = -std::numeric_limits<double>::infinity();
  for (auto& c : candidates) {
    if (c.metrics.accuracy > best_accuracy) {
      best_accuracy = c.metrics.accuracy;
      out.push_back({std::move(c.branch), std::move(c.branch_id), c.metrics});
    }
  }
  return out;
}

std::vector<FrontierPoint> pareto_frontier(const ProfileStore& store, std::span<const BranchConfig> branches,
                                           const RuntimeContext& ctx, CostObjective objective,
                                           const PredictOptions& opts) {
  return pareto_filter(evaluate_branches(store, branches, ctx, opts), objective);
}

std::vector<FrontierPoint> pareto_frontier(const ProfileStore& store, const KnobDomain& domain,
                                           const RuntimeContext& ctx, CostObjective objective,
                                           const PredictOptions& opts) {
  const auto branches = enumerate_branches(domain);
  return pareto_frontier(store, branches, ctx, objective, opts);
}

}  // namespace adaptdet
