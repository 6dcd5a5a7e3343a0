#include "adaptdet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "adaptdet/contention.hpp"
#include "adaptdet/error.hpp"
#include "adaptdet/evalmetrics.hpp"
#include "adaptdet/io.hpp"
#include "adaptdet/models.hpp"
#include "adaptdet/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace adaptdet::cli {

namespace {

std::string resolve(const std::string& base_dir, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute()) return path.string();
  return (fs::path(base_dir) / path).lexically_normal().string();
}

[[noreturn]] void scenario_error(const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, "scenario: " + what);
}

Budget budget_from_json(const json& j) {
  Budget b;
  if (!j.is_object()) scenario_error("budget must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "energy_j_per_frame" || key == "e0") {
      if (!value.is_null()) b.energy_j_per_frame = value.get<double>();
    } else if (key == "latency_ms_per_frame" || key == "l0") {
      if (!value.is_null()) b.latency_ms_per_frame = value.get<double>();
    } else {
      scenario_error("unknown budget key '" + key + "'");
    }
  }
  validate(b);
  return b;
}

json budget_to_json(const Budget& b) {
  json j = json::object();
  j["energy_j_per_frame"] = b.energy_j_per_frame ? json(*b.energy_j_per_frame) : json(nullptr);
  j["latency_ms_per_frame"] = b.latency_ms_per_frame ? json(*b.latency_ms_per_frame) : json(nullptr);
  return j;
}

RuntimeContext context_entry(const json& j) {
  if (j.is_string()) return parse_context_label(j.get<std::string>());
  return context_from_json(j);
}

KnobDomain domain_entry(const json& j, const std::string& base_dir) {
  if (j.is_object()) return domain_from_json(j);
  const auto name = j.get<std::string>();
  if (name == "virtuoso" || name == "frcnn+" || name == "yolo+") return preset_domain(name);
  return load_domain(resolve(base_dir, name));
}

SyntheticKernelSpec kernel_entry(const json& j, const std::string& base_dir, Device fallback) {
  if (j.is_object()) return kernel_from_json(j);
  const auto spec = j.get<std::string>();
  if (spec == "builtin") return default_kernel(fallback);
  if (spec.rfind("builtin:", 0) == 0) return default_kernel(parse_device(spec.substr(8)));
  const auto path = resolve(base_dir, spec);
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, "kernel spec not found: '" + path + "'");
  return load_kernel(path);
}

}  // namespace

Scenario scenario_from_json(const json& j, const std::string& base_dir) {
  Scenario s;
  try {
    if (!j.is_object()) scenario_error("document must be an object");
    static const std::set<std::string> known{"name",         "seed",          "domain",          "kernel",
                                             "contexts",     "budgets",       "frames",          "profile_frames",
                                             "ablation",     "objective",     "tracked_objects", "profiles",
                                             "output_dir",   "simulate"};
    for (const auto& [key, value] : j.items())
      if (!known.count(key)) scenario_error("unknown key '" + key + "'");

    s.name = j.value("name", s.name);
    if (!j.contains("seed")) scenario_error("'seed' is required");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.domain = domain_entry(j.value("domain", json("virtuoso")), base_dir);

    if (!j.contains("contexts") || j.at("contexts").empty()) scenario_error("at least one context is required");
    for (const auto& c : j.at("contexts")) s.contexts.push_back(context_entry(c));
    if (!j.contains("budgets") || j.at("budgets").empty()) scenario_error("at least one budget is required");
    for (const auto& b : j.at("budgets")) s.budgets.push_back(budget_from_json(b));

    s.kernel = kernel_entry(j.value("kernel", json("builtin")), base_dir, s.contexts.front().device);
    for (const auto& c : s.contexts) {
      validate(c, false);
      if (c.device != s.kernel.device) {
        throw Error(ErrorCode::KernelCoverage, "kernel models " + std::string(to_string(s.kernel.device)) +
                                                   " but a context is on " + std::string(to_string(c.device)));
      }
    }

    s.frames = j.value("frames", s.frames);
    s.profile_frames = j.value("profile_frames", s.profile_frames);
    if (s.frames < 1 || s.profile_frames < 1) scenario_error("frame counts must be positive");
    if (j.contains("ablation") && !j.at("ablation").is_null())
      s.ablation = parse_knob(j.at("ablation").get<std::string>());
    if (j.contains("objective")) s.objective = parse_objective(j.at("objective").get<std::string>());
    if (j.contains("tracked_objects") && !j.at("tracked_objects").is_null()) {
      s.tracked_objects = j.at("tracked_objects").get<double>();
      if (!(*s.tracked_objects >= 0.0)) scenario_error("tracked_objects must be >= 0");
    }
    if (j.contains("profiles")) s.profiles_path = resolve(base_dir, j.at("profiles").get<std::string>());
    if (j.contains("output_dir")) s.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());

    if (j.contains("simulate")) {
      const auto& sj = j.at("simulate");
      static const std::set<std::string> sim_keys{"initial_branch", "budget", "contention_steps", "frame_rate_hz",
                                                  "evaluate_accuracy"};
      for (const auto& [key, value] : sj.items())
        if (!sim_keys.count(key)) scenario_error("unknown simulate key '" + key + "'");
      if (sj.contains("initial_branch")) {
        s.initial_branch = sj.at("initial_branch").get<std::string>();
        parse_branch_id(*s.initial_branch);
      }
      if (sj.contains("budget")) s.simulate_budget = budget_from_json(sj.at("budget"));
      for (const auto& step : sj.value("contention_steps", json::array())) {
        s.contention_steps.push_back({step.at("frame").get<long long>(), step.at("contention").get<double>()});
      }
      if (sj.contains("frame_rate_hz")) s.frame_rate_hz = sj.at("frame_rate_hz").get<double>();
      s.evaluate_accuracy = sj.value("evaluate_accuracy", s.evaluate_accuracy);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("scenario: ") + e.what());
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  const auto base = fs::path(path).parent_path().string();
  return scenario_from_json(io::read_json(path), base.empty() ? "." : base);
}

namespace {

struct Flags {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string ablate;
  std::string objective;
  bool net_energy = false;
  bool fallback_closest = false;
  bool timing = false;
  bool svg = false;

  // contend
  double level = 50.0;
  double duration = 2.0;
  int workers = 1;
  std::string calibration;
  // eval-map
  std::string detections;
  std::string ground_truth;
  double iou = 0.5;
};

/// Failures a verifier or a self-check detects in the tool's own outputs.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Run {
  Scenario scenario;
  std::string out_dir;
  std::vector<BranchConfig> branches;
};

Run prepare(const Flags& f) {
  if (f.scenario.empty()) throw Error(ErrorCode::InvalidArgument, "--scenario is required");
  Run r;
  r.scenario = load_scenario(f.scenario);
  if (f.seed) r.scenario.seed = *f.seed;
  if (!f.ablate.empty() && f.ablate != "all") r.scenario.ablation = parse_knob(f.ablate);
  if (!f.objective.empty()) r.scenario.objective = parse_objective(f.objective);
  r.out_dir = f.out.empty() ? r.scenario.output_dir : f.out;
  r.branches = enumerate_branches(r.scenario.domain);
  return r;
}

std::string out_path(const Run& r, const std::string& name) { return (fs::path(r.out_dir) / name).string(); }

ProfileStore obtain_profiles(const Run& r, std::ostream& log) {
  std::string path;
  if (r.scenario.profiles_path) {
    path = *r.scenario.profiles_path;
  } else if (fs::exists(out_path(r, "profiles.json"))) {
    path = out_path(r, "profiles.json");
  }
  if (!path.empty()) return load_profiles(path, &r.scenario.domain);
  log << "no profile file found; profiling in memory\n";
  ProfilingOptions po;
  po.frames = r.scenario.profile_frames;
  po.seed = r.scenario.seed;
  return generate_profiles(r.scenario.domain, r.scenario.contexts, r.scenario.kernel, po);
}

PredictOptions predict_options(const Run& r, const RuntimeContext& ctx, bool net_energy) {
  PredictOptions po;
  if (r.scenario.tracked_objects) {
    po.tracked_objects = *r.scenario.tracked_objects;
  } else {
    const SyntheticKernelSpec* kernel = &r.scenario.kernel;
    po.tracked_objects_fn = [kernel](const BranchConfig& b) { return expected_tracked_objects(*kernel, b); };
  }
  if (net_energy) po.idle_watts = mode_idle_power_w(r.scenario.kernel, ctx.power_mode);
  return po;
}

std::string opt_num(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }

// ---------------------------------------------------------------- profile

int cmd_profile(const Flags& f, std::ostream& out) {
  const Run r = prepare(f);
  ProfilingOptions po;
  po.frames = r.scenario.profile_frames;
  po.seed = r.scenario.seed;
  std::vector<RuntimeContext> contexts = r.scenario.contexts;
  for (const auto& c : contexts) validate(c, true);
  const ProfileStore store = generate_profiles(r.scenario.domain, contexts, r.scenario.kernel, po);
  const auto path = out_path(r, "profiles.json");
  save_profiles(store, path);
  out << "profiled " << r.branches.size() << " branches x " << contexts.size() << " contexts = " << store.size()
      << " entries -> " << path << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- schedule

int cmd_schedule(const Flags& f, std::ostream& out, std::ostream& err) {
  const Run r = prepare(f);
  const ProfileStore store = obtain_profiles(r, err);

  std::ostringstream csv;
  csv << "context,budget_e0,budget_l0,branch_id,pred_latency_ms,pred_energy_j,pred_accuracy,feasible_count,"
         "decision_us\n";
  int feasible_rows = 0;
  int rows = 0;
  double max_us = 0.0;
  double sum_us = 0.0;
  for (const auto& ctx : r.scenario.contexts) {
    ScheduleOptions so;
    so.predict = predict_options(r, ctx, f.net_energy);
    so.fallback_closest = f.fallback_closest;
    for (const auto& budget : r.scenario.budgets) {
      ++rows;
      csv << context_label(ctx) << ',' << opt_num(budget.energy_j_per_frame) << ','
          << opt_num(budget.latency_ms_per_frame) << ',';
      try {
        const auto d = schedule(store, r.branches, ctx, budget, so);
        if (d.feasible_count > 0) {
          ++feasible_rows;
          if (!budget.admits(d.predicted)) throw InvariantViolation("scheduled branch violates its budget");
        }
        max_us = std::max(max_us, d.decision_time_us);
        sum_us += d.decision_time_us;
        csv << d.branch_id << ',' << io::format_double(d.predicted.latency_ms_per_frame) << ','
            << io::format_double(d.predicted.energy_j_per_frame) << ',' << io::format_double(d.predicted.accuracy)
            << ',' << d.feasible_count << ',' << (f.timing ? io::format_double(d.decision_time_us) : "0") << '\n';
      } catch (const NoFeasibleBranchError& e) {
        csv << "NONE,,,," << 0 << ",0\n";
        err << context_label(ctx) << ": infeasible (min latency " << io::format_double(e.min_latency_ms())
            << " ms, min energy " << io::format_double(e.min_energy_j()) << " J)\n";
      }
    }
  }
  const auto path = out_path(r, "schedule.csv");
  io::write_file_atomic(path, csv.str());
  out << rows << " schedule rows (" << feasible_rows << " feasible) -> " << path << "\n";
  if (f.timing) {
    out << "decision time: mean " << io::format_double(sum_us / std::max(1, rows)) << " us, max "
        << io::format_double(max_us) << " us\n";
  }
  // With the fallback every row names a branch, so only a bare sweep can be infeasible.
  return feasible_rows == 0 && !f.fallback_closest ? kExitInfeasible : kExitOk;
}

// --------------------------------------------------------------- frontier

struct FrontierSet {
  std::string knobs;
  std::vector<FrontierPoint> points;
};

int cmd_frontier(const Flags& f, std::ostream& out, std::ostream& err) {
  const Run r = prepare(f);
  const ProfileStore store = obtain_profiles(r, err);
  const CostObjective objective = r.scenario.objective;

  std::vector<Knob> ablations;
  if (f.ablate == "all") {
    ablations = active_knobs(r.scenario.domain);
  } else if (r.scenario.ablation) {
    ablations.push_back(*r.scenario.ablation);
  }

  std::ostringstream csv;
  csv << "context,objective,knobs,branch_id,latency_ms,energy_j,accuracy\n";
  std::size_t total = 0;
  for (std::size_t ci = 0; ci < r.scenario.contexts.size(); ++ci) {
    const auto& ctx = r.scenario.contexts[ci];
    const PredictOptions po = predict_options(r, ctx, f.net_energy);
    std::vector<FrontierSet> sets;
    sets.push_back({"all", pareto_frontier(store, r.branches, ctx, objective, po)});
    for (Knob k : ablations) {
      const auto sub = enumerate_branches(ablate(r.scenario.domain, k));
      sets.push_back({std::string(to_string(k)), pareto_frontier(store, sub, ctx, objective, po)});
    }

    for (std::size_t si = 1; si < sets.size(); ++si) {
      for (const auto& p : sets[si].points) {
        const bool covered = std::any_of(sets[0].points.begin(), sets[0].points.end(), [&](const FrontierPoint& q) {
          return cost_of(q.metrics, objective) <= cost_of(p.metrics, objective) && q.metrics.accuracy >= p.metrics.accuracy;
        });
        if (!covered) throw InvariantViolation("multi-knob frontier misses ablated point " + p.branch_id);
      }
    }

    for (const auto& set : sets) {
      for (const auto& p : set.points) {
        csv << context_label(ctx) << ',' << to_string(objective) << ',' << set.knobs << ',' << p.branch_id << ','
            << io::format_double(p.metrics.latency_ms_per_frame) << ','
            << io::format_double(p.metrics.energy_j_per_frame) << ',' << io::format_double(p.metrics.accuracy)
            << '\n';
        ++total;
      }
    }

    if (f.svg) {
      plot::Chart chart;
      chart.title = "Frontier " + context_label(ctx);
      chart.x_label = objective == CostObjective::Latency ? "latency (ms/frame)" : "energy (J/frame)";
      chart.y_label = "accuracy";
      for (const auto& set : sets) {
        plot::Series s{set.knobs, {}, true};
        for (const auto& p : set.points) s.points.emplace_back(cost_of(p.metrics, objective), p.metrics.accuracy);
        chart.series.push_back(std::move(s));
      }
      io::write_file_atomic(out_path(r, "frontier-" + std::to_string(ci) + ".svg"), plot::render_svg(chart));
    }
  }
  const auto path = out_path(r, "frontier.csv");
  io::write_file_atomic(path, csv.str());
  out << total << " frontier rows over " << r.scenario.contexts.size() << " contexts -> " << path << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- simulate

int cmd_simulate(const Flags& f, std::ostream& out, std::ostream& err) {
  const Run r = prepare(f);
  const ProfileStore store = obtain_profiles(r, err);
  const Budget budget = r.scenario.simulate_budget.value_or(r.scenario.budgets.front());
  const RuntimeContext& ctx0 = r.scenario.contexts.front();

  ScheduleOptions so;
  so.fallback_closest = f.fallback_closest;
  long long infeasible_gofs = 0;
  struct Pick {
    std::optional<BranchConfig> branch;
    bool feasible = false;
  };
  std::map<RuntimeContext, Pick> cache;
  auto decide = [&](const RuntimeContext& ctx) -> const Pick& {
    if (auto it = cache.find(ctx); it != cache.end()) return it->second;
    ScheduleOptions local = so;
    local.predict = predict_options(r, ctx, f.net_energy);
    Pick pick;
    try {
      const auto d = schedule(store, r.branches, ctx, budget, local);
      pick.branch = d.branch;
      pick.feasible = !d.fallback;
    } catch (const NoFeasibleBranchError&) {
    }
    return cache.emplace(ctx, std::move(pick)).first->second;
  };

  BranchConfig initial;
  if (r.scenario.initial_branch) {
    initial = parse_branch_id(*r.scenario.initial_branch);
  } else if (const auto& pick = decide(ctx0); pick.branch) {
    initial = *pick.branch;
  } else {
    ScheduleOptions closest;
    closest.predict = predict_options(r, ctx0, f.net_energy);
    closest.fallback_closest = true;
    initial = schedule(store, r.branches, ctx0, budget, closest).branch;
  }

  SimulateOptions opts;
  opts.seed = r.scenario.seed;
  opts.contention_steps = r.scenario.contention_steps;
  opts.frame_rate_hz = r.scenario.frame_rate_hz;
  opts.evaluate_accuracy = r.scenario.evaluate_accuracy;
  opts.schedule_hook = [&](const GofBoundary& b) -> std::optional<BranchConfig> {
    const auto& pick = decide(b.context);
    if (!pick.feasible) ++infeasible_gofs;
    return pick.branch;
  };
  const auto result = simulate_stream(initial, ctx0, r.scenario.kernel, r.scenario.frames, opts);

  // Closure of the summary against the emitted trace.
  const double replay = predict_energy(result.trace.watts(), result.summary.frames);
  if (replay != result.summary.energy_j_per_frame) throw InvariantViolation("summary energy does not match trace");

  double max_gof_latency = 0.0;
  for (const auto& g : result.gofs) max_gof_latency = std::max(max_gof_latency, g.latency_ms_per_frame);

  json summary = summary_to_json(result.summary);
  summary["scenario"] = r.scenario.name;
  summary["seed"] = r.scenario.seed;
  summary["context"] = context_label(ctx0);
  summary["budget"] = budget_to_json(budget);
  summary["initial_branch_id"] = branch_id(initial);
  summary["infeasible_gofs"] = infeasible_gofs;
  summary["max_gof_latency_ms_per_frame"] = max_gof_latency;

  io::write_file_atomic(out_path(r, "gof.csv"), gof_records_csv(result.gofs));
  io::write_file_atomic(out_path(r, "power.csv"), power_trace_csv(result.trace));
  io::write_file_atomic(out_path(r, "summary.json"), io::dump_json(summary));
  if (f.svg) {
    plot::Chart chart;
    chart.title = "Board power, " + r.scenario.name;
    chart.x_label = "time (s)";
    chart.y_label = "power (W)";
    plot::Series s{"watts", {}, true};
    for (const auto& p : result.trace.samples) s.points.emplace_back(static_cast<double>(p.t_s), p.watts);
    chart.series.push_back(std::move(s));
    io::write_file_atomic(out_path(r, "power.svg"), plot::render_svg(chart));
  }

  out << result.summary.frames << " frames in " << result.summary.gofs << " GoFs: "
      << io::format_double(result.summary.mean_latency_ms_per_frame) << " ms/frame, "
      << io::format_double(result.summary.energy_j_per_frame) << " J/frame, " << result.summary.branch_switches
      << " branch switches";
  if (result.summary.achieved_map) out << ", mAP " << io::format_double(*result.summary.achieved_map);
  out << "\n";
  return infeasible_gofs == result.summary.gofs ? kExitInfeasible : kExitOk;
}

// ---------------------------------------------------------------- contend

int cmd_contend(const Flags& f, std::ostream& out) {
  if (!f.calibration.empty()) {
    const auto samples = load_calibration_csv(f.calibration);
    const auto cal = calibrate(samples);
    json j{{"slope", cal.slope},
           {"intercept", cal.intercept},
           {"saturation", cal.saturation},
           {"max_threads", cal.max_threads}};
    for (const auto& [level, threads] : cal.level_to_threads) j["level_to_threads"][std::to_string(level)] = threads;
    const auto text = io::dump_json(j);
    if (!f.out.empty()) {
      const auto path = (fs::path(f.out) / "calibration.json").string();
      io::write_file_atomic(path, text);
      out << "calibration -> " << path << "\n";
    } else {
      out << text;
    }
    return kExitOk;
  }
  const auto report = run_cpu_load(f.level, f.duration, f.workers);
  json j{{"requested_percent", report.requested_percent},
         {"achieved_percent", report.achieved_percent},
         {"per_worker_percent", report.per_worker_percent},
         {"wall_seconds", report.wall_seconds},
         {"workers", report.workers}};
  out << io::dump_json(j);
  return kExitOk;
}

// --------------------------------------------------------------- eval-map

int cmd_eval_map(const Flags& f, std::ostream& out) {
  if (f.detections.empty() || f.ground_truth.empty()) {
    throw Error(ErrorCode::InvalidArgument, "eval-map needs --detections and --ground-truth");
  }
  const auto dets = load_boxes_csv(f.detections);
  const auto gts = load_boxes_csv(f.ground_truth);
  for (const auto& d : dets)
    if (!d.confidence) throw Error(ErrorCode::ParseError, f.detections + ": detections need a confidence column");
  const auto result = mean_ap(dets, gts, f.iou);
  json j{{"iou_threshold", result.iou_threshold}, {"mean_ap", result.mean_ap}};
  for (const auto& [cls, ap] : result.per_class_ap) j["per_class_ap"][std::to_string(cls)] = ap;
  const auto text = io::dump_json(j);
  if (!f.out.empty()) {
    const auto path = (fs::path(f.out) / "map.json").string();
    io::write_file_atomic(path, text);
    out << "mAP " << io::format_double(result.mean_ap) << " -> " << path << "\n";
  } else {
    out << text;
  }
  return kExitOk;
}

// ----------------------------------------------------------------- verify

struct Check {
  std::string name;
  bool passed = true;
  std::string detail;
};

class Verifier {
 public:
  void fail(const std::string& name, const std::string& detail) { record(name, false, detail); }
  void pass(const std::string& name, const std::string& detail) { record(name, true, detail); }
  void expect(const std::string& name, bool ok, const std::string& detail) { record(name, ok, detail); }

  bool all_passed() const {
    return std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.passed; });
  }
  const std::vector<Check>& checks() const { return checks_; }

 private:
  void record(const std::string& name, bool ok, const std::string& detail) { checks_.push_back({name, ok, detail}); }
  std::vector<Check> checks_;
};

bool close_rel(double a, double b, double tol = 1e-9) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

std::size_t column(const io::CsvTable& t, const std::string& name) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw Error(ErrorCode::ParseError, "missing column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

std::optional<double> opt_cell(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return io::parse_double(s);
}

void verify_schedule(const std::string& path, Verifier& v) {
  const auto t = io::read_csv(path);
  const auto c_ctx = column(t, "context"), c_e0 = column(t, "budget_e0"), c_l0 = column(t, "budget_l0"),
             c_id = column(t, "branch_id"), c_lat = column(t, "pred_latency_ms"), c_en = column(t, "pred_energy_j"),
             c_acc = column(t, "pred_accuracy"), c_fc = column(t, "feasible_count");
  struct Row {
    std::string ctx;
    std::optional<double> e0, l0;
    bool feasible;
    double lat = 0, en = 0, acc = 0;
    std::string id;
  };
  std::vector<Row> rows;
  int violations = 0;
  for (const auto& cells : t.rows) {
    if (cells.size() != t.header.size()) throw Error(ErrorCode::ParseError, path + ": ragged row");
    Row r;
    r.ctx = cells[c_ctx];
    r.e0 = opt_cell(cells[c_e0]);
    r.l0 = opt_cell(cells[c_l0]);
    r.id = cells[c_id];
    r.feasible = r.id != "NONE" && io::parse_int(cells[c_fc]) > 0;
    if (r.id != "NONE") {
      r.lat = io::parse_double(cells[c_lat]);
      r.en = io::parse_double(cells[c_en]);
      r.acc = io::parse_double(cells[c_acc]);
      parse_branch_id(r.id);
    }
    if (r.feasible && ((r.e0 && r.en > *r.e0) || (r.l0 && r.lat > *r.l0))) ++violations;
    rows.push_back(std::move(r));
  }
  v.expect("schedule.budget", violations == 0,
           std::to_string(violations) + " feasible rows outside their budget of " + std::to_string(rows.size()));

  // A looser budget in the same context never selects a less accurate branch.
  auto looser = [](const std::optional<double>& a, const std::optional<double>& b) {
    return !a || (b && *a >= *b);
  };
  int monotone = 0;
  for (const auto& a : rows)
    for (const auto& b : rows) {
      if (a.ctx != b.ctx || !b.feasible || !looser(a.e0, b.e0) || !looser(a.l0, b.l0)) continue;
      if (!a.feasible || a.acc < b.acc) ++monotone;
    }
  v.expect("schedule.relaxation_monotone", monotone == 0, std::to_string(monotone) + " violating row pairs");
}

void verify_frontier(const std::string& path, Verifier& v) {
  const auto t = io::read_csv(path);
  const auto c_ctx = column(t, "context"), c_obj = column(t, "objective"), c_knobs = column(t, "knobs"),
             c_lat = column(t, "latency_ms"), c_en = column(t, "energy_j"), c_acc = column(t, "accuracy");
  struct Pt {
    double cost, acc;
  };
  std::map<std::string, std::map<std::string, std::vector<Pt>>> groups;
  for (const auto& cells : t.rows) {
    if (cells.size() != t.header.size()) throw Error(ErrorCode::ParseError, path + ": ragged row");
    const auto objective = parse_objective(cells[c_obj]);
    const double cost = io::parse_double(cells[objective == CostObjective::Latency ? c_lat : c_en]);
    groups[cells[c_ctx] + "|" + cells[c_obj]][cells[c_knobs]].push_back({cost, io::parse_double(cells[c_acc])});
  }
  int order = 0, dominated = 0, uncovered = 0;
  for (const auto& [key, sets] : groups) {
    for (const auto& [knobs, pts] : sets) {
      for (std::size_t i = 1; i < pts.size(); ++i)
        if (!(pts[i].cost >= pts[i - 1].cost && pts[i].acc > pts[i - 1].acc)) ++order;
      for (const auto& a : pts)
        for (const auto& b : pts)
          if (b.cost <= a.cost && b.acc >= a.acc && (b.cost < a.cost || b.acc > a.acc)) ++dominated;
    }
    auto all = sets.find("all");
    if (all == sets.end()) continue;
    for (const auto& [knobs, pts] : sets) {
      if (knobs == "all") continue;
      for (const auto& p : pts) {
        const bool ok = std::any_of(all->second.begin(), all->second.end(),
                                    [&](const Pt& q) { return q.cost <= p.cost && q.acc >= p.acc; });
        if (!ok) ++uncovered;
      }
    }
  }
  v.expect("frontier.sorted", order == 0, std::to_string(order) + " out-of-order rows");
  v.expect("frontier.non_dominated", dominated == 0, std::to_string(dominated) + " dominated rows");
  v.expect("frontier.multi_knob_covers_ablations", uncovered == 0,
           std::to_string(uncovered) + " ablated points not covered");
}

void verify_simulation(const std::string& dir, Verifier& v) {
  const auto gof = io::read_csv((fs::path(dir) / "gof.csv").string());
  const auto c_frames = column(gof, "frames"), c_det = column(gof, "detector_ms"),
             c_trk = column(gof, "tracker_ms_total"), c_lat = column(gof, "latency_ms_per_frame"),
             c_idx = column(gof, "gof_index");
  long long frames = 0;
  double busy = 0.0;
  int bad = 0;
  for (std::size_t i = 0; i < gof.rows.size(); ++i) {
    const auto& cells = gof.rows[i];
    const long long n = io::parse_int(cells[c_frames]);
    const double det = io::parse_double(cells[c_det]);
    const double trk = io::parse_double(cells[c_trk]);
    if (n < 1 || io::parse_int(cells[c_idx]) != static_cast<long long>(i) ||
        !close_rel(io::parse_double(cells[c_lat]), (det + trk) / static_cast<double>(n))) {
      ++bad;
    }
    frames += n;
    busy += det + trk;
  }
  v.expect("gof.latency_closure", bad == 0, std::to_string(bad) + " GoF rows off the amortized latency");

  const auto power = io::read_csv((fs::path(dir) / "power.csv").string());
  const auto c_t = column(power, "t_s"), c_w = column(power, "watts");
  std::vector<double> watts;
  int ts_bad = 0;
  for (std::size_t i = 0; i < power.rows.size(); ++i) {
    if (io::parse_int(power.rows[i][c_t]) != static_cast<long long>(i)) ++ts_bad;
    watts.push_back(io::parse_double(power.rows[i][c_w]));
    if (watts.back() < 0.0) ++ts_bad;
  }
  v.expect("power.timestamps", ts_bad == 0 && !watts.empty(), std::to_string(ts_bad) + " bad samples");

  const auto summary = io::read_json((fs::path(dir) / "summary.json").string());
  const long long s_frames = summary.at("frames").get<long long>();
  v.expect("summary.frames", s_frames == frames,
           "summary " + std::to_string(s_frames) + " vs GoF total " + std::to_string(frames));
  if (!watts.empty() && s_frames > 0) {
    const double replay = predict_energy(watts, s_frames);
    const double reported = summary.at("energy_j_per_frame").get<double>();
    v.expect("summary.energy_closure", close_rel(replay, reported),
             "trace " + io::format_double(replay) + " vs summary " + io::format_double(reported));
    const double lat = summary.at("mean_latency_ms_per_frame").get<double>();
    v.expect("summary.latency_closure", close_rel(lat, busy / static_cast<double>(s_frames)),
             "GoFs " + io::format_double(busy / static_cast<double>(s_frames)) + " vs summary " +
                 io::format_double(lat));
  }
}

int cmd_verify(const Flags& f, std::ostream& out) {
  std::string dir = f.out;
  if (dir.empty() && !f.scenario.empty()) dir = load_scenario(f.scenario).output_dir;
  if (dir.empty()) throw Error(ErrorCode::InvalidArgument, "verify needs --out DIR or --scenario");
  Verifier v;
  bool any = false;
  auto present = [&](const char* name) { return fs::exists(fs::path(dir) / name); };
  if (present("schedule.csv")) {
    any = true;
    verify_schedule((fs::path(dir) / "schedule.csv").string(), v);
  }
  if (present("frontier.csv")) {
    any = true;
    verify_frontier((fs::path(dir) / "frontier.csv").string(), v);
  }
  if (present("gof.csv") && present("power.csv") && present("summary.json")) {
    any = true;
    verify_simulation(dir, v);
  }
  if (present("profiles.json")) {
    any = true;
    const auto path = (fs::path(dir) / "profiles.json").string();
    const auto store = load_profiles(path);
    v.expect("profiles.byte_stable", serialize_profiles(store) == io::read_file(path), "canonical re-serialization");
  }
  if (!any) throw Error(ErrorCode::InvalidArgument, "nothing to verify in '" + dir + "'");

  json report{{"passed", v.all_passed()}, {"checks", json::array()}};
  for (const auto& c : v.checks()) {
    report["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  }
  io::write_file_atomic((fs::path(dir) / "verify_report.json").string(), io::dump_json(report));
  return v.all_passed() ? kExitOk : kExitInvariant;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive multi-branch detection runtime: profiling, scheduling and simulation"};
  app.require_subcommand(1);
  Flags f;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub, bool scenario_required) {
    auto* opt = sub->add_option("--scenario", f.scenario, "Scenario JSON file");
    if (scenario_required) opt->required();
    sub->add_option("--out", f.out, "Output directory (overrides the scenario)");
    sub->add_option("--seed", seed, "Override the scenario seed")->each([&](const std::string&) { f.seed = seed; });
    sub->add_flag("--net-energy", f.net_energy, "Predict energy net of the idle draw");
    sub->add_flag("--fallback-closest", f.fallback_closest, "Use the fastest branch when a budget is infeasible");
  };

  auto* profile = app.add_subcommand("profile", "Generate the profile store for a scenario");
  common(profile, true);
  auto* sched = app.add_subcommand("schedule", "Budget sweep over every context");
  common(sched, true);
  sched->add_flag("--timing", f.timing, "Record decision times in the CSV");
  auto* frontier = app.add_subcommand("frontier", "Pareto frontiers per context");
  common(frontier, true);
  frontier->add_option("--ablate", f.ablate, "Also emit the single-knob frontier of KNOB (or 'all')");
  frontier->add_option("--objective", f.objective, "latency or energy");
  frontier->add_flag("--svg", f.svg, "Render an SVG plot per context");
  auto* simulate = app.add_subcommand("simulate", "Stream simulation with runtime re-scheduling");
  common(simulate, true);
  simulate->add_flag("--svg", f.svg, "Render the power trace as SVG");
  auto* contend = app.add_subcommand("contend", "CPU contention generator and calibration");
  contend->add_option("--level", f.level, "Duty cycle percent")->check(CLI::Range(0.0, 99.0));
  contend->add_option("--duration", f.duration, "Seconds")->check(CLI::PositiveNumber);
  contend->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  contend->add_option("--calibration", f.calibration, "Fit a calibration from a threads,utilization CSV");
  contend->add_option("--out", f.out, "Output directory for the calibration");
  auto* verify = app.add_subcommand("verify", "Re-validate the files in an output directory");
  verify->add_option("--out", f.out, "Output directory to verify");
  verify->add_option("--scenario", f.scenario, "Scenario whose output directory to verify");
  auto* eval = app.add_subcommand("eval-map", "mAP of a detection CSV against ground truth");
  eval->add_option("--detections", f.detections, "Detection CSV")->required();
  eval->add_option("--ground-truth", f.ground_truth, "Ground-truth CSV")->required();
  eval->add_option("--iou", f.iou, "IoU matching threshold");
  eval->add_option("--out", f.out, "Output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*profile) return cmd_profile(f, out);
    if (*sched) return cmd_schedule(f, out, err);
    if (*frontier) return cmd_frontier(f, out, err);
    if (*simulate) return cmd_simulate(f, out, err);
    if (*contend) return cmd_contend(f, out);
    if (*verify) return cmd_verify(f, out);
    if (*eval) return cmd_eval_map(f, out);
  } catch (const NoFeasibleBranchError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const InvariantViolation& e) {
    err << "invariant violated: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitUsage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace adaptdet::cli
