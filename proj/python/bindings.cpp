#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "adaptdet/branchspace.hpp"
#include "adaptdet/cli.hpp"
#include "adaptdet/contention.hpp"
#include "adaptdet/error.hpp"
#include "adaptdet/evalmetrics.hpp"
#include "adaptdet/models.hpp"
#include "adaptdet/profiles.hpp"
#include "adaptdet/scheduler.hpp"
#include "adaptdet/simulator.hpp"

namespace py = pybind11;
using namespace adaptdet;
using nlohmann::json;

namespace {

// Python objects <-> nlohmann::json through the stdlib json module.
json to_json(const py::handle& obj) {
  if (py::isinstance<py::str>(obj)) return json::parse(obj.cast<std::string>());
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object from_json(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

RuntimeContext to_context(const py::handle& obj) {
  if (py::isinstance<RuntimeContext>(obj)) return obj.cast<RuntimeContext>();
  return parse_context_label(obj.cast<std::string>());
}

BranchConfig to_branch(const py::handle& obj) {
  if (py::isinstance<BranchConfig>(obj)) return obj.cast<BranchConfig>();
  return parse_branch_id(obj.cast<std::string>());
}

KnobDomain to_domain(const py::handle& obj) {
  if (py::isinstance<KnobDomain>(obj)) return obj.cast<KnobDomain>();
  if (py::isinstance<py::str>(obj)) return preset_domain(obj.cast<std::string>());
  return domain_from_json(to_json(obj));
}

SyntheticKernelSpec to_kernel(const py::handle& obj, Device fallback) {
  if (obj.is_none()) return default_kernel(fallback);
  if (py::isinstance<py::str>(obj)) return default_kernel(parse_device(obj.cast<std::string>()));
  return kernel_from_json(to_json(obj));
}

PredictOptions predict_options(std::optional<double> tracked_objects, const py::object& kernel, Device device) {
  PredictOptions po;
  if (tracked_objects) {
    po.tracked_objects = *tracked_objects;
  } else {
    const auto k = std::make_shared<SyntheticKernelSpec>(to_kernel(kernel, device));
    po.tracked_objects_fn = [k](const BranchConfig& b) { return expected_tracked_objects(*k, b); };
  }
  return po;
}

std::vector<BranchConfig> to_branches(const py::handle& obj) {
  if (py::isinstance<KnobDomain>(obj) || py::isinstance<py::str>(obj) || py::isinstance<py::dict>(obj))
    return enumerate_branches(to_domain(obj));
  std::vector<BranchConfig> out;
  for (const auto& item : obj) out.push_back(to_branch(item));
  return out;
}

py::dict metrics_dict(const PredictedMetrics& m) {
  py::dict d;
  d["latency_ms_per_frame"] = m.latency_ms_per_frame;
  d["energy_j_per_frame"] = m.energy_j_per_frame;
  d["accuracy"] = m.accuracy;
  return d;
}

}  // namespace

PYBIND11_MODULE(_adaptdet, m) {
  m.doc() = "Multi-branch object detection runtime: branch space, profiles, scheduling, simulation and evaluation.";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<NoFeasibleBranchError>(m, "NoFeasibleBranchError", error.ptr());

  py::class_<BranchConfig>(m, "Branch")
      .def(py::init([](const std::string& id) { return parse_branch_id(id); }), py::arg("branch_id"))
      .def_property_readonly("id", [](const BranchConfig& b) { return branch_id(b); })
      .def_property_readonly("detector", [](const BranchConfig& b) { return std::string(to_string(b.detector)); })
      .def_readonly("resolution", &BranchConfig::resolution)
      .def_readonly("proposals", &BranchConfig::proposals)
      .def_readonly("feature_maps", &BranchConfig::feature_maps)
      .def_property_readonly("tracker",
                             [](const BranchConfig& b) -> std::optional<std::string> {
                               if (!b.tracker) return std::nullopt;
                               return std::string(to_string(*b.tracker));
                             })
      .def_readonly("tracker_resize", &BranchConfig::tracker_resize)
      .def_readonly("confidence_threshold", &BranchConfig::confidence_threshold)
      .def_readonly("interval", &BranchConfig::interval)
      .def("__eq__", [](const BranchConfig& a, const BranchConfig& b) { return a == b; })
      .def("__hash__", [](const BranchConfig& b) { return py::hash(py::str(branch_id(b))); })
      .def("__repr__", [](const BranchConfig& b) { return "Branch('" + branch_id(b) + "')"; });

  py::class_<KnobDomain>(m, "KnobDomain")
      .def_static("preset", [](const std::string& name) { return preset_domain(name); }, py::arg("name"))
      .def_static("from_dict", [](const py::object& d) { return domain_from_json(to_json(d)); })
      .def("to_dict", [](const KnobDomain& d) { return from_json(domain_to_json(d)); })
      .def("branches", [](const KnobDomain& d) { return enumerate_branches(d); })
      .def("ablate", [](const KnobDomain& d, const std::string& knob) { return ablate(d, parse_knob(knob)); })
      .def("active_knobs", [](const KnobDomain& d) {
        std::vector<std::string> out;
        for (Knob k : active_knobs(d)) out.emplace_back(to_string(k));
        return out;
      });

  m.def("enumerate_branches", [](const py::object& domain) { return enumerate_branches(to_domain(domain)); },
        py::arg("domain") = "virtuoso", "Every branch of a domain (preset name, KnobDomain or dict).");
  m.def("branch_id", [](const BranchConfig& b) { return branch_id(b); });
  m.def("parse_branch_id", [](const std::string& id) { return parse_branch_id(id); });

  py::class_<RuntimeContext>(m, "Context")
      .def(py::init([](const std::string& device, int mode, double contention) {
             RuntimeContext c{parse_device(device), mode, contention};
             validate(c, false);
             return c;
           }),
           py::arg("device") = "synthetic", py::arg("power_mode") = 0, py::arg("contention") = 0.0)
      .def_property_readonly("device", [](const RuntimeContext& c) { return std::string(to_string(c.device)); })
      .def_readonly("power_mode", &RuntimeContext::power_mode)
      .def_readonly("contention", &RuntimeContext::contention)
      .def_property_readonly("label", [](const RuntimeContext& c) { return context_label(c); })
      .def("__repr__", [](const RuntimeContext& c) { return "Context('" + context_label(c) + "')"; });

  py::class_<BranchProfile>(m, "BranchProfile")
      .def_readonly("branch_id", &BranchProfile::branch_id)
      .def_readonly("context", &BranchProfile::context)
      .def_readonly("detector_latency_ms", &BranchProfile::detector_latency_ms)
      .def_property_readonly("tracker_c0_ms", [](const BranchProfile& p) { return p.tracker_cost.c0_ms; })
      .def_property_readonly("tracker_c1_ms", [](const BranchProfile& p) { return p.tracker_cost.c1_ms_per_object; })
      .def_readonly("accuracy", &BranchProfile::accuracy)
      .def_readonly("energy_per_frame_j", &BranchProfile::energy_per_frame_j);

  py::class_<ProfileStore>(m, "ProfileStore")
      .def_static("load", [](const std::string& path) { return load_profiles(path); }, py::arg("path"))
      .def("save", [](const ProfileStore& s, const std::string& path) { save_profiles(s, path); })
      .def("serialize", [](const ProfileStore& s) { return serialize_profiles(s); })
      .def("__len__", &ProfileStore::size)
      .def("branch_ids", &ProfileStore::branch_ids)
      .def("contexts", &ProfileStore::contexts)
      .def("at", [](const ProfileStore& s, const std::string& id, const py::object& ctx) { return s.at(id, to_context(ctx)); },
           py::arg("branch_id"), py::arg("context"));

  m.def(
      "generate_profiles",
      [](const py::object& domain, const std::vector<py::object>& contexts, const py::object& kernel, long long frames,
         std::uint64_t seed) {
        std::vector<RuntimeContext> ctxs;
        for (const auto& c : contexts) ctxs.push_back(to_context(c));
        if (ctxs.empty()) throw Error(ErrorCode::InvalidArgument, "at least one context is required");
        ProfilingOptions po{frames, seed};
        const auto k = to_kernel(kernel, ctxs.front().device);
        const auto d = to_domain(domain);
        py::gil_scoped_release release;
        return generate_profiles(d, ctxs, k, po);
      },
      py::arg("domain") = "virtuoso", py::arg("contexts") = std::vector<py::object>{py::str("synthetic/0/0")},
      py::arg("kernel") = py::none(), py::arg("frames") = 200, py::arg("seed") = 1,
      "Profile every branch against the synthetic kernel.");

  m.def(
      "tracker_latency_ms",
      [](double c0, double c1, double rf, double objects) { return tracker_latency_ms({c0, c1}, rf, objects); },
      py::arg("cost_c0"), py::arg("cost_c1"), py::arg("resize_factor"),
        py::arg("objects"));
  m.def(
      "predict_latency",
      [](double detector_ms, double c0, double c1, const py::object& branch, double objects) {
        BranchProfile p;
        p.detector_latency_ms = detector_ms;
        p.tracker_cost = {c0, c1};
        return predict_latency(p, to_branch(branch), objects);
      },
      py::arg("detector_ms"), py::arg("c0"), py::arg("c1"), py::arg("branch"), py::arg("objects"));
  m.def(
      "predict_energy",
      [](const std::vector<double>& watts, long long frames, std::optional<double> idle_watts) {
        return predict_energy(watts, frames, idle_watts);
      },
      py::arg("watts"), py::arg("frames"), py::arg("idle_watts") = py::none());

  m.def(
      "schedule",
      [](const ProfileStore& store, const py::object& context, std::optional<double> e0, std::optional<double> l0,
         const py::object& branches, std::optional<double> tracked_objects, const py::object& kernel,
         bool fallback_closest) {
        const auto ctx = to_context(context);
        const auto bs = to_branches(branches);
        ScheduleOptions so;
        so.predict = predict_options(tracked_objects, kernel, ctx.device);
        so.fallback_closest = fallback_closest;
        const auto d = schedule(store, bs, ctx, Budget{e0, l0}, so);
        py::dict out = metrics_dict(d.predicted);
        out["branch_id"] = d.branch_id;
        out["feasible_count"] = d.feasible_count;
        out["decision_us"] = d.decision_time_us;
        out["fallback"] = d.fallback;
        return out;
      },
      py::arg("store"), py::arg("context"), py::arg("e0") = py::none(), py::arg("l0") = py::none(),
      py::arg("branches") = "virtuoso", py::arg("tracked_objects") = py::none(), py::arg("kernel") = py::none(),
      py::arg("fallback_closest") = false,
      "Most accurate branch within the budget. Raises NoFeasibleBranchError.");

  m.def(
      "pareto_frontier",
      [](const ProfileStore& store, const py::object& context, const std::string& objective, const py::object& branches,
         std::optional<double> tracked_objects, const py::object& kernel) {
        const auto ctx = to_context(context);
        const auto bs = to_branches(branches);
        const auto front = pareto_frontier(store, bs, ctx, parse_objective(objective),
                                           predict_options(tracked_objects, kernel, ctx.device));
        py::list out;
        for (const auto& p : front) {
          py::dict d = metrics_dict(p.metrics);
          d["branch_id"] = p.branch_id;
          out.append(d);
        }
        return out;
      },
      py::arg("store"), py::arg("context"), py::arg("objective") = "latency", py::arg("branches") = "virtuoso",
      py::arg("tracked_objects") = py::none(), py::arg("kernel") = py::none());

  py::class_<CGCalibration>(m, "Calibration")
      .def_readonly("slope", &CGCalibration::slope)
      .def_readonly("intercept", &CGCalibration::intercept)
      .def_readonly("saturation", &CGCalibration::saturation)
      .def_readonly("max_threads", &CGCalibration::max_threads)
      .def_readonly("level_to_threads", &CGCalibration::level_to_threads)
      .def("utilization", [](const CGCalibration& c, int threads) { return utilization_for(c, threads); })
      .def("threads", [](const CGCalibration& c, double level) { return threads_for(c, level); });

  m.def(
      "calibrate",
      [](const std::vector<std::pair<int, double>>& samples, int max_threads) {
        std::vector<CalibrationSample> s;
        for (auto [t, u] : samples) s.push_back({t, u});
        return calibrate(s, max_threads);
      },
      py::arg("samples"), py::arg("max_threads") = -1, "Fit from (threads, utilization percent) pairs.");

  m.def(
      "run_cpu_load",
      [](double level, double duration_s, int workers) {
        LoadReport r;
        {
          py::gil_scoped_release release;
          r = run_cpu_load(level, duration_s, workers);
        }
        py::dict d;
        d["requested_percent"] = r.requested_percent;
        d["achieved_percent"] = r.achieved_percent;
        d["per_worker_percent"] = r.per_worker_percent;
        d["wall_seconds"] = r.wall_seconds;
        d["workers"] = r.workers;
        return d;
      },
      py::arg("level"), py::arg("duration_s"), py::arg("workers") = 1);

  py::class_<DetectionBox>(m, "Box")
      .def(py::init([](long long frame, int cls, double x0, double y0, double x1, double y1,
                       std::optional<double> confidence) {
             return DetectionBox{frame, cls, x0, y0, x1, y1, confidence};
           }),
           py::arg("frame_id"), py::arg("class_id"), py::arg("x_min"), py::arg("y_min"), py::arg("x_max"),
           py::arg("y_max"), py::arg("confidence") = py::none())
      .def_readwrite("frame_id", &DetectionBox::frame_id)
      .def_readwrite("class_id", &DetectionBox::class_id)
      .def_readwrite("x_min", &DetectionBox::x_min)
      .def_readwrite("y_min", &DetectionBox::y_min)
      .def_readwrite("x_max", &DetectionBox::x_max)
      .def_readwrite("y_max", &DetectionBox::y_max)
      .def_readwrite("confidence", &DetectionBox::confidence)
      .def("__eq__", [](const DetectionBox& a, const DetectionBox& b) { return a == b; });

  m.def("iou", &iou);
  m.def(
      "nms", [](const std::vector<DetectionBox>& boxes, double threshold) { return nms(boxes, threshold); },
      py::arg("boxes"), py::arg("iou_threshold") = 0.6);
  m.def(
      "mean_ap",
      [](const std::vector<DetectionBox>& dets, const std::vector<DetectionBox>& gts, double threshold) {
        const auto r = mean_ap(dets, gts, threshold);
        return py::make_tuple(r.mean_ap, r.per_class_ap);
      },
      py::arg("detections"), py::arg("ground_truth"), py::arg("iou_threshold") = 0.5,
      "Returns (mAP, {class: AP}).");

  m.def("default_kernel", [](const std::string& device) { return from_json(kernel_to_json(default_kernel(parse_device(device)))); },
        py::arg("device") = "synthetic");

  m.def(
      "simulate",
      [](const py::object& branch, const py::object& context, long long frames, const py::object& kernel,
         std::uint64_t seed, std::optional<double> frame_rate_hz, bool evaluate_accuracy) {
        const auto ctx = to_context(context);
        const auto k = to_kernel(kernel, ctx.device);
        const auto b = to_branch(branch);
        SimulateOptions opts;
        opts.seed = seed;
        opts.frame_rate_hz = frame_rate_hz;
        opts.evaluate_accuracy = evaluate_accuracy;
        SimulationResult r;
        {
          py::gil_scoped_release release;
          r = simulate_stream(b, ctx, k, frames, opts);
        }
        py::dict out;
        out["summary"] = from_json(summary_to_json(r.summary));
        out["watts"] = r.trace.watts();
        py::list gofs;
        for (const auto& g : r.gofs) {
          py::dict d;
          d["gof_index"] = g.gof_index;
          d["branch_id"] = g.branch_id;
          d["frames"] = g.frames;
          d["detector_ms"] = g.detector_ms;
          d["tracker_ms_total"] = g.tracker_ms_total;
          d["latency_ms_per_frame"] = g.latency_ms_per_frame;
          d["tracked_objects"] = g.tracked_objects;
          gofs.append(d);
        }
        out["gofs"] = gofs;
        return out;
      },
      py::arg("branch"), py::arg("context") = "synthetic/0/0", py::arg("frames") = 600, py::arg("kernel") = py::none(),
      py::arg("seed") = 1, py::arg("frame_rate_hz") = py::none(), py::arg("evaluate_accuracy") = false);

  m.def(
      "cli_run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run one command line in-process. Returns (exit_code, stdout, stderr).");
}
