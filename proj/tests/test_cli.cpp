#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "adaptdet/cli.hpp"
#include "adaptdet/io.hpp"
#include "adaptdet/profiles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("adaptdet-cli-" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = dir / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = adaptdet::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_scenario() {
  return json{{"name", "cli-test"},
              {"seed", 3},
              {"domain", "virtuoso"},
              {"kernel", "builtin"},
              {"contexts", {"synthetic/0/0", "synthetic/0/50"}},
              {"budgets",
               {{{"l0", 33.3}},
                {{"e0", 0.2}, {"l0", 50.0}},
                {{"e0", 1.0}, {"l0", 100.0}},
                {{"e0", 0.0001}, {"l0", 0.01}}}},
              {"frames", 240},
              {"profile_frames", 16},
              {"output_dir", "out"},
              {"simulate", {{"budget", {{"l0", 33.3}}}, {"contention_steps", {{{"frame", 120}, {"contention", 50}}}}}}};
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).code == adaptdet::cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == adaptdet::cli::kExitUsage);
  CHECK(run({"schedule"}).code == adaptdet::cli::kExitUsage);
  CHECK(run({"--help"}).code == adaptdet::cli::kExitOk);
}

TEST_CASE("missing kernel file names the path") {
  Workspace ws("kernel");
  auto s = small_scenario();
  s["kernel"] = "no-such-kernel.json";
  const auto path = ws.write("s.json", s.dump());
  const auto r = run({"profile", "--scenario", path});
  CHECK(r.code == adaptdet::cli::kExitUsage);
  CHECK(r.err.find("no-such-kernel.json") != std::string::npos);
}

TEST_CASE("unknown scenario keys are rejected") {
  Workspace ws("keys");
  auto s = small_scenario();
  s["bugdets"] = json::array();
  const auto r = run({"schedule", "--scenario", ws.write("s.json", s.dump())});
  CHECK(r.code == adaptdet::cli::kExitUsage);
  CHECK(r.err.find("bugdets") != std::string::npos);
}

TEST_CASE("profile, schedule, frontier, simulate, verify") {
  Workspace ws("pipeline");
  const auto scenario = ws.write("s.json", small_scenario().dump());
  const auto out = ws.path("out");

  REQUIRE(run({"profile", "--scenario", scenario}).code == 0);
  const auto store = adaptdet::load_profiles(ws.path("out/profiles.json"));
  CHECK(store.size() == 310);

  const auto sched = run({"schedule", "--scenario", scenario});
  REQUIRE(sched.code == 0);
  const auto rows = adaptdet::io::read_csv(ws.path("out/schedule.csv"));
  REQUIRE(rows.rows.size() == 8);
  int none = 0;
  for (const auto& row : rows.rows) {
    if (row.at(3) == "NONE") {
      ++none;
      CHECK(row.at(7) == "0");
    }
    CHECK(row.at(8) == "0");
  }
  CHECK(none >= 2);

  const auto frontier = run({"frontier", "--scenario", scenario, "--ablate", "all", "--svg"});
  REQUIRE(frontier.code == 0);
  CHECK(fs::exists(ws.path("out/frontier.csv")));
  CHECK(fs::exists(ws.path("out/frontier-0.svg")));
  CHECK(slurp(ws.path("out/frontier-0.svg")).rfind("<svg", 0) == 0);

  const auto sim = run({"simulate", "--scenario", scenario, "--svg"});
  REQUIRE(sim.code == 0);
  const auto summary = adaptdet::io::read_json(ws.path("out/summary.json"));
  CHECK(summary.at("frames") == 240);
  CHECK(summary.at("branch_switches").get<int>() >= 1);
  CHECK(fs::exists(ws.path("out/power.svg")));

  const auto ver = run({"verify", "--out", out});
  CHECK(ver.code == 0);
  const auto report = adaptdet::io::read_json(ws.path("out/verify_report.json"));
  CHECK(report.at("passed") == true);

  // Corrupting the trace is caught.
  auto gof = slurp(ws.path("out/summary.json"));
  auto j = json::parse(gof);
  j["energy_j_per_frame"] = j["energy_j_per_frame"].get<double>() * 2.0;
  ws.write("out/summary.json", j.dump());
  CHECK(run({"verify", "--out", out}).code == adaptdet::cli::kExitInvariant);
}

TEST_CASE("all-infeasible schedule exits 1") {
  Workspace ws("infeasible");
  auto s = small_scenario();
  s["contexts"] = {"synthetic/0/0"};
  s["budgets"] = {{{"e0", 0.0001}}};
  s["profile_frames"] = 8;
  const auto path = ws.write("s.json", s.dump());
  CHECK(run({"schedule", "--scenario", path}).code == adaptdet::cli::kExitInfeasible);
  CHECK(run({"schedule", "--scenario", path, "--fallback-closest"}).code == 0);
}

TEST_CASE("contend calibration and eval-map") {
  Workspace ws("misc");
  std::string csv = "threads,utilization\n";
  for (int t = 0; t <= 220; t += 10) csv += std::to_string(t) + "," + std::to_string(std::min(99.0, 0.5 * t)) + "\n";
  const auto cal = ws.write("cal.csv", csv);
  REQUIRE(run({"contend", "--calibration", cal, "--out", ws.path("o")}).code == 0);
  const auto c = adaptdet::io::read_json(ws.path("o/calibration.json"));
  CHECK(c.at("slope").get<double>() == doctest::Approx(0.5));
  CHECK(c.at("level_to_threads").at("50") == 100);

  const auto gt = ws.write("gt.csv", "frame_id,class_id,xmin,ymin,xmax,ymax\n0,0,0,0,10,10\n0,1,20,20,30,30\n");
  const auto det = ws.write("det.csv",
                            "frame_id,class_id,xmin,ymin,xmax,ymax,confidence\n0,0,0,0,10,10,0.9\n0,1,50,50,60,60,0.8\n");
  REQUIRE(run({"eval-map", "--detections", det, "--ground-truth", gt, "--out", ws.path("o")}).code == 0);
  const auto m = adaptdet::io::read_json(ws.path("o/map.json"));
  CHECK(m.at("mean_ap").get<double>() == 0.5);
  CHECK(run({"eval-map", "--detections", gt, "--ground-truth", gt}).code == adaptdet::cli::kExitUsage);
}

TEST_CASE("identical runs give identical bytes") {
  Workspace ws("determinism");
  auto s = small_scenario();
  s["contexts"] = {"synthetic/0/0"};
  s["frames"] = 120;
  s["simulate"].erase("contention_steps");
  const auto path = ws.write("s.json", s.dump());
  for (const char* dir : {"a", "b"}) {
    const auto out = ws.path(dir);
    REQUIRE(run({"profile", "--scenario", path, "--out", out}).code == 0);
    REQUIRE(run({"schedule", "--scenario", path, "--out", out}).code == 0);
    REQUIRE(run({"simulate", "--scenario", path, "--out", out}).code == 0);
  }
  for (const char* f : {"profiles.json", "schedule.csv", "gof.csv", "power.csv", "summary.json"}) {
    CHECK(slurp(ws.path(std::string("a/") + f)) == slurp(ws.path(std::string("b/") + f)));
  }
}
