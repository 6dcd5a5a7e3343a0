#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adaptdet/branchspace.hpp"
#include "adaptdet/profiles.hpp"
#include "adaptdet/scheduler.hpp"
#include "adaptdet/simulator.hpp"

namespace adaptdet::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInfeasible = 1,
  kExitUsage = 2,
  kExitInvariant = 3,
};

/// Experiment description loaded from JSON. Relative paths inside the file
/// resolve against the file's directory.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  KnobDomain domain;
  SyntheticKernelSpec kernel;
  std::vector<RuntimeContext> contexts;
  std::vector<Budget> budgets;
  long long frames = 600;
  long long profile_frames = 200;
  std::optional<Knob> ablation;
  CostObjective objective = CostObjective::Latency;
  /// Fixed k for every branch; otherwise the kernel's expected count.
  std::optional<double> tracked_objects;
  std::optional<std::string> profiles_path;
  std::string output_dir = "out";

  // simulate
  std::optional<std::string> initial_branch;
  std::optional<Budget> simulate_budget;
  std::vector<ContentionStep> contention_steps;
  std::optional<double> frame_rate_hz;
  bool evaluate_accuracy = true;
};

Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

/// Runs one command line (without the program name). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

}  // namespace adaptdet::cli
