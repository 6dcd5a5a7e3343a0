#pragma once

#include <array>
#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adaptdet/branchspace.hpp"

namespace adaptdet {

enum class Device { AgxXavier, XavierNX, TX2, Synthetic };

std::string_view to_string(Device d);
Device parse_device(std::string_view name);

/// Contention levels (percent) at which profiles are stored.
inline constexpr std::array<int, 12> kContentionLevels{0, 1, 10, 20, 30, 40, 50, 60, 70, 80, 90, 99};

bool is_contention_level(double percent) noexcept;
bool valid_power_mode(Device device, int mode) noexcept;

struct RuntimeContext {
  Device device = Device::Synthetic;
  int power_mode = 0;
  /// Percent of compute held by a co-resident workload.
  double contention = 0.0;

  auto operator<=>(const RuntimeContext&) const = default;
  bool operator==(const RuntimeContext&) const = default;
};

/// "synthetic/0/50"
std::string context_label(const RuntimeContext& ctx);
RuntimeContext parse_context_label(std::string_view label);
nlohmann::json context_to_json(const RuntimeContext& ctx);
RuntimeContext context_from_json(const nlohmann::json& j);

/// Throws Error{InvalidArgument} for an unknown power mode or a contention
/// outside [0, 99]. With `stored_level`, contention must also be one of
/// kContentionLevels.
void validate(const RuntimeContext& ctx, bool stored_level);

/// Tracker cost per frame at resize factor 1.0: c0 + c1 * objects.
struct TrackerCost {
  double c0_ms = 0.0;
  double c1_ms_per_object = 0.0;

  bool operator==(const TrackerCost&) const = default;
};

struct BranchProfile {
  std::string branch_id;
  RuntimeContext context;
  double detector_latency_ms = 0.0;
  TrackerCost tracker_cost;
  double accuracy = 0.0;
  double energy_per_frame_j = 0.0;
  long long sample_count = 0;

  bool operator==(const BranchProfile&) const = default;
};

/// Immutable collection of profiles keyed by (branch id, context).
class ProfileStore {
 public:
  static constexpr int kSchemaVersion = 1;
  using ContextMap = std::map<RuntimeContext, BranchProfile>;

  ProfileStore() = default;
  /// Validates every record. Throws DuplicateEntry, InconsistentAccuracy, or
  /// InvalidArgument for out-of-range values.
  explicit ProfileStore(std::vector<BranchProfile> profiles);

  const BranchProfile* find(std::string_view branch_id, const RuntimeContext& ctx) const;
  /// Throws Error{NotFound}.
  const BranchProfile& at(std::string_view branch_id, const RuntimeContext& ctx) const;
  /// All contexts stored for one branch, or nullptr.
  const ContextMap* contexts_of(std::string_view branch_id) const;

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  std::vector<std::string> branch_ids() const;
  std::vector<RuntimeContext> contexts() const;
  /// Entries ordered by (branch id, context).
  std::vector<BranchProfile> entries() const;

  /// (branch id, context) pairs of `branch_ids x contexts` that are absent.
  std::vector<std::pair<std::string, RuntimeContext>> missing(const std::vector<std::string>& branch_ids,
                                                              const std::vector<RuntimeContext>& contexts) const;

 private:
  std::map<std::string, ContextMap, std::less<>> entries_;
  std::size_t size_ = 0;
};

nlohmann::json profiles_to_json(const ProfileStore& store);
/// Parses and validates. Coverage is checked over the branches and contexts
/// that appear in the document, plus every branch of `domain` if given.
ProfileStore profiles_from_json(const nlohmann::json& j, const KnobDomain* domain = nullptr);

ProfileStore load_profiles(const std::string& path, const KnobDomain* domain = nullptr);
/// Canonical JSON; load -> save -> load is byte-stable.
void save_profiles(const ProfileStore& store, const std::string& path);
std::string serialize_profiles(const ProfileStore& store);

const BranchProfile& lookup(const ProfileStore& store, const BranchConfig& branch, const RuntimeContext& ctx);

/// Piecewise-linear interpolation over contention between the two stored
/// levels that bracket `contention`. Latencies and energy interpolate;
/// accuracy is copied. A stored level returns the stored profile unchanged.
/// Throws OutOfRange outside [0, 99] and NotFound without a bracket.
BranchProfile interpolate_context(const ProfileStore& store, const BranchConfig& branch, Device device,
                                  int power_mode, double contention);

/// Stored profile when `ctx.contention` is a stored level, otherwise the
/// interpolated one.
BranchProfile profile_for(const ProfileStore& store, const BranchConfig& branch, const RuntimeContext& ctx);

/// Accuracy keyed by branch id.
using AccuracyTable = std::map<std::string, double, std::less<>>;

/// Degrades the accuracy of a branch's detector-side configuration to the
/// branch itself. Called only for branches with interval > 1.
using ReuseFn = std::function<double(const BranchConfig& branch, double detector_only_accuracy)>;

/// Accuracy for every branch of `domain` from detector-only results. The
/// i = 1 entries are copied from `base`; every other entry is derived from
/// its detector-side entry through `reuse_fn`. Throws MissingBase.
AccuracyTable reuse_detection_profiles(const AccuracyTable& base, const KnobDomain& domain, const ReuseFn& reuse_fn);

}  // namespace adaptdet
