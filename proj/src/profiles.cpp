#include "adaptdet/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "adaptdet/error.hpp"
#include "adaptdet/io.hpp"

namespace adaptdet {

namespace {

constexpr std::array<std::pair<Device, std::string_view>, 4> kDeviceNames{{
    {Device::AgxXavier, "agx-xavier"},
    {Device::XavierNX, "xavier-nx"},
    {Device::TX2, "tx2"},
    {Device::Synthetic, "synthetic"},
}};

void check_profile_values(const BranchProfile& p) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::InvalidArgument, p.branch_id + " @ " + context_label(p.context) + ": " + what);
  };
  if (!(p.detector_latency_ms > 0.0) || !std::isfinite(p.detector_latency_ms)) fail("detector latency must be > 0");
  if (!(p.tracker_cost.c0_ms >= 0.0) || !std::isfinite(p.tracker_cost.c0_ms)) fail("tracker c0 must be >= 0");
  if (!(p.tracker_cost.c1_ms_per_object >= 0.0) || !std::isfinite(p.tracker_cost.c1_ms_per_object))
    fail("tracker c1 must be >= 0");
  if (!(p.accuracy >= 0.0 && p.accuracy <= 1.0)) fail("accuracy must be in [0,1]");
  if (!(p.energy_per_frame_j >= 0.0) || !std::isfinite(p.energy_per_frame_j)) fail("energy must be >= 0");
  if (p.sample_count < 0) fail("sample count must be >= 0");
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

}  // namespace

std::string_view to_string(Device d) {
  for (auto& [k, n] : kDeviceNames)
    if (k == d) return n;
  return "?";
}

Device parse_device(std::string_view name) {
  for (auto& [k, n] : kDeviceNames)
    if (n == name) return k;
  throw Error(ErrorCode::ParseError, "unknown device '" + std::string(name) + "'");
}

bool is_contention_level(double percent) noexcept {
  return std::any_of(kContentionLevels.begin(), kContentionLevels.end(),
                     [&](int level) { return static_cast<double>(level) == percent; });
}

bool valid_power_mode(Device device, int mode) noexcept {
  switch (device) {
    case Device::AgxXavier: return mode >= 0 && mode <= 7;
    case Device::XavierNX: return mode >= 0 && mode <= 4;
    case Device::TX2: return mode == 0;
    case Device::Synthetic: return mode >= 0;
  }
  return false;
}

std::string context_label(const RuntimeContext& ctx) {
  return std::string(to_string(ctx.device)) + "/" + std::to_string(ctx.power_mode) + "/" +
         io::format_double(ctx.contention);
}

RuntimeContext parse_context_label(std::string_view label) {
  auto parts = io::split(label, '/');
  if (parts.size() != 3) throw Error(ErrorCode::ParseError, "bad context label '" + std::string(label) + "'");
  RuntimeContext ctx{parse_device(parts[0]), static_cast<int>(io::parse_int(parts[1])), io::parse_double(parts[2])};
  validate(ctx, false);
  return ctx;
}

nlohmann::json context_to_json(const RuntimeContext& ctx) {
  return {{"device", std::string(to_string(ctx.device))}, {"power_mode", ctx.power_mode}, {"contention", ctx.contention}};
}

RuntimeContext context_from_json(const nlohmann::json& j) {
  try {
    RuntimeContext ctx;
    ctx.device = parse_device(j.at("device").get<std::string>());
    ctx.power_mode = j.at("power_mode").get<int>();
    ctx.contention = j.at("contention").get<double>();
    return ctx;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("context: ") + e.what());
  }
}

void validate(const RuntimeContext& ctx, bool stored_level) {
  if (!valid_power_mode(ctx.device, ctx.power_mode)) {
    throw Error(ErrorCode::InvalidArgument, "power mode " + std::to_string(ctx.power_mode) + " is not valid for " +
                                                std::string(to_string(ctx.device)));
  }
  if (!(ctx.contention >= 0.0 && ctx.contention <= 99.0)) {
    throw Error(ErrorCode::InvalidArgument, "contention must be in [0, 99]");
  }
  if (stored_level && !is_contention_level(ctx.contention)) {
    throw Error(ErrorCode::InvalidArgument,
                "contention " + io::format_double(ctx.contention) + " is not a calibrated level");
  }
}

ProfileStore::ProfileStore(std::vector<BranchProfile> profiles) {
  // branch id -> device -> first-seen accuracy
  std::map<std::string, std::map<Device, double>, std::less<>> accuracy_seen;
  for (auto& p : profiles) {
    validate(p.context, true);
    check_profile_values(p);
    parse_branch_id(p.branch_id);
    auto& per_branch = entries_[p.branch_id];
    if (per_branch.count(p.context)) {
      throw Error(ErrorCode::DuplicateEntry, p.branch_id + " @ " + context_label(p.context));
    }
    auto& acc = accuracy_seen[p.branch_id];
    if (auto it = acc.find(p.context.device); it != acc.end()) {
      if (it->second != p.accuracy) {
        throw Error(ErrorCode::InconsistentAccuracy,
                    p.branch_id + " has different accuracy across contexts of " +
                        std::string(to_string(p.context.device)));
      }
    } else {
      acc.emplace(p.context.device, p.accuracy);
    }
    RuntimeContext key = p.context;
    per_branch.emplace(key, std::move(p));
    ++size_;
  }
}

const BranchProfile* ProfileStore::find(std::string_view branch_id, const RuntimeContext& ctx) const {
  auto it = entries_.find(branch_id);
  if (it == entries_.end()) return nullptr;
  auto jt = it->second.find(ctx);
  return jt == it->second.end() ? nullptr : &jt->second;
}

const BranchProfile& ProfileStore::at(std::string_view branch_id, const RuntimeContext& ctx) const {
  if (const auto* p = find(branch_id, ctx)) return *p;
  throw Error(ErrorCode::NotFound, "no profile for " + std::string(branch_id) + " @ " + context_label(ctx));
}

const ProfileStore::ContextMap* ProfileStore::contexts_of(std::string_view branch_id) const {
  auto it = entries_.find(branch_id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> ProfileStore::branch_ids() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [id, _] : entries_) out.push_back(id);
  return out;
}

std::vector<RuntimeContext> ProfileStore::contexts() const {
  std::set<RuntimeContext> seen;
  for (const auto& [_, per] : entries_)
    for (const auto& [ctx, __] : per) seen.insert(ctx);
  return {seen.begin(), seen.end()};
}

std::vector<BranchProfile> ProfileStore::entries() const {
  std::vector<BranchProfile> out;
  out.reserve(size_);
  for (const auto& [_, per] : entries_)
    for (const auto& [__, p] : per) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, RuntimeContext>> ProfileStore::missing(
    const std::vector<std::string>& branch_ids, const std::vector<RuntimeContext>& contexts) const {
  std::vector<std::pair<std::string, RuntimeContext>> out;
  for (const auto& id : branch_ids)
    for (const auto& ctx : contexts)
      if (!find(id, ctx)) out.emplace_back(id, ctx);
  return out;
}

nlohmann::json profiles_to_json(const ProfileStore& store) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : store.entries()) {
    list.push_back({
        {"branch_id", p.branch_id},
        {"context", context_to_json(p.context)},
        {"detector_latency_ms", p.detector_latency_ms},
        {"tracker_c0_ms", p.tracker_cost.c0_ms},
        {"tracker_c1_ms_per_obj", p.tracker_cost.c1_ms_per_object},
        {"accuracy", p.accuracy},
        {"energy_per_frame_j", p.energy_per_frame_j},
        {"samples", p.sample_count},
    });
  }
  return {{"schema_version", ProfileStore::kSchemaVersion}, {"profiles", std::move(list)}};
}

ProfileStore profiles_from_json(const nlohmann::json& j, const KnobDomain* domain) {
  std::vector<BranchProfile> profiles;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != ProfileStore::kSchemaVersion) {
      throw Error(ErrorCode::ParseError, "unsupported schema_version " + std::to_string(version));
    }
    for (const auto& rec : j.at("profiles")) {
      BranchProfile p;
      p.branch_id = rec.at("branch_id").get<std::string>();
      p.context = context_from_json(rec.at("context"));
      p.detector_latency_ms = rec.at("detector_latency_ms").get<double>();
      p.tracker_cost.c0_ms = rec.at("tracker_c0_ms").get<double>();
      p.tracker_cost.c1_ms_per_object = rec.at("tracker_c1_ms_per_obj").get<double>();
      p.accuracy = rec.at("accuracy").get<double>();
      p.energy_per_frame_j = rec.at("energy_per_frame_j").get<double>();
      p.sample_count = rec.at("samples").get<long long>();
      profiles.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("profiles: ") + e.what());
  }

  ProfileStore store(std::move(profiles));

  std::vector<std::string> ids = store.branch_ids();
  if (domain) {
    std::set<std::string> all(ids.begin(), ids.end());
    for (const auto& b : enumerate_branches(*domain)) all.insert(branch_id(b));
    ids.assign(all.begin(), all.end());
  }
  auto missing = store.missing(ids, store.contexts());
  if (!missing.empty()) {
    std::vector<std::string> labels;
    for (const auto& [id, ctx] : missing) labels.push_back(id + " @ " + context_label(ctx));
    std::string msg = std::to_string(missing.size()) + " (branch, context) pairs absent, first: " + labels.front();
    throw MissingCoverageError(std::move(labels), msg);
  }
  return store;
}

ProfileStore load_profiles(const std::string& path, const KnobDomain* domain) {
  return profiles_from_json(io::read_json(path), domain);
}

std::string serialize_profiles(const ProfileStore& store) { return io::dump_json(profiles_to_json(store)); }

void save_profiles(const ProfileStore& store, const std::string& path) {
  io::write_file_atomic(path, serialize_profiles(store));
}

const BranchProfile& lookup(const ProfileStore& store, const BranchConfig& branch, const RuntimeContext& ctx) {
  return store.at(branch_id(branch), ctx);
}

BranchProfile interpolate_context(const ProfileStore& store, const BranchConfig& branch, Device device,
                                  int power_mode, double contention) {
  if (!(contention >= 0.0 && contention <= 99.0)) {
    throw Error(ErrorCode::OutOfRange, "contention " + io::format_double(contention) + " outside [0, 99]");
  }
  const std::string id = branch_id(branch);
  const auto* per = store.contexts_of(id);
  if (!per) throw Error(ErrorCode::NotFound, "no profiles for " + id);

  const BranchProfile* lo = nullptr;
  const BranchProfile* hi = nullptr;
  for (const auto& [ctx, p] : *per) {
    if (ctx.device != device || ctx.power_mode != power_mode) continue;
    if (ctx.contention == contention) return p;
    if (ctx.contention < contention && (!lo || ctx.contention > lo->context.contention)) lo = &p;
    if (ctx.contention > contention && (!hi || ctx.contention < hi->context.contention)) hi = &p;
  }
  if (!lo || !hi) {
    throw Error(ErrorCode::NotFound, "no stored contention levels bracket " + io::format_double(contention) + " for " +
                                         id + " on " + std::string(to_string(device)) + " mode " +
                                         std::to_string(power_mode));
  }
  const double t = (contention - lo->context.contention) / (hi->context.contention - lo->context.contention);
  BranchProfile out = *lo;
  out.context.contention = contention;
  out.detector_latency_ms = lerp(lo->detector_latency_ms, hi->detector_latency_ms, t);
  out.tracker_cost.c0_ms = lerp(lo->tracker_cost.c0_ms, hi->tracker_cost.c0_ms, t);
  out.tracker_cost.c1_ms_per_object = lerp(lo->tracker_cost.c1_ms_per_object, hi->tracker_cost.c1_ms_per_object, t);
  out.energy_per_frame_j = lerp(lo->energy_per_frame_j, hi->energy_per_frame_j, t);
  out.sample_count = std::min(lo->sample_count, hi->sample_count);
  return out;
}

BranchProfile profile_for(const ProfileStore& store, const BranchConfig& branch, const RuntimeContext& ctx) {
  if (is_contention_level(ctx.contention)) return lookup(store, branch, ctx);
  return interpolate_context(store, branch, ctx.device, ctx.power_mode, ctx.contention);
}

AccuracyTable reuse_detection_profiles(const AccuracyTable& base, const KnobDomain& domain, const ReuseFn& reuse_fn) {
  AccuracyTable out;
  for (const auto& branch : enumerate_branches(domain)) {
    const std::string det_id = branch_id(detector_side(branch));
    auto it = base.find(det_id);
    if (it == base.end()) throw Error(ErrorCode::MissingBase, "no detector-only accuracy for " + det_id);
    if (branch.detector_only()) {
      out.emplace(det_id, it->second);
      continue;
    }
    const double acc = reuse_fn(branch, it->second);
    if (!(acc >= 0.0 && acc <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "reuse function returned accuracy outside [0,1] for " + branch_id(branch));
    }
    out.emplace(branch_id(branch), acc);
  }
  return out;
}

}  // namespace adaptdet
