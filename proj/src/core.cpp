#include "fedsched/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fedsched {

namespace {
// Absorbs representation error of decimal inputs such as 0.3 * 1024.
constexpr double kRoundingSlack = 1e-9;
}  // namespace

Share Share::ceil(double value) {
  const double scaled = value * static_cast<double>(kScale);
  return Share(static_cast<std::int64_t>(std::ceil(scaled - kRoundingSlack)));
}

Share Share::floor(double value) {
  const double scaled = value * static_cast<double>(kScale);
  return Share(static_cast<std::int64_t>(std::floor(scaled + kRoundingSlack)));
}

std::int64_t ClusterSpec::total_vram_mb() const {
  std::int64_t total = 0;
  for (const auto& g : gpus) total += g.vram_mb;
  return total;
}

std::int64_t ClusterSpec::max_device_vram_mb() const {
  std::int64_t best = 0;
  for (const auto& g : gpus) best = std::max(best, g.vram_mb);
  return best;
}

const GpuDevice* ClusterSpec::device(int device_index) const {
  for (const auto& g : gpus) {
    if (g.device_index == device_index) return &g;
  }
  return nullptr;
}

std::optional<std::string> validate_cluster(const ClusterSpec& cluster) {
  if (cluster.cpu_cores < Share::whole(1)) return "cluster needs at least 1 cpu core";
  std::set<int> seen;
  for (const auto& g : cluster.gpus) {
    if (g.vram_mb <= 0) return "gpu " + std::to_string(g.device_index) + " has no vram";
    if (!seen.insert(g.device_index).second) {
      return "duplicate gpu device index " + std::to_string(g.device_index);
    }
  }
  return std::nullopt;
}

std::optional<std::string> validate_resource_spec(const ResourceSpec& spec,
                                                  const ClusterSpec& cluster) {
  if (spec.num_cpus.units() < 0) return "negative cpu demand";
  if (spec.num_gpus.units() < 0) return "negative gpu demand";
  if (spec.vram_mb < 0) return "negative vram demand";
  if (spec.num_cpus > cluster.cpu_cores) return "cpu demand exceeds capacity";
  if (spec.num_gpus > Share::whole(1)) return "gpu fraction exceeds one device";
  if (spec.uses_gpu()) {
    if (cluster.gpus.empty()) return "gpu demand on a cluster without gpus";
    if (spec.vram_mb > cluster.max_device_vram_mb()) return "vram demand exceeds device capacity";
  } else if (spec.vram_mb > 0) {
    return "vram demand without a gpu fraction";
  }
  return std::nullopt;
}

bool has_canonical_properties(const ClientProperties& p) {
  for (const char* key : props::kCanonical) {
    auto it = p.find(key);
    if (it == p.end() || !std::isfinite(it->second) || it->second < 0.0) return false;
  }
  return true;
}

}  // namespace fedsched
