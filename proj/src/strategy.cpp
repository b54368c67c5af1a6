#include "fedsched/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string_view>

#include "fedsched/scheduler.hpp"

namespace fedsched {

namespace {

// ceil() that ignores float noise from decimal factors, so 2600 * 1.1 is 2860.
std::int64_t ceil_mb(double mb) {
  const double slack = 1e-9 * std::max(1.0, std::abs(mb));
  return static_cast<std::int64_t>(std::ceil(mb - slack));
}

// Unbiased draw in [0, bound) from the raw engine output, so samples do not
// depend on the standard library's distribution implementation.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % bound + 1) % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x > limit);
  return x % bound;
}

ResourceSpec spec_for_vram(std::int64_t vram_mb, Share num_cpus, const ClusterSpec& cluster) {
  return ResourceSpec{num_cpus, vram_to_gpu_ratio(vram_mb, cluster), vram_mb};
}

}  // namespace

const char* to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::static_fedavg:
      return "static_fedavg";
    case StrategyKind::resource_aware_fedavg:
      return "resource_aware_fedavg";
  }
  return "unknown";
}

std::optional<StrategyKind> parse_strategy_kind(std::string_view text) {
  if (text == "static_fedavg") return StrategyKind::static_fedavg;
  if (text == "resource_aware_fedavg") return StrategyKind::resource_aware_fedavg;
  return std::nullopt;
}

std::optional<std::string> validate_strategy_config(const StrategyConfig& cfg,
                                                    const ClusterSpec& cluster) {
  if (auto bad = validate_resource_spec(cfg.default_spec, cluster)) return "default spec: " + *bad;
  if (!(cfg.safety_margin >= 1.0)) return "safety_margin must be >= 1";
  if (cfg.min_vram_mb <= 0) return "min_vram_mb must be positive";
  if (!(cfg.oom_backoff_factor > 1.0)) return "oom_backoff_factor must be > 1";
  return std::nullopt;
}

ClientManagerState ClientManagerState::with_pool(std::size_t pool_size,
                                                 const ResourceSpec& default_spec) {
  ClientManagerState s;
  for (std::size_t i = 0; i < pool_size; ++i) {
    s.clients.emplace(ClientId{static_cast<std::uint32_t>(i)}, ClientSlot{default_spec, {}, {}});
  }
  return s;
}

std::vector<ClientId> ClientManagerState::pool() const {
  std::vector<ClientId> ids;
  ids.reserve(clients.size());
  for (const auto& [id, slot] : clients) ids.push_back(id);
  return ids;
}

std::vector<ClientId> sample_clients(std::span<const ClientId> pool, std::size_t n,
                                     std::uint64_t seed) {
  if (n > pool.size()) {
    throw std::invalid_argument("cannot sample " + std::to_string(n) + " clients from a pool of " +
                                std::to_string(pool.size()));
  }
  std::vector<ClientId> ids(pool.begin(), pool.end());
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first n slots become the sample.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(draw_below(rng, ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n);
  std::sort(ids.begin(), ids.end());
  return ids;
}

FitPlan configure_fit(int round_index, ClientManagerState& state, const StrategyConfig& cfg,
                      const ClusterSpec& cluster, std::size_t n, std::uint64_t seed) {
  FitPlan plan;
  if (cfg.kind == StrategyKind::resource_aware_fedavg) {
    for (auto& [id, slot] : state.clients) {
      if (!slot.last_properties || slot.last_round != round_index - 1) continue;
      ResourceEstimate est = next_resource_estimate(*slot.last_properties, cluster, cfg);
      slot.spec = est.spec;
      if (est.warning) {
        plan.warnings.push_back("client " + std::to_string(id.value) + ": " + *est.warning);
      }
    }
  }
  const auto pool = state.pool();
  for (ClientId id : sample_clients(pool, n, seed)) {
    const ResourceSpec& spec =
        cfg.kind == StrategyKind::static_fedavg ? cfg.default_spec : state.clients.at(id).spec;
    plan.instructions.push_back({id, spec, round_index});
  }
  return plan;
}

ResourceEstimate next_resource_estimate(const ClientProperties& properties,
                                        const ClusterSpec& cluster, const StrategyConfig& cfg) {
  if (!has_canonical_properties(properties)) {
    throw std::invalid_argument("client properties are missing canonical keys");
  }
  ResourceEstimate out;
  if (properties.at(props::kUsesGpu) < 0.5) {
    out.spec = ResourceSpec{cfg.default_spec.num_cpus, Share{}, 0};
    return out;
  }
  const double peak = properties.at(props::kPeakVramMb);
  std::int64_t vram = std::max(cfg.min_vram_mb, ceil_mb(peak * cfg.safety_margin));
  const std::int64_t device_max = cluster.max_device_vram_mb();
  if (vram > device_max) {
    out.warning = "estimated vram " + std::to_string(vram) + " MB clamped to device capacity " +
                  std::to_string(device_max) + " MB";
    vram = device_max;
  }
  out.spec = spec_for_vram(vram, cfg.default_spec.num_cpus, cluster);
  return out;
}

ModelParams fedavg_aggregate(std::span<const WeightedParams> entries) {
  if (entries.empty()) throw std::invalid_argument("no results to aggregate");
  const std::size_t dim = entries.front().params.size();
  double total = 0.0;
  for (const auto& e : entries) {
    if (e.params.size() != dim) throw std::invalid_argument("parameter dimension mismatch");
    if (!(e.num_examples > 0.0)) throw std::invalid_argument("num_examples must be positive");
    for (double v : e.params) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite model parameter");
    }
    total += e.num_examples;
  }
  if (!(total > 0.0)) throw std::invalid_argument("zero total weight");

  ModelParams out(dim, 0.0);
  for (const auto& e : entries) {
    const double w = e.num_examples / total;
    for (std::size_t k = 0; k < dim; ++k) out[k] += w * e.params[k];
  }
  return out;
}

ModelParams aggregate_fit(std::span<const FitResult> results, ClientManagerState& state,
                          int round_index) {
  if (results.empty()) throw std::invalid_argument("no results to aggregate");
  std::vector<WeightedParams> entries;
  entries.reserve(results.size());
  for (const auto& r : results) {
    entries.push_back({r.params, static_cast<double>(r.num_examples)});
  }
  ModelParams aggregated = fedavg_aggregate(entries);
  for (const auto& r : results) {
    ClientSlot& slot = state.clients.at(r.client);
    slot.last_properties = r.properties;
    slot.last_round = round_index;
  }
  return aggregated;
}

void on_failure(ClientId client, ClientManagerState& state, const StrategyConfig& cfg,
                const ClusterSpec& cluster) {
  ClientSlot& slot = state.clients.at(client);
  const std::int64_t grown = std::max(
      cfg.min_vram_mb, ceil_mb(static_cast<double>(slot.spec.vram_mb) * cfg.oom_backoff_factor));
  const std::int64_t vram = std::min(grown, cluster.max_device_vram_mb());
  slot.spec = spec_for_vram(vram, slot.spec.num_cpus, cluster);
  slot.last_properties.reset();
  slot.last_round.reset();
}

}  // namespace fedsched
