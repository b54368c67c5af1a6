#pragma once

// Server-side round logic: client sampling, per-round resource configuration,
// FedAvg aggregation, and the resource-aware variant that turns profiled
// client properties into tighter allocations for the next round.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsched/core.hpp"

namespace fedsched {

enum class StrategyKind { static_fedavg, resource_aware_fedavg };

const char* to_string(StrategyKind kind);
std::optional<StrategyKind> parse_strategy_kind(std::string_view text);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::resource_aware_fedavg;
  ResourceSpec default_spec;
  double safety_margin = 1.10;
  std::int64_t min_vram_mb = 64;
  double oom_backoff_factor = 2.0;

  friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

std::optional<std::string> validate_strategy_config(const StrategyConfig& cfg,
                                                    const ClusterSpec& cluster);

struct ClientSlot {
  ResourceSpec spec;
  std::optional<ClientProperties> last_properties;
  std::optional<int> last_round;
};

struct ClientManagerState {
  std::map<ClientId, ClientSlot> clients;

  /// Pool of clients 0..pool_size-1, all at `default_spec`.
  static ClientManagerState with_pool(std::size_t pool_size, const ResourceSpec& default_spec);
  std::vector<ClientId> pool() const;
};

/// Uniform sample without replacement, deterministic in seed, returned in
/// ascending id order. Throws std::invalid_argument if n > pool size.
std::vector<ClientId> sample_clients(std::span<const ClientId> pool, std::size_t n,
                                     std::uint64_t seed);

struct FitInstruction {
  ClientId client;
  ResourceSpec spec;
  int round_index = 0;
};

struct FitPlan {
  std::vector<FitInstruction> instructions;  // ascending client id
  std::vector<std::string> warnings;
};

/// Resource-aware kind first refreshes the spec of every client that reported
/// properties in round_index - 1, then samples. The static kind hands out
/// default_spec unconditionally.
FitPlan configure_fit(int round_index, ClientManagerState& state, const StrategyConfig& cfg,
                      const ClusterSpec& cluster, std::size_t n, std::uint64_t seed);

struct ResourceEstimate {
  ResourceSpec spec;
  std::optional<std::string> warning;  // set when the estimate was clamped
};

/// vram = max(min_vram, ceil(peak * margin)) clamped to the largest device;
/// num_gpus follows from vram_to_gpu_ratio. CPU-only clients get no GPU share.
/// Throws std::invalid_argument when canonical properties are missing.
ResourceEstimate next_resource_estimate(const ClientProperties& properties,
                                        const ClusterSpec& cluster, const StrategyConfig& cfg);

struct WeightedParams {
  ModelParams params;
  double num_examples = 0.0;
};

/// Example-weighted mean. Throws std::invalid_argument on empty input,
/// mismatched dimensions, non-positive weights or non-finite parameters.
ModelParams fedavg_aggregate(std::span<const WeightedParams> entries);

struct FitResult {
  ClientId client;
  ModelParams params;
  std::int64_t num_examples = 0;
  ClientProperties properties;
};

/// Aggregates the round's results and saves each participant's properties
/// for the next configure_fit. Throws std::invalid_argument("no results to
/// aggregate") on empty input.
ModelParams aggregate_fit(std::span<const FitResult> results, ClientManagerState& state,
                          int round_index);

/// Multiplies the failed client's VRAM by the backoff factor (clamped to the
/// largest device) and drops its saved properties.
void on_failure(ClientId client, ClientManagerState& state, const StrategyConfig& cfg,
                const ClusterSpec& cluster);

}  // namespace fedsched
