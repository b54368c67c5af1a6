#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsched/core.hpp"
#include "fedsched/profiler.hpp"
#include "fedsched/scheduler.hpp"
#include "fedsched/strategy.hpp"
#include "fedsched/workload.hpp"

namespace fedsched {

/// A slice of the client pool sharing one training setup.
struct Cohort {
  double fraction = 1.0;
  int batch_size = 32;
  int num_samples = 500;
  double speed_factor = 1.0;

  friend bool operator==(const Cohort&, const Cohort&) = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int rounds = 1;
  std::size_t pool_size = 1;
  std::size_t clients_per_round = 1;
  ClusterSpec cluster;
  StrategyConfig strategy;
  WorkloadModelConfig workload;
  std::vector<Cohort> cohorts;
  double monitor_interval_s = kDefaultMonitorIntervalS;
  std::size_t model_dim = 8;
  /// When false every round samples with the experiment seed, so a partial
  /// cohort stays fixed across rounds.
  bool resample_each_round = false;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline constexpr double kCohortFractionTolerance = 1e-9;

/// Returns a message naming the offending field(s), or nullopt.
std::optional<std::string> validate_experiment_config(const ExperimentConfig& cfg);

/// Pool share of each cohort by largest remainder; sums to pool_size.
std::vector<std::size_t> cohort_sizes(std::span<const Cohort> cohorts, std::size_t pool_size);

/// One hidden workload per pool member; cohorts occupy contiguous id ranges.
std::vector<WorkloadProfile> build_workloads(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<RoundReport> rounds;
  ModelParams final_params;
};

/// Runs cfg.rounds rounds back to back on one simulated clock. Throws
/// std::invalid_argument for an invalid config before simulating anything.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  std::size_t clients_per_round = 0;
  StrategyKind kind = StrategyKind::static_fedavg;
  /// Sum of makespans excluding the first (profiling) round, or the single
  /// round's makespan when rounds == 1.
  double total_time_s = 0.0;
  /// Sum of all makespans, profiling round included.
  double total_time_with_profiling_s = 0.0;
  double alloc_vram_pct = 0.0;
  double used_vram_pct = 0.0;
  std::size_t oom_count = 0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // per point: static then resource-aware

  const SweepRow* find(std::size_t clients_per_round, StrategyKind kind) const;
};

/// Runs both strategy kinds at every point. Utilisation means cover the same
/// rounds as total_time_s (all rounds when there is only one).
SweepResult run_sweep(const ExperimentConfig& cfg, std::span<const std::size_t> points);

}  // namespace fedsched
