#pragma once

#include <cstdint>
#include <vector>

#include "fedsched/core.hpp"

namespace fedsched {

/// Constants of the synthetic footprint model. Peak VRAM is linear in batch
/// size: base + model + per_sample * batch.
struct WorkloadModelConfig {
  double model_mb = 400.0;
  double per_sample_mb = 2.0;
  double base_mb = 300.0;
  double step_time_s_per_ksample = 2.0;
  double warmup_fraction = 0.1;
  int num_local_epochs = 1;
  /// Log-normal sigma applied to duration; 0 disables noise.
  double duration_noise_sigma = 0.0;

  friend bool operator==(const WorkloadModelConfig&, const WorkloadModelConfig&) = default;
};

/// Instantaneous resource usage of a running workload.
struct TracePoint {
  std::int64_t vram_mb = 0;
  std::int64_t ram_mb = 0;
  double cpu_pct = 0.0;
  double gpu_pct = 0.0;

  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

/// One breakpoint of a piecewise-constant, right-continuous trace: `usage`
/// holds on [t, next breakpoint).
struct TraceStep {
  double t = 0.0;
  TracePoint usage;

  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

/// Hidden ground-truth behaviour of one client's local training.
struct WorkloadProfile {
  ClientId client;
  int batch_size = 0;
  int num_samples = 0;
  double duration_s = 0.0;
  std::vector<TraceStep> steps;  // steps.front().t == 0, ascending
  std::int64_t true_peak_vram_mb = 0;

  friend bool operator==(const WorkloadProfile&, const WorkloadProfile&) = default;
};

/// Number of constant pieces used to approximate the linear warmup ramp.
inline constexpr int kWarmupRampSteps = 8;

WorkloadProfile synth_workload(ClientId client, int batch_size, int num_samples,
                               double speed_factor, const WorkloadModelConfig& cfg,
                               std::uint64_t seed);

/// Throws std::out_of_range when elapsed lies outside [0, duration_s].
TracePoint trace_at(const WorkloadProfile& w, double elapsed);

}  // namespace fedsched
