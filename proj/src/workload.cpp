#include "fedsched/workload.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace fedsched {

namespace {

std::int64_t round_mb(double mb) { return static_cast<std::int64_t>(std::llround(mb)); }

void check_inputs(int batch_size, int num_samples, double speed_factor,
                  const WorkloadModelConfig& cfg) {
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (num_samples <= 0) throw std::invalid_argument("num_samples must be positive");
  if (!(speed_factor > 0.0)) throw std::invalid_argument("speed_factor must be positive");
  if (!(cfg.model_mb > 0.0) || !(cfg.per_sample_mb > 0.0) || !(cfg.base_mb > 0.0) ||
      !(cfg.step_time_s_per_ksample > 0.0) || cfg.num_local_epochs <= 0) {
    throw std::invalid_argument("workload model constants must be positive");
  }
  if (!(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0)) {
    throw std::invalid_argument("warmup_fraction must lie in [0, 1)");
  }
  if (!(cfg.duration_noise_sigma >= 0.0)) {
    throw std::invalid_argument("duration_noise_sigma must be non-negative");
  }
}

}  // namespace

WorkloadProfile synth_workload(ClientId client, int batch_size, int num_samples,
                               double speed_factor, const WorkloadModelConfig& cfg,
                               std::uint64_t seed) {
  check_inputs(batch_size, num_samples, speed_factor, cfg);

  WorkloadProfile w;
  w.client = client;
  w.batch_size = batch_size;
  w.num_samples = num_samples;
  w.duration_s = cfg.num_local_epochs * static_cast<double>(num_samples) *
                 cfg.step_time_s_per_ksample / (1000.0 * speed_factor);
  if (cfg.duration_noise_sigma > 0.0) {
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (client.value + 1)));
    std::normal_distribution<double> normal(0.0, cfg.duration_noise_sigma);
    w.duration_s *= std::exp(normal(rng));
  }

  const double batch = static_cast<double>(batch_size);
  const double peak_vram = cfg.base_mb + cfg.model_mb + cfg.per_sample_mb * batch;
  // Host side holds the model copy plus pinned staging for half a batch.
  const double peak_ram = cfg.base_mb + cfg.model_mb + 0.5 * cfg.per_sample_mb * batch;
  const double steady_gpu = 100.0 * batch / (batch + 64.0);
  w.true_peak_vram_mb = round_mb(peak_vram);

  const TracePoint plateau{w.true_peak_vram_mb, round_mb(peak_ram), 60.0, steady_gpu};
  const double warmup_s = cfg.warmup_fraction * w.duration_s;
  if (warmup_s > 0.0) {
    for (int k = 0; k < kWarmupRampSteps; ++k) {
      const double frac = static_cast<double>(k) / kWarmupRampSteps;
      TracePoint p;
      p.vram_mb = round_mb(cfg.base_mb + (peak_vram - cfg.base_mb) * frac);
      p.ram_mb = round_mb(cfg.base_mb + (peak_ram - cfg.base_mb) * frac);
      p.cpu_pct = 100.0;
      p.gpu_pct = 10.0;
      w.steps.push_back({warmup_s * frac, p});
    }
  }
  w.steps.push_back({warmup_s, plateau});
  return w;
}

TracePoint trace_at(const WorkloadProfile& w, double elapsed) {
  if (!(elapsed >= 0.0 && elapsed <= w.duration_s) || w.steps.empty()) {
    throw std::out_of_range("trace_at: elapsed " + std::to_string(elapsed) +
                            " outside [0, " + std::to_string(w.duration_s) + "]");
  }
  auto it = std::upper_bound(w.steps.begin(), w.steps.end(), elapsed,
                             [](double e, const TraceStep& s) { return e < s.t; });
  return std::prev(it)->usage;
}

}  // namespace fedsched
