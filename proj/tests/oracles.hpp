#pragma once

// Test-only reference computations. Each one is written independently of the
// library code path it checks: no calls into the scheduler, profiler or
// aggregation code.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

/// Sample count on a grid expressed in integer ticks.
inline std::int64_t grid_count(std::int64_t start_ticks, std::int64_t end_ticks,
                               std::int64_t interval_ticks) {
  return (end_ticks - start_ticks) / interval_ticks + 1;
}

/// sum(w_i * theta_i) / sum(w_i), accumulated in long double.
inline std::vector<double> weighted_mean(const std::vector<std::vector<double>>& params,
                                         const std::vector<double>& weights) {
  const std::size_t dim = params.front().size();
  std::vector<long double> acc(dim, 0.0L);
  long double total = 0.0L;
  for (std::size_t i = 0; i < params.size(); ++i) {
    total += weights[i];
    for (std::size_t k = 0; k < dim; ++k) acc[k] += static_cast<long double>(weights[i]) * params[i][k];
  }
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < dim; ++k) out[k] = static_cast<double>(acc[k] / total);
  return out;
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

/// Demand of one job in integer units: cpu and gpu in 1/1024ths, vram in MB.
struct Job {
  std::int64_t cpu_units = 0;
  std::int64_t gpu_units = 0;
  std::int64_t vram_mb = 0;
  double duration = 0.0;
};

struct Replay {
  double makespan = 0.0;
  std::vector<double> admit;
};

/// Strict-FIFO replay on a single GPU: at each instant, free capacity is
/// recomputed from scratch as capacity minus the demands of running jobs, then
/// the longest fitting queue prefix starts. Time jumps to the next finish.
inline Replay fifo_replay_single_gpu(const std::vector<Job>& jobs, std::int64_t cpu_units,
                                     std::int64_t vram_mb) {
  struct Running {
    std::size_t job;
    double end;
  };
  Replay out;
  out.admit.assign(jobs.size(), -1.0);
  std::vector<Running> running;
  std::size_t head = 0;
  double t = 0.0;
  while (true) {
    while (head < jobs.size()) {
      std::int64_t cpu = 0, gpu = 0, vram = 0;
      for (const auto& r : running) {
        cpu += jobs[r.job].cpu_units;
        if (jobs[r.job].gpu_units > 0) {
          gpu += jobs[r.job].gpu_units;
          vram += jobs[r.job].vram_mb;
        }
      }
      const Job& j = jobs[head];
      const bool fits = cpu + j.cpu_units <= cpu_units &&
                        (j.gpu_units == 0 || (gpu + j.gpu_units <= 1024 && vram + j.vram_mb <= vram_mb));
      if (!fits) break;
      out.admit[head] = t;
      running.push_back({head, t + j.duration});
      ++head;
    }
    if (running.empty()) break;
    double next = std::numeric_limits<double>::infinity();
    for (const auto& r : running) next = std::min(next, r.end);
    t = next;
    out.makespan = std::max(out.makespan, t);
    std::erase_if(running, [t](const Running& r) { return r.end == t; });
  }
  return out;
}

/// ceil(n / k) * d for n identical jobs with concurrency k.
inline double homogeneous_makespan(std::int64_t n, std::int64_t k, double d) {
  return static_cast<double>(ceil_div(n, k)) * d;
}

}  // namespace oracle
