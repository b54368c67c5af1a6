#include "fedsched/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsched {

namespace {
constexpr double kGridSlack = 1e-9;
}

MonitorHandle::MonitorHandle(ClientId client, double interval_s)
    : client_(client), interval_s_(interval_s) {
  if (!(interval_s > 0.0)) throw std::invalid_argument("monitor interval must be positive");
}

MonitorHandle::MonitorHandle(MonitorHandle&& other) noexcept
    : client_(other.client_), interval_s_(other.interval_s_) {
  std::lock_guard lock(other.mu_);
  samples_ = std::move(other.samples_);
}

void MonitorHandle::append(const UsageSample& sample) {
  std::lock_guard lock(mu_);
  if (!samples_.empty() && sample.t < samples_.back().t) {
    throw std::invalid_argument("sample timestamps must be non-decreasing");
  }
  samples_.push_back(sample);
}

std::vector<UsageSample> MonitorHandle::samples() const {
  std::lock_guard lock(mu_);
  return samples_;
}

std::size_t MonitorHandle::size() const {
  std::lock_guard lock(mu_);
  return samples_.size();
}

std::size_t sample_count(double start_t, double end_t, double interval_s) {
  if (!(interval_s > 0.0)) throw std::invalid_argument("monitor interval must be positive");
  if (!(end_t > start_t)) throw std::invalid_argument("monitor window must have end > start");
  const double steps = (end_t - start_t) / interval_s;
  return static_cast<std::size_t>(std::floor(steps * (1.0 + kGridSlack) + kGridSlack)) + 1;
}

MonitorHandle start_monitor(ClientId client, double interval_s, const StatsProvider& provider,
                            double start_t, double end_t) {
  MonitorHandle handle(client, interval_s);
  const std::size_t n = sample_count(start_t, end_t, interval_s);
  for (std::size_t i = 0; i < n; ++i) {
    // The last grid point may overshoot end_t by rounding error only.
    const double t = std::min(start_t + static_cast<double>(i) * interval_s, end_t);
    UsageSample s = provider.read(client, t);
    s.t = t;
    handle.append(s);
  }
  return handle;
}

UsageSummary summarize(std::span<const UsageSample> samples, double interval_s) {
  if (samples.empty()) throw std::runtime_error("no samples collected");
  UsageSummary out;
  double sum_vram = 0.0, sum_ram = 0.0, sum_cpu = 0.0, sum_gpu = 0.0;
  for (const auto& s : samples) {
    out.peak_vram_mb = std::max(out.peak_vram_mb, s.vram_mb);
    out.peak_ram_mb = std::max(out.peak_ram_mb, s.ram_mb);
    out.peak_gpu_pct = std::max(out.peak_gpu_pct, s.gpu_pct);
    sum_vram += static_cast<double>(s.vram_mb);
    sum_ram += static_cast<double>(s.ram_mb);
    sum_cpu += s.cpu_pct;
    sum_gpu += s.gpu_pct;
    out.cpu_time_s += s.cpu_pct / 100.0 * interval_s;
    out.gpu_time_s += s.gpu_pct / 100.0 * interval_s;
  }
  const double n = static_cast<double>(samples.size());
  out.n_samples = samples.size();
  out.mean_vram_mb = sum_vram / n;
  out.mean_ram_mb = sum_ram / n;
  out.mean_cpu_pct = sum_cpu / n;
  out.mean_gpu_pct = sum_gpu / n;
  return out;
}

UsageSummary stop_monitor(const MonitorHandle& handle) {
  const auto samples = handle.samples();
  return summarize(samples, handle.interval_s());
}

ClientProperties summary_to_properties(const UsageSummary& s, double duration_s) {
  return {
      {props::kPeakVramMb, static_cast<double>(s.peak_vram_mb)},
      {props::kPeakRamMb, static_cast<double>(s.peak_ram_mb)},
      {props::kMeanCpuPct, s.mean_cpu_pct},
      {props::kMeanGpuPct, s.mean_gpu_pct},
      {props::kCpuTimeS, s.cpu_time_s},
      {props::kGpuTimeS, s.gpu_time_s},
      {props::kTrainDurationS, duration_s},
      {props::kUsesGpu, s.peak_gpu_pct > 0.0 ? 1.0 : 0.0},
  };
}

void TraceStatsProvider::bind(ClientId client, const WorkloadProfile& workload, double start_t,
                              bool on_gpu) {
  bindings_[client] = Binding{&workload, start_t, on_gpu};
}

UsageSample TraceStatsProvider::read(ClientId client, double t) const {
  auto it = bindings_.find(client);
  if (it == bindings_.end()) {
    throw std::out_of_range("no workload bound for client " + std::to_string(client.value));
  }
  const Binding& b = it->second;
  const double elapsed = std::clamp(t - b.start_t, 0.0, b.workload->duration_s);
  const TracePoint p = trace_at(*b.workload, elapsed);
  UsageSample s;
  s.t = t;
  s.cpu_pct = p.cpu_pct;
  s.ram_mb = p.ram_mb;
  if (b.on_gpu) {
    s.gpu_pct = p.gpu_pct;
    s.vram_mb = p.vram_mb;
  }
  return s;
}

}  // namespace fedsched
