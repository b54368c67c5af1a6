#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "fedsched/core.hpp"
#include "fedsched/workload.hpp"

namespace fedsched {

inline constexpr double kDefaultMonitorIntervalS = 0.7;

/// Source of usage readings for one client at a point in time. Reads must not
/// perturb the workload being observed.
class StatsProvider {
 public:
  virtual ~StatsProvider() = default;
  virtual UsageSample read(ClientId client, double t) const = 0;
};

/// Append-only sample buffer bound to a single client. Appends and reads are
/// mutually excluded so a sampling thread and a summarizing thread may share
/// one handle.
class MonitorHandle {
 public:
  /// Throws std::invalid_argument for a non-positive interval.
  MonitorHandle(ClientId client, double interval_s);

  MonitorHandle(const MonitorHandle&) = delete;
  MonitorHandle& operator=(const MonitorHandle&) = delete;
  /// Not thread-safe with respect to the moved-to object.
  MonitorHandle(MonitorHandle&& other) noexcept;

  ClientId client() const { return client_; }
  double interval_s() const { return interval_s_; }

  /// Throws std::invalid_argument if sample.t precedes the previous sample.
  void append(const UsageSample& sample);
  std::vector<UsageSample> samples() const;
  std::size_t size() const;

 private:
  ClientId client_;
  double interval_s_;
  mutable std::mutex mu_;
  std::vector<UsageSample> samples_;
};

/// Grid points start, start+interval, ... that do not exceed end:
/// floor((end - start) / interval) + 1, tolerant of decimal representation
/// error in the inputs.
std::size_t sample_count(double start_t, double end_t, double interval_s);

/// Samples `provider` on the fixed grid over [start_t, end_t].
MonitorHandle start_monitor(ClientId client, double interval_s, const StatsProvider& provider,
                            double start_t, double end_t);

/// Throws std::runtime_error("no samples collected") on an empty handle.
UsageSummary stop_monitor(const MonitorHandle& handle);

/// Aggregates a sample stream. CPU and GPU time integrate utilisation over the
/// sampling interval.
UsageSummary summarize(std::span<const UsageSample> samples, double interval_s);

ClientProperties summary_to_properties(const UsageSummary& summary, double duration_s);

/// Reads usage from the hidden workload traces of running clients. A client
/// placed without a GPU reports zero GPU activity and VRAM.
class TraceStatsProvider final : public StatsProvider {
 public:
  void bind(ClientId client, const WorkloadProfile& workload, double start_t, bool on_gpu);
  UsageSample read(ClientId client, double t) const override;

 private:
  struct Binding {
    const WorkloadProfile* workload;
    double start_t;
    bool on_gpu;
  };
  std::map<ClientId, Binding> bindings_;
};

}  // namespace fedsched
