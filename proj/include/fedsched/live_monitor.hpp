#pragma once

// Wall-clock sampling for live processes. Not used by the simulator; the
// simulation drives monitors from the event loop instead.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <thread>

#include "fedsched/profiler.hpp"

namespace fedsched {

/// Samples a provider on a background thread every `interval` until stop().
/// Sample timestamps are seconds since construction.
class ThreadedMonitor {
 public:
  ThreadedMonitor(ClientId client, std::chrono::duration<double> interval,
                  const StatsProvider& provider);
  ~ThreadedMonitor();

  ThreadedMonitor(const ThreadedMonitor&) = delete;
  ThreadedMonitor& operator=(const ThreadedMonitor&) = delete;

  const MonitorHandle& handle() const { return handle_; }

  /// Joins the sampling thread and summarizes. Safe to call from any thread;
  /// later calls return a summary of the same samples.
  UsageSummary stop();

 private:
  void run(std::stop_token token);

  MonitorHandle handle_;
  const StatsProvider& provider_;
  std::chrono::duration<double> interval_;
  std::chrono::steady_clock::time_point origin_;
  std::mutex stop_mu_;
  std::condition_variable_any wake_;
  std::jthread worker_;
};

/// Linux /proc reader for the calling process: CPU% from utime+stime deltas,
/// RAM from resident set size. GPU fields stay zero; attributing device memory
/// to a process needs vendor tooling.
class ProcSelfStatsProvider final : public StatsProvider {
 public:
  ProcSelfStatsProvider();
  UsageSample read(ClientId client, double t) const override;

 private:
  mutable std::mutex mu_;
  mutable double last_cpu_s_ = 0.0;
  mutable double last_t_ = 0.0;
  mutable bool primed_ = false;
};

}  // namespace fedsched
