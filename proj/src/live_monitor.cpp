#include "fedsched/live_monitor.hpp"

#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

namespace fedsched {

ThreadedMonitor::ThreadedMonitor(ClientId client, std::chrono::duration<double> interval,
                                 const StatsProvider& provider)
    : handle_(client, interval.count()),
      provider_(provider),
      interval_(interval),
      origin_(std::chrono::steady_clock::now()),
      worker_([this](std::stop_token token) { run(token); }) {}

ThreadedMonitor::~ThreadedMonitor() { stop(); }

void ThreadedMonitor::run(std::stop_token token) {
  auto next = origin_;
  while (!token.stop_requested()) {
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
    UsageSample s = provider_.read(handle_.client(), t);
    s.t = t;
    handle_.append(s);
    next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(interval_);
    std::unique_lock lock(stop_mu_);
    wake_.wait_until(lock, token, next, [] { return false; });
  }
}

UsageSummary ThreadedMonitor::stop() {
  if (worker_.joinable()) {
    worker_.request_stop();
    worker_.join();
  }
  if (handle_.size() == 0) return UsageSummary{};
  return stop_monitor(handle_);
}

namespace {

double read_process_cpu_seconds() {
  std::ifstream in("/proc/self/stat");
  std::string line;
  if (!std::getline(in, line)) return 0.0;
  // Field 2 (comm) may contain spaces; skip past its closing parenthesis.
  const auto close = line.rfind(')');
  if (close == std::string::npos) return 0.0;
  std::istringstream rest(line.substr(close + 2));
  std::string field;
  unsigned long long utime = 0, stime = 0;
  // Fields 3..13 precede utime (14) and stime (15).
  for (int i = 3; i <= 13; ++i) rest >> field;
  rest >> utime >> stime;
  const long ticks = ::sysconf(_SC_CLK_TCK);
  return static_cast<double>(utime + stime) / static_cast<double>(ticks > 0 ? ticks : 100);
}

std::int64_t read_resident_mb() {
  std::ifstream in("/proc/self/statm");
  long long size = 0, resident = 0;
  in >> size >> resident;
  const long page = ::sysconf(_SC_PAGESIZE);
  return resident * (page > 0 ? page : 4096) / (1024 * 1024);
}

}  // namespace

ProcSelfStatsProvider::ProcSelfStatsProvider() {
  last_cpu_s_ = read_process_cpu_seconds();
}

UsageSample ProcSelfStatsProvider::read(ClientId, double t) const {
  UsageSample s;
  s.t = t;
  s.ram_mb = read_resident_mb();
  const double cpu_s = read_process_cpu_seconds();
  std::lock_guard lock(mu_);
  if (primed_ && t > last_t_) {
    s.cpu_pct = std::clamp(100.0 * (cpu_s - last_cpu_s_) / (t - last_t_), 0.0, 100.0);
  }
  last_cpu_s_ = cpu_s;
  last_t_ = t;
  primed_ = true;
  return s;
}

}  // namespace fedsched
