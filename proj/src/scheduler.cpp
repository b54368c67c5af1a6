#include "fedsched/scheduler.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <utility>

#include "fedsched/sim_kernel.hpp"

namespace fedsched {

Share vram_to_gpu_ratio(std::int64_t vram_mb, const ClusterSpec& cluster) {
  if (vram_mb < 0) throw std::invalid_argument("vram_mb must be non-negative");
  if (vram_mb == 0) return Share{};
  const std::int64_t total = cluster.total_vram_mb();
  if (total <= 0) throw std::invalid_argument("no GPU capacity");
  // Integer ceil(vram * 1024 / total); exact, no float rounding.
  return Share::from_units((vram_mb * Share::kScale + total - 1) / total);
}

// ---------------------------------------------------------------------------
// CapacityLedger

CapacityLedger::CapacityLedger(const ClusterSpec& cluster)
    : cluster_(cluster), free_cpus_(cluster.cpu_cores) {
  devices_.reserve(cluster.gpus.size());
  for (const auto& g : cluster.gpus) {
    Device d;
    d.device_index = g.device_index;
    d.vram_mb = g.vram_mb;
    d.free_vram_mb = g.vram_mb;
    devices_.push_back(d);
  }
  std::sort(devices_.begin(), devices_.end(),
            [](const Device& a, const Device& b) { return a.device_index < b.device_index; });
}

bool operator==(const CapacityLedger& a, const CapacityLedger& b) {
  return a.free_cpus_ == b.free_cpus_ && a.devices_ == b.devices_ &&
         a.allocations_ == b.allocations_;
}

CapacityLedger::Device& CapacityLedger::device_by_index(int device_index) {
  for (auto& d : devices_) {
    if (d.device_index == device_index) return d;
  }
  throw std::logic_error("unknown gpu device " + std::to_string(device_index));
}

std::optional<CapacityLedger::Placement> CapacityLedger::find_placement(
    const ResourceSpec& spec) const {
  if (spec.num_cpus > free_cpus_) return std::nullopt;
  if (!spec.uses_gpu()) return Placement{};
  for (const auto& d : devices_) {
    if (spec.num_gpus <= d.free_fraction && spec.vram_mb <= d.free_vram_mb) {
      return Placement{d.device_index};
    }
  }
  return std::nullopt;
}

const Allocation& CapacityLedger::admit(ClientId client, const ResourceSpec& spec, double t) {
  if (is_allocated(client)) {
    throw std::logic_error("client " + std::to_string(client.value) + " already allocated");
  }
  const auto placement = find_placement(spec);
  if (!placement) {
    throw std::logic_error("client " + std::to_string(client.value) + " does not fit");
  }
  free_cpus_ -= spec.num_cpus;
  if (placement->device_index) {
    Device& d = device_by_index(*placement->device_index);
    d.free_fraction -= spec.num_gpus;
    d.free_vram_mb -= spec.vram_mb;
    ++d.running;
  }
  Allocation a{client, spec, placement->device_index, t, std::nullopt, next_admit_order_++};
  return allocations_.emplace(client, a).first->second;
}

Allocation CapacityLedger::release(ClientId client, double t) {
  auto it = allocations_.find(client);
  if (it == allocations_.end()) {
    throw std::logic_error("release of unallocated client " + std::to_string(client.value));
  }
  set_true_usage(client, 0);
  true_usage_.erase(client);
  Allocation a = it->second;
  allocations_.erase(it);
  free_cpus_ += a.spec.num_cpus;
  if (a.gpu_device) {
    Device& d = device_by_index(*a.gpu_device);
    d.free_fraction += a.spec.num_gpus;
    d.free_vram_mb += a.spec.vram_mb;
    --d.running;
  }
  a.release_t = t;
  return a;
}

void CapacityLedger::set_true_usage(ClientId client, std::int64_t vram_mb) {
  auto it = allocations_.find(client);
  if (it == allocations_.end() || !it->second.gpu_device) return;
  std::int64_t& current = true_usage_[client];
  device_by_index(*it->second.gpu_device).used_vram_mb += vram_mb - current;
  current = vram_mb;
}

std::int64_t CapacityLedger::true_usage(ClientId client) const {
  auto it = true_usage_.find(client);
  return it == true_usage_.end() ? 0 : it->second;
}

std::optional<std::string> CapacityLedger::check_invariants() const {
  Share cpus;
  std::map<int, std::pair<Share, std::int64_t>> per_device;
  for (const auto& [id, a] : allocations_) {
    cpus += a.spec.num_cpus;
    if (a.gpu_device.has_value() != a.spec.uses_gpu()) {
      return "allocation of client " + std::to_string(id.value) + " has inconsistent placement";
    }
    if (a.gpu_device) {
      auto& slot = per_device[*a.gpu_device];
      slot.first += a.spec.num_gpus;
      slot.second += a.spec.vram_mb;
    }
  }
  if (cpus > cluster_.cpu_cores) return "cpu oversubscribed";
  if (cpus + free_cpus_ != cluster_.cpu_cores) return "cpu ledger drift";
  for (const auto& d : devices_) {
    const auto [frac, vram] = per_device[d.device_index];
    if (frac > Share::whole(1)) return "gpu fraction oversubscribed on device " + std::to_string(d.device_index);
    if (vram > d.vram_mb) return "vram oversubscribed on device " + std::to_string(d.device_index);
    if (frac + d.free_fraction != Share::whole(1) || vram + d.free_vram_mb != d.vram_mb) {
      return "gpu ledger drift on device " + std::to_string(d.device_index);
    }
    if (d.free_fraction.units() < 0 || d.free_vram_mb < 0) return "negative free capacity";
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Admission

std::vector<Allocation> try_admit(std::deque<PendingClient>& queue, CapacityLedger& ledger,
                                  double t) {
  std::vector<Allocation> admitted;
  while (!queue.empty() && ledger.find_placement(queue.front().spec)) {
    admitted.push_back(ledger.admit(queue.front().client, queue.front().spec, t));
    queue.pop_front();
  }
  return admitted;
}

ReleaseResult release(ClientId client, std::deque<PendingClient>& queue, CapacityLedger& ledger,
                      double t) {
  ReleaseResult r;
  r.released = ledger.release(client, t);
  r.admitted = try_admit(queue, ledger, t);
  return r;
}

std::optional<ClientId> detect_oom(std::span<const DeviceOccupant> occupants,
                                   std::int64_t device_vram_mb) {
  std::int64_t used = 0;
  for (const auto& o : occupants) used += o.true_vram_mb;
  if (used <= device_vram_mb || occupants.empty()) return std::nullopt;
  const auto victim = std::max_element(
      occupants.begin(), occupants.end(),
      [](const DeviceOccupant& a, const DeviceOccupant& b) { return a.admit_order < b.admit_order; });
  return victim->client;
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::completed:
      return "completed";
    case Outcome::oom_failed:
      return "oom_failed";
  }
  return "unknown";
}

int TimelinePoint::running() const {
  int n = 0;
  for (const auto& d : devices) n += d.running;
  return n;
}

std::size_t RoundReport::oom_count() const {
  return static_cast<std::size_t>(std::count_if(clients.begin(), clients.end(), [](const ClientRecord& c) {
    return c.outcome == Outcome::oom_failed;
  }));
}

// ---------------------------------------------------------------------------
// Round execution

namespace {

class RoundRunner {
 public:
  RoundRunner(std::span<const RoundClient> clients, const ClusterSpec& cluster,
              const SubmitOptions& options)
      : clients_(clients),
        options_(options),
        kernel_(options.start_t),
        ledger_(cluster),
        runtime_(clients.size()) {
    report_.round_index = options.round_index;
    report_.start_s = options.start_t;
    report_.clients.resize(clients.size());
    for (std::size_t i = 0; i < clients.size(); ++i) {
      index_of_.emplace(clients[i].client, i);
      queue_.push_back({clients[i].client, clients[i].spec});
    }
  }

  RoundReport run() {
    kernel_.schedule(options_.start_t, [this] {
      admit_from_queue();
      after_event();
    });
    kernel_.run_until_idle();
    if (!queue_.empty() || !ledger_.allocations().empty()) {
      throw std::logic_error("round ended with clients still queued or running");
    }
    double last = options_.start_t;
    for (const auto& c : report_.clients) last = std::max(last, *c.allocation.release_t);
    report_.makespan_s = last - options_.start_t;
    return std::move(report_);
  }

 private:
  struct Runtime {
    std::vector<SimKernel::EventHandle> pending;
  };

  void admit_from_queue() {
    for (const Allocation& a : try_admit(queue_, ledger_, kernel_.now())) on_admit(a);
  }

  void on_admit(const Allocation& a) {
    const std::size_t i = index_of_.at(a.client);
    const WorkloadProfile& w = clients_[i].workload;
    report_.clients[i].allocation = a;
    if (options_.monitors_on) provider_.bind(a.client, w, a.admit_t, a.gpu_device.has_value());
    ledger_.set_true_usage(a.client, w.steps.front().usage.vram_mb);

    auto& pending = runtime_[i].pending;
    for (std::size_t k = 1; k < w.steps.size(); ++k) {
      if (w.steps[k].t >= w.duration_s) break;
      pending.push_back(kernel_.schedule(a.admit_t + w.steps[k].t, [this, i, k] {
        ledger_.set_true_usage(clients_[i].client, clients_[i].workload.steps[k].usage.vram_mb);
        request_oom_check();
        after_event();
      }));
    }
    pending.push_back(kernel_.schedule(a.admit_t + w.duration_s, [this, i] {
      finish(i, Outcome::completed);
      admit_from_queue();
      after_event();
    }));
    request_oom_check();
  }

  void finish(std::size_t i, Outcome outcome) {
    for (auto h : runtime_[i].pending) kernel_.cancel(h);
    runtime_[i].pending.clear();
    ClientRecord& rec = report_.clients[i];
    rec.allocation = ledger_.release(clients_[i].client, kernel_.now());
    rec.outcome = outcome;
    const double start = rec.allocation.admit_t;
    const double end = *rec.allocation.release_t;
    if (options_.monitors_on && end > start) {
      const MonitorHandle h =
          start_monitor(rec.allocation.client, options_.monitor_interval_s, provider_, start, end);
      rec.usage = stop_monitor(h);
    }
    request_oom_check();
  }

  // Deferred to the end of the current timestamp: the check event is queued
  // behind every event already pending at this time, so releases at t are
  // applied before usage is compared with capacity.
  void request_oom_check() {
    if (check_pending_) return;
    check_pending_ = true;
    kernel_.schedule(kernel_.now(), [this] {
      check_pending_ = false;
      bool failed = false;
      for (const auto& d : ledger_.devices()) {
        while (true) {
          std::vector<DeviceOccupant> occupants;
          for (const auto& [id, a] : ledger_.allocations()) {
            if (a.gpu_device == d.device_index) {
              occupants.push_back({id, a.admit_order, ledger_.true_usage(id)});
            }
          }
          const auto victim = detect_oom(occupants, d.vram_mb);
          if (!victim) break;
          finish(index_of_.at(*victim), Outcome::oom_failed);
          failed = true;
        }
      }
      if (failed) admit_from_queue();
      after_event();
    });
  }

  void after_event() {
    record_timeline();
    if (options_.observer) options_.observer(SchedulerSnapshot{kernel_.now(), ledger_, queue_});
  }

  void record_timeline() {
    TimelinePoint p;
    p.t = kernel_.now();
    for (const auto& d : ledger_.devices()) {
      p.devices.push_back({d.allocated_vram_mb(), d.used_vram_mb, d.running});
    }
    auto& tl = report_.timeline;
    if (!tl.empty() && tl.back().t == p.t) {
      tl.back() = std::move(p);
    } else if (tl.empty() || tl.back().devices != p.devices) {
      tl.push_back(std::move(p));
    }
  }

  std::span<const RoundClient> clients_;
  const SubmitOptions& options_;
  SimKernel kernel_;
  CapacityLedger ledger_;
  std::deque<PendingClient> queue_;
  std::vector<Runtime> runtime_;
  std::map<ClientId, std::size_t> index_of_;
  TraceStatsProvider provider_;
  RoundReport report_;
  bool check_pending_ = false;
};

}  // namespace

RoundReport submit_round(std::span<const RoundClient> clients, const ClusterSpec& cluster,
                         const SubmitOptions& options) {
  if (auto bad = validate_cluster(cluster)) throw std::invalid_argument("invalid cluster: " + *bad);
  std::set<ClientId> seen;
  for (const auto& c : clients) {
    if (!seen.insert(c.client).second) {
      throw std::invalid_argument("client " + std::to_string(c.client.value) +
                                  " submitted twice in one round");
    }
    if (auto bad = validate_resource_spec(c.spec, cluster)) {
      throw std::invalid_argument("client " + std::to_string(c.client.value) + ": " + *bad);
    }
    if (c.workload.steps.empty() || !(c.workload.duration_s > 0.0)) {
      throw std::invalid_argument("client " + std::to_string(c.client.value) +
                                  ": workload has no trace");
    }
  }
  return RoundRunner(clients, cluster, options).run();
}

// ---------------------------------------------------------------------------
// Utilisation

namespace {

struct UtilisationSums {
  double alloc = 0.0;       // MB * s
  double used = 0.0;        // MB * s
  double span = 0.0;        // s
  double full_used = 0.0;   // MB * s
  double full_span = 0.0;   // s
};

void accumulate(const RoundReport& r, UtilisationSums& sums) {
  if (r.makespan_s <= 0.0 || r.timeline.empty()) return;
  const double end = r.start_s + r.makespan_s;
  int peak = 0;
  for (const auto& p : r.timeline) peak = std::max(peak, p.running());
  for (std::size_t i = 0; i < r.timeline.size(); ++i) {
    const auto& p = r.timeline[i];
    const double next = i + 1 < r.timeline.size() ? r.timeline[i + 1].t : end;
    const double dt = std::min(next, end) - std::max(p.t, r.start_s);
    if (dt <= 0.0) continue;
    double alloc = 0.0, used = 0.0;
    for (const auto& d : p.devices) {
      alloc += static_cast<double>(d.alloc_vram_mb);
      used += static_cast<double>(d.used_vram_mb);
    }
    sums.alloc += alloc * dt;
    sums.used += used * dt;
    if (peak > 0 && p.running() == peak) {
      sums.full_used += used * dt;
      sums.full_span += dt;
    }
  }
  sums.span += r.makespan_s;
}

Utilisation finish(const UtilisationSums& sums, const ClusterSpec& cluster) {
  Utilisation u;
  const double capacity = static_cast<double>(cluster.total_vram_mb());
  if (capacity <= 0.0) return u;
  if (sums.span > 0.0) {
    u.alloc_vram_pct = 100.0 * sums.alloc / (capacity * sums.span);
    u.used_vram_pct = 100.0 * sums.used / (capacity * sums.span);
  }
  if (sums.full_span > 0.0) {
    u.full_occupancy_used_vram_pct = 100.0 * sums.full_used / (capacity * sums.full_span);
  }
  return u;
}

}  // namespace

Utilisation utilisation(const RoundReport& report, const ClusterSpec& cluster) {
  UtilisationSums sums;
  accumulate(report, sums);
  return finish(sums, cluster);
}

Utilisation utilisation(std::span<const RoundReport> reports, const ClusterSpec& cluster) {
  UtilisationSums sums;
  for (const auto& r : reports) accumulate(r, sums);
  return finish(sums, cluster);
}

}  // namespace fedsched
