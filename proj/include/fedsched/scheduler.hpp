#pragma once

// Virtual-client engine: strict-FIFO admission of a round's clients onto a
// simulated cluster, run to completion on the event clock, with OOM detection
// driven by the hidden workload traces.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsched/core.hpp"
#include "fedsched/profiler.hpp"
#include "fedsched/workload.hpp"

namespace fedsched {

/// GPU share for a VRAM amount: vram / total system vram, rounded up to 1/1024.
/// Throws std::invalid_argument("no GPU capacity") when vram_mb > 0 on a
/// cluster without GPU memory.
Share vram_to_gpu_ratio(std::int64_t vram_mb, const ClusterSpec& cluster);

struct Allocation {
  ClientId client;
  ResourceSpec spec;
  std::optional<int> gpu_device;  // device_index, present iff spec.uses_gpu()
  double admit_t = 0.0;
  std::optional<double> release_t;
  std::uint64_t admit_order = 0;  // global admission counter, ties on admit_t

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

struct PendingClient {
  ClientId client;
  ResourceSpec spec;
};

/// Free capacity plus the live allocations it was carved from. Also tracks
/// the true (workload-reported) VRAM in use per device.
class CapacityLedger {
 public:
  struct Device {
    int device_index = 0;
    std::int64_t vram_mb = 0;
    Share free_fraction = Share::whole(1);
    std::int64_t free_vram_mb = 0;
    std::int64_t used_vram_mb = 0;
    int running = 0;

    std::int64_t allocated_vram_mb() const { return vram_mb - free_vram_mb; }
    friend bool operator==(const Device&, const Device&) = default;
  };

  struct Placement {
    std::optional<int> device_index;
  };

  explicit CapacityLedger(const ClusterSpec& cluster);

  Share free_cpus() const { return free_cpus_; }
  const std::vector<Device>& devices() const { return devices_; }
  const std::map<ClientId, Allocation>& allocations() const { return allocations_; }
  bool is_allocated(ClientId client) const { return allocations_.count(client) != 0; }

  /// First-fit placement by ascending device index, or nullopt if the full
  /// demand cannot be met right now.
  std::optional<Placement> find_placement(const ResourceSpec& spec) const;

  /// Throws std::logic_error if the client is already allocated or does not fit.
  const Allocation& admit(ClientId client, const ResourceSpec& spec, double t);
  /// Returns the exact amounts to the ledger. Throws std::logic_error for a
  /// client that is not allocated.
  Allocation release(ClientId client, double t);

  /// Records the true VRAM a GPU-placed client is using right now.
  void set_true_usage(ClientId client, std::int64_t vram_mb);
  std::int64_t true_usage(ClientId client) const;

  /// Recomputes capacity use from the allocation list and compares it with the
  /// free counters. Returns a description of the first inconsistency.
  std::optional<std::string> check_invariants() const;

  /// Equal when free capacity and live allocations match.
  friend bool operator==(const CapacityLedger& a, const CapacityLedger& b);

 private:
  Device& device_by_index(int device_index);

  ClusterSpec cluster_;
  Share free_cpus_;
  std::vector<Device> devices_;
  std::map<ClientId, Allocation> allocations_;
  std::map<ClientId, std::int64_t> true_usage_;
  std::uint64_t next_admit_order_ = 0;
};

/// Admits the queue head while its whole demand fits; stops at the first head
/// that does not (no backfill).
std::vector<Allocation> try_admit(std::deque<PendingClient>& queue, CapacityLedger& ledger,
                                  double t);

struct ReleaseResult {
  Allocation released;
  std::vector<Allocation> admitted;
};

/// Releases `client` and re-runs admission on `queue`.
ReleaseResult release(ClientId client, std::deque<PendingClient>& queue, CapacityLedger& ledger,
                      double t);

struct DeviceOccupant {
  ClientId client;
  std::uint64_t admit_order = 0;
  std::int64_t true_vram_mb = 0;
};

/// Returns the most recently admitted occupant when the summed true usage
/// strictly exceeds the device's VRAM.
std::optional<ClientId> detect_oom(std::span<const DeviceOccupant> occupants,
                                   std::int64_t device_vram_mb);

enum class Outcome { completed, oom_failed };

const char* to_string(Outcome outcome);

struct ClientRecord {
  Allocation allocation;
  Outcome outcome = Outcome::completed;
  std::optional<UsageSummary> usage;  // empty when monitors were off

  friend bool operator==(const ClientRecord&, const ClientRecord&) = default;
};

struct DeviceSnapshot {
  std::int64_t alloc_vram_mb = 0;
  std::int64_t used_vram_mb = 0;
  int running = 0;

  friend bool operator==(const DeviceSnapshot&, const DeviceSnapshot&) = default;
};

/// Cluster state that holds from `t` until the next point.
struct TimelinePoint {
  double t = 0.0;
  std::vector<DeviceSnapshot> devices;  // ascending device_index

  int running() const;
  friend bool operator==(const TimelinePoint&, const TimelinePoint&) = default;
};

struct RoundReport {
  int round_index = 0;
  double start_s = 0.0;
  double makespan_s = 0.0;
  std::vector<ClientRecord> clients;  // submission order
  std::vector<TimelinePoint> timeline;
  std::vector<std::string> warnings;

  std::size_t oom_count() const;
  friend bool operator==(const RoundReport&, const RoundReport&) = default;
};

struct RoundClient {
  ClientId client;
  ResourceSpec spec;
  WorkloadProfile workload;
};

struct SchedulerSnapshot {
  double t = 0.0;
  const CapacityLedger& ledger;
  const std::deque<PendingClient>& queue;
};

struct SubmitOptions {
  int round_index = 0;
  double start_t = 0.0;
  bool monitors_on = true;
  double monitor_interval_s = kDefaultMonitorIntervalS;
  /// Called after every dispatched event, for tests and tracing.
  std::function<void(const SchedulerSnapshot&)> observer;
};

/// Runs one round to completion. Throws std::invalid_argument, before any
/// simulation, if a spec fails validation or a client id repeats.
RoundReport submit_round(std::span<const RoundClient> clients, const ClusterSpec& cluster,
                         const SubmitOptions& options = {});

/// Time-weighted VRAM utilisation, device VRAM weighted.
struct Utilisation {
  double alloc_vram_pct = 0.0;
  double used_vram_pct = 0.0;
  /// used_vram_pct restricted to intervals where the number of running
  /// clients equals the round's peak concurrency.
  double full_occupancy_used_vram_pct = 0.0;
};

Utilisation utilisation(const RoundReport& report, const ClusterSpec& cluster);
Utilisation utilisation(std::span<const RoundReport> reports, const ClusterSpec& cluster);

}  // namespace fedsched
