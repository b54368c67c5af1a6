#pragma once

// Shared domain types for the federated-round scheduling simulator.
//
// Units: memory is integer MiB, time is double simulated seconds. Fractional
// CPU and GPU quantities are fixed-point with a granularity of 1/1024 so the
// capacity ledger never accumulates float drift.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fedsched {

struct ClientId {
  std::uint32_t value = 0;

  friend constexpr auto operator<=>(ClientId, ClientId) = default;
};

/// Fixed-point resource quantity in units of 1/1024.
class Share {
 public:
  static constexpr std::int64_t kScale = 1024;

  constexpr Share() = default;

  static constexpr Share from_units(std::int64_t units) { return Share(units); }
  static constexpr Share whole(std::int64_t n) { return Share(n * kScale); }
  /// Smallest share >= value. Used for demands.
  static Share ceil(double value);
  /// Largest share <= value. Used for capacities.
  static Share floor(double value);

  constexpr std::int64_t units() const { return units_; }
  constexpr double value() const { return static_cast<double>(units_) / kScale; }
  constexpr bool is_zero() const { return units_ == 0; }

  constexpr Share& operator+=(Share o) {
    units_ += o.units_;
    return *this;
  }
  constexpr Share& operator-=(Share o) {
    units_ -= o.units_;
    return *this;
  }
  friend constexpr Share operator+(Share a, Share b) { return a += b; }
  friend constexpr Share operator-(Share a, Share b) { return a -= b; }
  friend constexpr auto operator<=>(Share, Share) = default;

 private:
  constexpr explicit Share(std::int64_t units) : units_(units) {}
  std::int64_t units_ = 0;
};

struct GpuDevice {
  int device_index = 0;
  std::int64_t vram_mb = 0;

  friend bool operator==(const GpuDevice&, const GpuDevice&) = default;
};

struct ClusterSpec {
  Share cpu_cores = Share::whole(1);
  std::vector<GpuDevice> gpus;

  std::int64_t total_vram_mb() const;
  std::int64_t max_device_vram_mb() const;
  const GpuDevice* device(int device_index) const;

  friend bool operator==(const ClusterSpec&, const ClusterSpec&) = default;
};

/// Returns a description of the first violated ClusterSpec invariant.
std::optional<std::string> validate_cluster(const ClusterSpec& cluster);

/// Resources allocated to one client task. num_gpus is a fraction of a single
/// device.
struct ResourceSpec {
  Share num_cpus;
  Share num_gpus;
  std::int64_t vram_mb = 0;

  bool uses_gpu() const { return !num_gpus.is_zero(); }

  friend bool operator==(const ResourceSpec&, const ResourceSpec&) = default;
};

/// Returns std::nullopt when `spec` fits an otherwise empty `cluster`,
/// otherwise a short description of the violated invariant.
std::optional<std::string> validate_resource_spec(const ResourceSpec& spec,
                                                  const ClusterSpec& cluster);

struct UsageSample {
  double t = 0.0;
  double cpu_pct = 0.0;
  std::int64_t ram_mb = 0;
  double gpu_pct = 0.0;
  std::int64_t vram_mb = 0;

  friend bool operator==(const UsageSample&, const UsageSample&) = default;
};

struct UsageSummary {
  std::int64_t peak_vram_mb = 0;
  double mean_vram_mb = 0.0;
  std::int64_t peak_ram_mb = 0;
  double mean_ram_mb = 0.0;
  double mean_cpu_pct = 0.0;
  double peak_gpu_pct = 0.0;
  double mean_gpu_pct = 0.0;
  double cpu_time_s = 0.0;
  double gpu_time_s = 0.0;
  std::size_t n_samples = 0;

  friend bool operator==(const UsageSummary&, const UsageSummary&) = default;
};

/// Open-ended property dictionary a client reports to the server strategy.
using ClientProperties = std::map<std::string, double>;

namespace props {
inline constexpr const char* kPeakVramMb = "peak_vram_mb";
inline constexpr const char* kPeakRamMb = "peak_ram_mb";
inline constexpr const char* kMeanCpuPct = "mean_cpu_pct";
inline constexpr const char* kMeanGpuPct = "mean_gpu_pct";
inline constexpr const char* kCpuTimeS = "cpu_time_s";
inline constexpr const char* kGpuTimeS = "gpu_time_s";
inline constexpr const char* kTrainDurationS = "train_duration_s";
inline constexpr const char* kUsesGpu = "uses_gpu";
// Reserved; never populated by the simulator.
inline constexpr const char* kBatteryState = "battery_state";

inline constexpr const char* kCanonical[] = {
    kPeakVramMb, kPeakRamMb, kMeanCpuPct,      kMeanGpuPct,
    kCpuTimeS,   kGpuTimeS,  kTrainDurationS, kUsesGpu};
}  // namespace props

/// True when every canonical key is present with a finite, non-negative value.
bool has_canonical_properties(const ClientProperties& p);

/// Flat parameter vector exchanged between clients and the server.
using ModelParams = std::vector<double>;

}  // namespace fedsched
