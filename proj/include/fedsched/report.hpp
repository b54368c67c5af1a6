#pragma once

// CSV tables and SVG line plots. All output is byte-reproducible: fixed
// column order, fixed-point numbers formatted without locale, LF endings.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsched/experiment.hpp"

namespace fedsched {

/// Fixed-point with `decimals` digits, '.' separator, no locale.
std::string format_fixed(double value, int decimals = 6);

struct StrategyRun {
  StrategyKind kind;
  const ExperimentResult* result;
};

/// round,strategy,makespan_s,alloc_vram_pct,used_vram_pct,oom_count
void write_rounds_csv(std::ostream& out, std::span<const StrategyRun> runs,
                      const ClusterSpec& cluster);

/// t_s,device,alloc_vram_mb,used_vram_mb
void write_timeline_csv(std::ostream& out, const ExperimentResult& result,
                        const ClusterSpec& cluster);

/// clients_per_round,strategy,total_time_s,alloc_vram_pct,used_vram_pct,oom_count,
/// total_time_with_profiling_s
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct PlotLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

inline constexpr int kSvgWidth = 800;
inline constexpr int kSvgHeight = 500;

/// Standalone 800x500 SVG: one polyline with markers per series plus a
/// legend. Throws std::invalid_argument for no series or an empty series.
std::string render_svg(std::span<const Series> series, const PlotLabels& labels);

/// Throws IoError when the file cannot be written.
void emit_svg(std::span<const Series> series, const PlotLabels& labels,
              const std::filesystem::path& path);

/// Runtime-vs-clients-per-round series, one per strategy kind.
std::vector<Series> sweep_series(const SweepResult& sweep);

/// Used-VRAM percentage over time, one step-shaped series per device.
std::vector<Series> utilisation_series(const ExperimentResult& result, const ClusterSpec& cluster);

}  // namespace fedsched
