#include "fedsched/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fedsched/config.hpp"

namespace fedsched {

std::string format_fixed(double value, int decimals) {
  if (value == 0.0) value = 0.0;  // folds -0.0
  std::array<char, 128> buf{};
  auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed, decimals);
  if (ec != std::errc()) throw std::invalid_argument("value does not fit a fixed-point field");
  std::string s(buf.data(), ptr);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

void write_rounds_csv(std::ostream& out, std::span<const StrategyRun> runs,
                      const ClusterSpec& cluster) {
  out << "round,strategy,makespan_s,alloc_vram_pct,used_vram_pct,oom_count\n";
  for (const auto& run : runs) {
    for (const auto& r : run.result->rounds) {
      const Utilisation u = utilisation(r, cluster);
      out << r.round_index << ',' << to_string(run.kind) << ',' << format_fixed(r.makespan_s) << ','
          << format_fixed(u.alloc_vram_pct) << ',' << format_fixed(u.used_vram_pct) << ','
          << r.oom_count() << '\n';
    }
  }
}

void write_timeline_csv(std::ostream& out, const ExperimentResult& result,
                        const ClusterSpec& cluster) {
  std::vector<int> indices;
  for (const auto& g : cluster.gpus) indices.push_back(g.device_index);
  std::sort(indices.begin(), indices.end());
  out << "t_s,device,alloc_vram_mb,used_vram_mb\n";
  for (const auto& r : result.rounds) {
    for (const auto& p : r.timeline) {
      for (std::size_t d = 0; d < p.devices.size() && d < indices.size(); ++d) {
        out << format_fixed(p.t) << ',' << indices[d] << ',' << p.devices[d].alloc_vram_mb << ','
            << p.devices[d].used_vram_mb << '\n';
      }
    }
  }
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  out << "clients_per_round,strategy,total_time_s,alloc_vram_pct,used_vram_pct,oom_count,"
         "total_time_with_profiling_s\n";
  for (const auto& row : sweep.rows) {
    out << row.clients_per_round << ',' << to_string(row.kind) << ','
        << format_fixed(row.total_time_s) << ',' << format_fixed(row.alloc_vram_pct) << ','
        << format_fixed(row.used_vram_pct) << ',' << row.oom_count << ','
        << format_fixed(row.total_time_with_profiling_s) << '\n';
  }
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kLeft = 80.0;
constexpr double kRight = 190.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 60.0;
constexpr int kTicks = 5;
constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                                 "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v) {
  if (std::abs(v - std::round(v)) < 1e-9) return format_fixed(std::round(v), 0);
  return format_fixed(v, 2);
}

struct Range {
  double lo;
  double hi;
};

// Degenerate ranges are padded so the scale never divides by zero.
Range padded(double lo, double hi) {
  if (hi - lo > 0.0) return {lo, hi};
  const double pad = std::max(1.0, std::abs(lo) * 0.1);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string render_svg(std::span<const Series> series, const PlotLabels& labels) {
  if (series.empty()) throw std::invalid_argument("plot needs at least one series");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    if (s.points.empty()) throw std::invalid_argument("series '" + s.name + "' has no points");
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (ymin > 0.0 && ymax > ymin) ymin = 0.0;
  const Range xr = padded(xmin, xmax);
  const Range yr = padded(ymin, ymax);

  const double plot_w = kSvgWidth - kLeft - kRight;
  const double plot_h = kSvgHeight - kTop - kBottom;
  const auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  const auto sy = [&](double y) { return kTop + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };
  const auto px = [](double v) { return format_fixed(v, 2); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgWidth << "\" height=\""
    << kSvgHeight << "\" viewBox=\"0 0 " << kSvgWidth << ' ' << kSvgHeight << "\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << kSvgWidth << "\" height=\"" << kSvgHeight
    << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << px(kLeft + plot_w / 2) << "\" y=\"28\" font-family=\"sans-serif\" "
    << "font-size=\"16\" text-anchor=\"middle\">" << escape_xml(labels.title) << "</text>\n";

  // Axes and grid.
  o << "<g stroke=\"#000\" stroke-width=\"1\">\n";
  o << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(kTop + plot_h) << "\" x2=\""
    << px(kLeft + plot_w) << "\" y2=\"" << px(kTop + plot_h) << "\"/>\n";
  o << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(kLeft)
    << "\" y2=\"" << px(kTop + plot_h) << "\"/>\n";
  o << "</g>\n";
  o << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    o << "<line x1=\"" << px(sx(fx)) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(sx(fx))
      << "\" y2=\"" << px(kTop + plot_h) << "\" stroke=\"#ddd\"/>\n";
    o << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(sy(fy)) << "\" x2=\"" << px(kLeft + plot_w)
      << "\" y2=\"" << px(sy(fy)) << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << px(sx(fx)) << "\" y=\"" << px(kTop + plot_h + 18)
      << "\" text-anchor=\"middle\">" << tick_label(fx) << "</text>\n";
    o << "<text x=\"" << px(kLeft - 8) << "\" y=\"" << px(sy(fy) + 4) << "\" text-anchor=\"end\">"
      << tick_label(fy) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << px(kLeft + plot_w / 2) << "\" y=\"" << px(kSvgHeight - 15.0)
    << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
    << escape_xml(labels.x_label) << "</text>\n";
  o << "<text x=\"18\" y=\"" << px(kTop + plot_h / 2)
    << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << px(kTop + plot_h / 2) << ")\">" << escape_xml(labels.y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % kPalette.size()];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < series[i].points.size(); ++k) {
      const auto& [x, y] = series[i].points[k];
      o << (k == 0 ? "" : " ") << px(sx(x)) << ',' << px(sy(y));
    }
    o << "\"/>\n";
    if (series[i].points.size() <= 64) {
      for (const auto& [x, y] : series[i].points) {
        o << "<circle cx=\"" << px(sx(x)) << "\" cy=\"" << px(sy(y)) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
      }
    }
    const double ly = kTop + 10.0 + 20.0 * static_cast<double>(i);
    const double lx = kLeft + plot_w + 15.0;
    o << "<line x1=\"" << px(lx) << "\" y1=\"" << px(ly) << "\" x2=\"" << px(lx + 20) << "\" y2=\""
      << px(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << px(lx + 26) << "\" y=\"" << px(ly + 4)
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(series[i].name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void emit_svg(std::span<const Series> series, const PlotLabels& labels,
              const std::filesystem::path& path) {
  const std::string svg = render_svg(series, labels);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << svg;
  if (!out) throw IoError("error writing " + path.string());
}

std::vector<Series> sweep_series(const SweepResult& sweep) {
  std::vector<Series> out;
  for (StrategyKind kind : {StrategyKind::static_fedavg, StrategyKind::resource_aware_fedavg}) {
    Series s{to_string(kind), {}};
    for (const auto& row : sweep.rows) {
      if (row.kind == kind) {
        s.points.emplace_back(static_cast<double>(row.clients_per_round), row.total_time_s);
      }
    }
    if (!s.points.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::vector<Series> utilisation_series(const ExperimentResult& result, const ClusterSpec& cluster) {
  std::vector<GpuDevice> devices = cluster.gpus;
  std::sort(devices.begin(), devices.end(),
            [](const GpuDevice& a, const GpuDevice& b) { return a.device_index < b.device_index; });
  std::vector<Series> out;
  for (std::size_t d = 0; d < devices.size(); ++d) {
    Series s{"gpu " + std::to_string(devices[d].device_index) + " used vram %", {}};
    const double cap = static_cast<double>(devices[d].vram_mb);
    for (const auto& r : result.rounds) {
      for (std::size_t i = 0; i < r.timeline.size(); ++i) {
        const double pct = 100.0 * static_cast<double>(r.timeline[i].devices[d].used_vram_mb) / cap;
        const double next =
            i + 1 < r.timeline.size() ? r.timeline[i + 1].t : r.start_s + r.makespan_s;
        s.points.emplace_back(r.timeline[i].t, pct);
        if (next > r.timeline[i].t) s.points.emplace_back(next, pct);
      }
    }
    if (!s.points.empty()) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fedsched
