#include "fedsched/cli.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "fedsched/config.hpp"
#include "fedsched/experiment.hpp"
#include "fedsched/report.hpp"

namespace fedsched::cli {

namespace {

namespace fs = std::filesystem;

// Loads the config and applies the --seed override. Returns an exit code on
// failure.
std::optional<int> load(const fs::path& path, std::optional<std::uint64_t> seed,
                        ExperimentConfig& cfg, std::ostream& err) {
  try {
    cfg = load_config(path);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoError;
  } catch (const ConfigError& e) {
    err << "config error: " << path.string() << ": " << e.what() << '\n';
    return kExitConfigError;
  }
  if (seed) cfg.seed = *seed;
  return std::nullopt;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("error writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

}  // namespace

int cmd_run(const fs::path& config_path, const fs::path& output_dir,
            std::optional<std::uint64_t> seed, std::ostream& err) {
  ExperimentConfig cfg;
  if (auto code = load(config_path, seed, cfg, err)) return *code;
  try {
    ensure_dir(output_dir);
    const ExperimentResult result = run_experiment(cfg);

    std::ostringstream rounds;
    const StrategyRun run{cfg.strategy.kind, &result};
    write_rounds_csv(rounds, std::span(&run, 1), cfg.cluster);
    write_file(output_dir / "rounds.csv", rounds.str());

    std::ostringstream timeline;
    write_timeline_csv(timeline, result, cfg.cluster);
    write_file(output_dir / "timeline.csv", timeline.str());

    const auto series = utilisation_series(result, cfg.cluster);
    if (!series.empty()) {
      emit_svg(series, {"GPU memory in use over time", "simulated time (s)", "used VRAM (%)"},
               output_dir / "timeline.svg");
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }
  return kExitOk;
}

int cmd_sweep(const fs::path& config_path, const std::vector<std::size_t>& points,
              const fs::path& output_dir, std::optional<std::uint64_t> seed, std::ostream& err) {
  ExperimentConfig cfg;
  if (auto code = load(config_path, seed, cfg, err)) return *code;
  if (points.empty()) {
    err << "config error: --points needs at least one value\n";
    return kExitConfigError;
  }
  for (std::size_t p : points) {
    if (p == 0 || p > cfg.pool_size) {
      err << "config error: sweep point " << p << " outside [1, pool_size=" << cfg.pool_size
          << "]\n";
      return kExitConfigError;
    }
  }
  try {
    ensure_dir(output_dir);
    const SweepResult sweep = run_sweep(cfg, points);
    std::ostringstream csv;
    write_sweep_csv(csv, sweep);
    write_file(output_dir / "sweep.csv", csv.str());
    emit_svg(sweep_series(sweep),
             {"Runtime vs clients per round", "clients per round", "total simulated time (s)"},
             output_dir / "sweep.svg");
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }
  return kExitOk;
}

int cmd_validate(const fs::path& config_path, std::optional<std::uint64_t> seed, std::ostream& out,
                 std::ostream& err) {
  ExperimentConfig cfg;
  if (auto code = load(config_path, seed, cfg, err)) return *code;
  out << config_path.string() << ": ok (" << cfg.pool_size << " clients, "
      << cfg.clients_per_round << " per round, " << cfg.rounds << " rounds, "
      << cfg.cluster.gpus.size() << " gpus, " << to_string(cfg.strategy.kind) << ", seed " << cfg.seed << ")\n";
  return kExitOk;
}

}  // namespace fedsched::cli
