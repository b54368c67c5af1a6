#pragma once

// Command implementations behind the `fedsched` executable. Each returns the
// process exit code and writes diagnostics to `err`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace fedsched::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitIoError = 2;

/// Runs the configured strategy; writes rounds.csv, timeline.csv and
/// timeline.svg into `output_dir` (created if absent).
int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& output_dir,
            std::optional<std::uint64_t> seed, std::ostream& err);

/// Runs both strategies at each point; writes sweep.csv and sweep.svg.
int cmd_sweep(const std::filesystem::path& config_path, const std::vector<std::size_t>& points,
              const std::filesystem::path& output_dir, std::optional<std::uint64_t> seed,
              std::ostream& err);

/// Parses and validates only; prints a one-line summary to `out`.
int cmd_validate(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
                 std::ostream& out, std::ostream& err);

}  // namespace fedsched::cli
