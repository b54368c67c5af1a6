#pragma once

// INI-style experiment configuration.
//
//   # comment
//   [experiment]
//   seed = 42
//   rounds = 2
//   ...
//   [cohort.0]
//   fraction = 1
//   batch_size = 32
//
// Every key belongs to a known section; unknown or repeated keys are errors.
// Numbers use '.' as the decimal point regardless of locale.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "fedsched/experiment.hpp"

namespace fedsched {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string section, std::string key, int line, const std::string& message);

  const std::string& section() const { return section_; }
  const std::string& key() const { return key_; }
  /// 1-based; 0 when the error is not tied to a line (e.g. missing section).
  int line() const { return line_; }

 private:
  std::string section_;
  std::string key_;
  int line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses and fully validates. Throws ConfigError.
ExperimentConfig parse_config(std::string_view text);

/// Reads `path` and parses it. Throws IoError or ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Inverse of parse_config: parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace fedsched
