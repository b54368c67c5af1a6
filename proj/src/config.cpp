#include "fedsched/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "fedsched/scheduler.hpp"

namespace fedsched {

namespace {

std::string describe(const std::string& section, const std::string& key, int line,
                     const std::string& message) {
  std::string out;
  if (line > 0) out += "line " + std::to_string(line) + ": ";
  if (!section.empty()) out += "[" + section + "]";
  if (!key.empty()) out += (section.empty() ? "" : " ") + key;
  if (!section.empty() || !key.empty()) out += ": ";
  return out + message;
}

}  // namespace

ConfigError::ConfigError(std::string section, std::string key, int line, const std::string& message)
    : std::runtime_error(describe(section, key, line, message)),
      section_(std::move(section)),
      key_(std::move(key)),
      line_(line) {}

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

struct Section {
  std::string name;
  int line = 0;
  std::map<std::string, Entry> entries;
};

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment",
       {"seed", "rounds", "pool_size", "clients_per_round", "monitor_interval_s", "model_dim",
        "resample_each_round"}},
      {"cluster", {"cpu_cores", "gpus"}},
      {"strategy",
       {"kind", "num_cpus", "num_gpus", "vram_mb", "safety_margin", "min_vram_mb",
        "oom_backoff_factor"}},
      {"workload",
       {"model_mb", "per_sample_mb", "base_mb", "step_time_s_per_ksample", "warmup_fraction",
        "num_local_epochs", "duration_noise_sigma"}},
      {"cohort", {"fraction", "batch_size", "num_samples", "speed_factor"}},
  };
  return keys;
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// "cohort.3" -> "cohort"; other section names map to themselves.
std::string section_kind(const std::string& name) {
  const auto dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

std::vector<Section> tokenize(std::string_view text) {
  std::vector<Section> sections;
  std::set<std::string> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string_view line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "", line_no, "unterminated section header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      const std::string kind = section_kind(name);
      if (!known_keys().count(kind)) throw ConfigError(name, "", line_no, "unknown section");
      if (kind == "cohort") {
        const std::string index = name.size() > 7 ? name.substr(7) : "";
        if (name.rfind("cohort.", 0) != 0 || index.empty() ||
            !std::all_of(index.begin(), index.end(), [](char c) { return c >= '0' && c <= '9'; })) {
          throw ConfigError(name, "", line_no, "cohort sections are named cohort.N");
        }
      } else if (name != kind) {
        throw ConfigError(name, "", line_no, "unknown section");
      }
      if (!seen.insert(name).second) throw ConfigError(name, "", line_no, "duplicate section");
      sections.push_back(Section{name, line_no, {}});
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(sections.empty() ? "" : sections.back().name, "", line_no,
                        "expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (sections.empty()) throw ConfigError("", key, line_no, "key outside of any section");
    Section& sec = sections.back();
    if (key.empty()) throw ConfigError(sec.name, "", line_no, "empty key");
    if (!known_keys().at(section_kind(sec.name)).count(key)) {
      throw ConfigError(sec.name, key, line_no, "unknown key");
    }
    if (!sec.entries.emplace(key, Entry{value, line_no}).second) {
      throw ConfigError(sec.name, key, line_no, "duplicate key");
    }
  }
  return sections;
}

// Typed access to one section's entries.
class Reader {
 public:
  explicit Reader(const Section& s) : s_(s) {}

  bool has(const std::string& key) const { return s_.entries.count(key) != 0; }
  int line_of(const std::string& key) const {
    auto it = s_.entries.find(key);
    return it == s_.entries.end() ? s_.line : it->second.line;
  }

  const Entry& require(const std::string& key) const {
    auto it = s_.entries.find(key);
    if (it == s_.entries.end()) throw ConfigError(s_.name, key, s_.line, "missing required key");
    return it->second;
  }

  double real(const std::string& key) const { return parse_real(key, require(key)); }
  double real(const std::string& key, double fallback) const {
    return has(key) ? real(key) : fallback;
  }

  std::int64_t integer(const std::string& key) const { return parse_int(key, require(key)); }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const Entry& e = require(key);
    std::uint64_t v = 0;
    const auto* end = e.value.data() + e.value.size();
    auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || ptr != end || e.value.empty()) fail(key, e, "expected a non-negative integer");
    return v;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Entry& e = require(key);
    if (e.value == "true") return true;
    if (e.value == "false") return false;
    fail(key, e, "expected true or false");
  }

  std::string text(const std::string& key) const { return require(key).value; }

  std::vector<std::int64_t> integer_list(const std::string& key) const {
    const Entry& e = require(key);
    std::vector<std::int64_t> out;
    std::string_view rest = e.value;
    while (!trim(rest).empty()) {
      const auto comma = rest.find(',');
      const std::string item(trim(rest.substr(0, comma)));
      out.push_back(parse_int(key, Entry{item, e.line}));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
      if (trim(rest).empty()) fail(key, e, "trailing comma");
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const Entry& e, const std::string& msg) const {
    throw ConfigError(s_.name, key, e.line, msg + " (got '" + e.value + "')");
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(s_.name, key, line_of(key), msg);
  }

 private:
  double parse_real(const std::string& key, const Entry& e) const {
    double v = 0.0;
    const auto* end = e.value.data() + e.value.size();
    auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || ptr != end || e.value.empty() || !std::isfinite(v)) {
      fail(key, e, "malformed number");
    }
    return v;
  }
  std::int64_t parse_int(const std::string& key, const Entry& e) const {
    std::int64_t v = 0;
    const auto* end = e.value.data() + e.value.size();
    auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || ptr != end || e.value.empty()) fail(key, e, "malformed integer");
    return v;
  }

  const Section& s_;
};

const Section* find_section(const std::vector<Section>& sections, const std::string& name) {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Section& need_section(const std::vector<Section>& sections, const std::string& name) {
  const Section* s = find_section(sections, name);
  if (!s) throw ConfigError(name, "", 0, "missing section");
  return *s;
}

std::string format_real(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  const std::vector<Section> sections = tokenize(text);
  ExperimentConfig cfg;

  {
    const Reader r(need_section(sections, "cluster"));
    const double cores = r.real("cpu_cores");
    if (!(cores >= 1.0)) r.fail("cpu_cores", "must be at least 1");
    cfg.cluster.cpu_cores = Share::floor(cores);
    if (r.has("gpus")) {
      int index = 0;
      for (std::int64_t vram : r.integer_list("gpus")) {
        if (vram <= 0) r.fail("gpus", "device vram must be positive");
        cfg.cluster.gpus.push_back(GpuDevice{index++, vram});
      }
    }
  }

  {
    const Reader r(need_section(sections, "experiment"));
    cfg.seed = r.unsigned_integer("seed");
    cfg.rounds = static_cast<int>(r.integer("rounds"));
    if (cfg.rounds <= 0) r.fail("rounds", "must be positive");
    const std::int64_t pool = r.integer("pool_size");
    if (pool <= 0) r.fail("pool_size", "must be positive");
    const std::int64_t per_round = r.integer("clients_per_round");
    if (per_round <= 0) r.fail("clients_per_round", "must be positive");
    if (per_round > pool) {
      r.fail("clients_per_round", "clients_per_round = " + std::to_string(per_round) +
                                      " exceeds pool_size = " + std::to_string(pool));
    }
    cfg.pool_size = static_cast<std::size_t>(pool);
    cfg.clients_per_round = static_cast<std::size_t>(per_round);
    cfg.monitor_interval_s = r.real("monitor_interval_s", kDefaultMonitorIntervalS);
    if (!(cfg.monitor_interval_s > 0.0)) r.fail("monitor_interval_s", "must be positive");
    const std::int64_t dim = r.integer("model_dim", 8);
    if (dim <= 0) r.fail("model_dim", "must be positive");
    cfg.model_dim = static_cast<std::size_t>(dim);
    cfg.resample_each_round = r.boolean("resample_each_round", false);
  }

  {
    const Reader r(need_section(sections, "strategy"));
    const std::string kind = r.text("kind");
    const auto parsed = parse_strategy_kind(kind);
    if (!parsed) r.fail("kind", "expected static_fedavg or resource_aware_fedavg");
    cfg.strategy.kind = *parsed;
    const double cpus = r.real("num_cpus");
    if (cpus < 0.0) r.fail("num_cpus", "must be non-negative");
    cfg.strategy.default_spec.num_cpus = Share::ceil(cpus);
    const std::int64_t vram = r.integer("vram_mb");
    if (vram < 0) r.fail("vram_mb", "must be non-negative");
    cfg.strategy.default_spec.vram_mb = vram;
    if (r.has("num_gpus")) {
      const double gpus = r.real("num_gpus");
      if (gpus < 0.0 || gpus > 1.0) r.fail("num_gpus", "must lie in [0, 1]");
      cfg.strategy.default_spec.num_gpus = Share::ceil(gpus);
    } else if (vram > 0) {
      if (cfg.cluster.total_vram_mb() <= 0) r.fail("vram_mb", "no GPU capacity in [cluster]");
      cfg.strategy.default_spec.num_gpus = vram_to_gpu_ratio(vram, cfg.cluster);
    }
    cfg.strategy.safety_margin = r.real("safety_margin", 1.10);
    if (!(cfg.strategy.safety_margin >= 1.0)) r.fail("safety_margin", "must be >= 1");
    cfg.strategy.min_vram_mb = r.integer("min_vram_mb", 64);
    if (cfg.strategy.min_vram_mb <= 0) r.fail("min_vram_mb", "must be positive");
    cfg.strategy.oom_backoff_factor = r.real("oom_backoff_factor", 2.0);
    if (!(cfg.strategy.oom_backoff_factor > 1.0)) r.fail("oom_backoff_factor", "must be > 1");
    if (auto bad = validate_resource_spec(cfg.strategy.default_spec, cfg.cluster)) {
      const std::string key = bad->find("cpu") != std::string::npos   ? "num_cpus"
                              : bad->find("vram") != std::string::npos ? "vram_mb"
                                                                       : "num_gpus";
      r.fail(key, "default spec does not fit the cluster: " + *bad);
    }
  }

  {
    const Reader r(need_section(sections, "workload"));
    WorkloadModelConfig& w = cfg.workload;
    const auto positive = [&r](const char* key) {
      const double v = r.real(key);
      if (!(v > 0.0)) r.fail(key, "must be positive");
      return v;
    };
    w.model_mb = positive("model_mb");
    w.per_sample_mb = positive("per_sample_mb");
    w.base_mb = positive("base_mb");
    w.step_time_s_per_ksample = positive("step_time_s_per_ksample");
    w.warmup_fraction = r.real("warmup_fraction");
    if (!(w.warmup_fraction >= 0.0 && w.warmup_fraction < 1.0)) {
      r.fail("warmup_fraction", "must lie in [0, 1)");
    }
    w.num_local_epochs = static_cast<int>(r.integer("num_local_epochs"));
    if (w.num_local_epochs <= 0) r.fail("num_local_epochs", "must be positive");
    w.duration_noise_sigma = r.real("duration_noise_sigma", 0.0);
    if (w.duration_noise_sigma < 0.0) r.fail("duration_noise_sigma", "must be non-negative");
  }

  std::vector<std::pair<int, const Section*>> cohorts;
  for (const auto& s : sections) {
    if (section_kind(s.name) == "cohort") cohorts.emplace_back(std::stoi(s.name.substr(7)), &s);
  }
  if (cohorts.empty()) throw ConfigError("cohort.0", "", 0, "at least one cohort section is required");
  std::sort(cohorts.begin(), cohorts.end());
  double fraction_sum = 0.0;
  int last_fraction_line = 0;
  for (const auto& [index, section] : cohorts) {
    const Reader r(*section);
    Cohort c;
    c.fraction = r.real("fraction");
    if (!(c.fraction > 0.0 && c.fraction <= 1.0)) r.fail("fraction", "must lie in (0, 1]");
    const std::int64_t batch = r.integer("batch_size");
    if (batch <= 0) r.fail("batch_size", "must be positive");
    const std::int64_t samples = r.integer("num_samples");
    if (samples <= 0) r.fail("num_samples", "must be positive");
    c.batch_size = static_cast<int>(batch);
    c.num_samples = static_cast<int>(samples);
    c.speed_factor = r.real("speed_factor", 1.0);
    if (!(c.speed_factor > 0.0)) r.fail("speed_factor", "must be positive");
    fraction_sum += c.fraction;
    last_fraction_line = r.line_of("fraction");
    cfg.cohorts.push_back(c);
  }
  if (std::abs(fraction_sum - 1.0) > kCohortFractionTolerance) {
    throw ConfigError(cohorts.back().second->name, "fraction", last_fraction_line,
                      "cohort fractions sum to " + format_real(fraction_sum) + ", expected 1");
  }

  if (auto bad = validate_experiment_config(cfg)) throw ConfigError("", "", 0, *bad);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading config file " + path.string());
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[experiment]\n"
      << "seed = " << cfg.seed << "\n"
      << "rounds = " << cfg.rounds << "\n"
      << "pool_size = " << cfg.pool_size << "\n"
      << "clients_per_round = " << cfg.clients_per_round << "\n"
      << "monitor_interval_s = " << format_real(cfg.monitor_interval_s) << "\n"
      << "model_dim = " << cfg.model_dim << "\n"
      << "resample_each_round = " << (cfg.resample_each_round ? "true" : "false") << "\n\n";

  out << "[cluster]\n"
      << "cpu_cores = " << format_real(cfg.cluster.cpu_cores.value()) << "\n"
      << "gpus =";
  for (std::size_t i = 0; i < cfg.cluster.gpus.size(); ++i) {
    out << (i == 0 ? " " : ", ") << cfg.cluster.gpus[i].vram_mb;
  }
  out << "\n\n";

  const StrategyConfig& s = cfg.strategy;
  out << "[strategy]\n"
      << "kind = " << to_string(s.kind) << "\n"
      << "num_cpus = " << format_real(s.default_spec.num_cpus.value()) << "\n"
      << "num_gpus = " << format_real(s.default_spec.num_gpus.value()) << "\n"
      << "vram_mb = " << s.default_spec.vram_mb << "\n"
      << "safety_margin = " << format_real(s.safety_margin) << "\n"
      << "min_vram_mb = " << s.min_vram_mb << "\n"
      << "oom_backoff_factor = " << format_real(s.oom_backoff_factor) << "\n\n";

  const WorkloadModelConfig& w = cfg.workload;
  out << "[workload]\n"
      << "model_mb = " << format_real(w.model_mb) << "\n"
      << "per_sample_mb = " << format_real(w.per_sample_mb) << "\n"
      << "base_mb = " << format_real(w.base_mb) << "\n"
      << "step_time_s_per_ksample = " << format_real(w.step_time_s_per_ksample) << "\n"
      << "warmup_fraction = " << format_real(w.warmup_fraction) << "\n"
      << "num_local_epochs = " << w.num_local_epochs << "\n"
      << "duration_noise_sigma = " << format_real(w.duration_noise_sigma) << "\n";

  for (std::size_t i = 0; i < cfg.cohorts.size(); ++i) {
    const Cohort& c = cfg.cohorts[i];
    out << "\n[cohort." << i << "]\n"
        << "fraction = " << format_real(c.fraction) << "\n"
        << "batch_size = " << c.batch_size << "\n"
        << "num_samples = " << c.num_samples << "\n"
        << "speed_factor = " << format_real(c.speed_factor) << "\n";
  }
  return out.str();
}

}  // namespace fedsched
