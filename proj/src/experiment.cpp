#include "fedsched/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

namespace fedsched {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

// Stand-in for local training: the global model nudged by a small
// client- and round-specific offset.
ModelParams local_update(const ModelParams& global, ClientId client, int round,
                         std::uint64_t seed) {
  ModelParams out = global;
  std::uint64_t state = mix(mix(seed, client.value), static_cast<std::uint64_t>(round));
  for (double& v : out) {
    state = splitmix64(state);
    const double unit = static_cast<double>(state >> 11) * 0x1.0p-53;
    v += 0.01 * (unit - 0.5);
  }
  return out;
}

}  // namespace

std::optional<std::string> validate_experiment_config(const ExperimentConfig& cfg) {
  if (cfg.rounds <= 0) return "rounds must be positive";
  if (cfg.pool_size == 0) return "pool_size must be positive";
  if (cfg.clients_per_round == 0) return "clients_per_round must be positive";
  if (cfg.clients_per_round > cfg.pool_size) {
    return "clients_per_round (" + std::to_string(cfg.clients_per_round) +
           ") exceeds pool_size (" + std::to_string(cfg.pool_size) + ")";
  }
  if (!(cfg.monitor_interval_s > 0.0)) return "monitor_interval_s must be positive";
  if (cfg.model_dim == 0) return "model_dim must be positive";
  if (auto bad = validate_cluster(cfg.cluster)) return "cluster: " + *bad;
  if (auto bad = validate_strategy_config(cfg.strategy, cfg.cluster)) return "strategy: " + *bad;
  if (cfg.cohorts.empty()) return "at least one cohort is required";
  double sum = 0.0;
  for (std::size_t i = 0; i < cfg.cohorts.size(); ++i) {
    const Cohort& c = cfg.cohorts[i];
    const std::string name = "cohort " + std::to_string(i);
    if (!(c.fraction > 0.0 && c.fraction <= 1.0)) return name + ": fraction must lie in (0, 1]";
    if (c.batch_size <= 0) return name + ": batch_size must be positive";
    if (c.num_samples <= 0) return name + ": num_samples must be positive";
    if (!(c.speed_factor > 0.0)) return name + ": speed_factor must be positive";
    sum += c.fraction;
  }
  if (std::abs(sum - 1.0) > kCohortFractionTolerance) {
    return "cohort fractions sum to " + std::to_string(sum) + ", expected 1";
  }
  const WorkloadModelConfig& w = cfg.workload;
  if (!(w.model_mb > 0.0) || !(w.per_sample_mb > 0.0) || !(w.base_mb > 0.0) ||
      !(w.step_time_s_per_ksample > 0.0) || w.num_local_epochs <= 0) {
    return "workload constants must be positive";
  }
  if (!(w.warmup_fraction >= 0.0 && w.warmup_fraction < 1.0)) {
    return "workload warmup_fraction must lie in [0, 1)";
  }
  if (!(w.duration_noise_sigma >= 0.0)) return "workload duration_noise_sigma must be >= 0";
  return std::nullopt;
}

std::vector<std::size_t> cohort_sizes(std::span<const Cohort> cohorts, std::size_t pool_size) {
  std::vector<std::size_t> sizes(cohorts.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < cohorts.size(); ++i) {
    const double exact = cohorts[i].fraction * static_cast<double>(pool_size);
    // Slack keeps 1/3 * 90 from landing on 29.999...
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += sizes[i];
    remainders.emplace_back(exact - static_cast<double>(sizes[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < pool_size && !remainders.empty(); ++k, ++assigned) {
    ++sizes[remainders[k % remainders.size()].second];
  }
  return sizes;
}

std::vector<WorkloadProfile> build_workloads(const ExperimentConfig& cfg) {
  const auto sizes = cohort_sizes(cfg.cohorts, cfg.pool_size);
  std::vector<WorkloadProfile> out;
  out.reserve(cfg.pool_size);
  std::uint32_t next = 0;
  for (std::size_t c = 0; c < cfg.cohorts.size(); ++c) {
    const Cohort& cohort = cfg.cohorts[c];
    for (std::size_t k = 0; k < sizes[c]; ++k, ++next) {
      out.push_back(synth_workload(ClientId{next}, cohort.batch_size, cohort.num_samples,
                                   cohort.speed_factor, cfg.workload, mix(cfg.seed, next)));
    }
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (auto bad = validate_experiment_config(cfg)) {
    throw std::invalid_argument("invalid experiment config: " + *bad);
  }
  const auto workloads = build_workloads(cfg);
  ClientManagerState state = ClientManagerState::with_pool(cfg.pool_size, cfg.strategy.default_spec);

  ExperimentResult result;
  result.final_params.assign(cfg.model_dim, 0.0);
  double clock = 0.0;

  for (int round = 1; round <= cfg.rounds; ++round) {
    const std::uint64_t sample_seed =
        cfg.resample_each_round ? mix(cfg.seed, static_cast<std::uint64_t>(round)) : cfg.seed;
    const FitPlan plan =
        configure_fit(round, state, cfg.strategy, cfg.cluster, cfg.clients_per_round, sample_seed);

    std::vector<RoundClient> batch;
    batch.reserve(plan.instructions.size());
    for (const auto& ins : plan.instructions) {
      batch.push_back({ins.client, ins.spec, workloads.at(ins.client.value)});
    }

    SubmitOptions opts;
    opts.round_index = round;
    opts.start_t = clock;
    opts.monitors_on = true;
    opts.monitor_interval_s = cfg.monitor_interval_s;
    RoundReport report = submit_round(batch, cfg.cluster, opts);
    report.warnings = plan.warnings;

    std::vector<FitResult> fit_results;
    for (const auto& rec : report.clients) {
      const ClientId id = rec.allocation.client;
      if (rec.outcome == Outcome::oom_failed) {
        on_failure(id, state, cfg.strategy, cfg.cluster);
        continue;
      }
      const double duration = *rec.allocation.release_t - rec.allocation.admit_t;
      fit_results.push_back({id, local_update(result.final_params, id, round, cfg.seed),
                             workloads.at(id.value).num_samples,
                             summary_to_properties(*rec.usage, duration)});
    }
    if (!fit_results.empty()) {
      result.final_params = aggregate_fit(fit_results, state, round);
    }

    clock += report.makespan_s;
    result.rounds.push_back(std::move(report));
  }
  return result;
}

const SweepRow* SweepResult::find(std::size_t clients_per_round, StrategyKind kind) const {
  for (const auto& r : rows) {
    if (r.clients_per_round == clients_per_round && r.kind == kind) return &r;
  }
  return nullptr;
}

SweepResult run_sweep(const ExperimentConfig& cfg, std::span<const std::size_t> points) {
  for (std::size_t p : points) {
    if (p == 0 || p > cfg.pool_size) {
      throw std::invalid_argument("sweep point " + std::to_string(p) + " outside [1, pool_size=" +
                                  std::to_string(cfg.pool_size) + "]");
    }
  }
  if (auto bad = validate_experiment_config(cfg)) {
    throw std::invalid_argument("invalid experiment config: " + *bad);
  }

  const StrategyKind kinds[] = {StrategyKind::static_fedavg, StrategyKind::resource_aware_fedavg};
  std::vector<std::future<SweepRow>> jobs;
  for (std::size_t point : points) {
    for (StrategyKind kind : kinds) {
      ExperimentConfig run_cfg = cfg;
      run_cfg.clients_per_round = point;
      run_cfg.strategy.kind = kind;
      jobs.push_back(std::async(std::launch::async, [run_cfg] {
        const ExperimentResult r = run_experiment(run_cfg);
        SweepRow row;
        row.clients_per_round = run_cfg.clients_per_round;
        row.kind = run_cfg.strategy.kind;
        const std::size_t skip = r.rounds.size() > 1 ? 1 : 0;
        const std::span<const RoundReport> steady(r.rounds.begin() + skip, r.rounds.end());
        for (const auto& rep : r.rounds) {
          row.total_time_with_profiling_s += rep.makespan_s;
          row.oom_count += rep.oom_count();
        }
        if (skip == 1) {
          for (const auto& rep : steady) row.total_time_s += rep.makespan_s;
        } else {
          row.total_time_s = row.total_time_with_profiling_s;
        }
        const Utilisation u = utilisation(steady, run_cfg.cluster);
        row.alloc_vram_pct = u.alloc_vram_pct;
        row.used_vram_pct = u.used_vram_pct;
        return row;
      }));
    }
  }
  SweepResult out;
  for (auto& job : jobs) out.rows.push_back(job.get());
  return out;
}

}  // namespace fedsched
