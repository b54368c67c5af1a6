// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "fedsched/config.hpp"
#include "fedsched/experiment.hpp"
#include "fedsched/profiler.hpp"
#include "fedsched/scheduler.hpp"
#include "fedsched/strategy.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fedsched;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ExperimentConfig scenario(const char* name) {
  return load_config(fs::path(FEDSCHED_SOURCE_DIR) / "configs" / name);
}

ExperimentConfig with_kind(ExperimentConfig cfg, StrategyKind kind) {
  cfg.strategy.kind = kind;
  return cfg;
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// 1: round makespans of the homogeneous scenario against ceil(n/k) * d.
Verdict criterion_1() {
  Verdict v;
  auto cfg = scenario("scenario_a.ini");
  cfg.rounds = 4;
  const auto start = Clock::now();
  const auto st = run_experiment(with_kind(cfg, StrategyKind::static_fedavg));
  const auto aw = run_experiment(with_kind(cfg, StrategyKind::resource_aware_fedavg));
  const double elapsed = seconds_since(start);

  const double d = 500 * 20.0 / 1000.0;
  const std::int64_t aware_vram = oracle::ceil_div(2600 * 110, 100);
  const std::int64_t k = 11264 / aware_vram;
  const double seq = oracle::homogeneous_makespan(100, 1, d);
  const double packed = oracle::homogeneous_makespan(100, k, d);
  v.require(k == 3, "expected concurrency 3, oracle gives " + std::to_string(k));
  for (std::size_t r = 0; r < st.rounds.size(); ++r) {
    v.require(std::abs(st.rounds[r].makespan_s - seq) <= 1e-9,
              "static round " + std::to_string(r + 1) + " makespan " + fmt(st.rounds[r].makespan_s));
    const double expected = r == 0 ? seq : packed;
    v.require(std::abs(aw.rounds[r].makespan_s - expected) <= 1e-9,
              "aware round " + std::to_string(r + 1) + " makespan " + fmt(aw.rounds[r].makespan_s));
  }
  v.require(elapsed < 5.0, "runtime " + fmt(elapsed) + " s");
  if (v.pass) {
    v.detail = "static " + fmt(seq) + " s/round, aware " + fmt(seq) + " then " + fmt(packed) +
               " s, speedup " + fmt(aw.rounds[1].makespan_s > 0 ? seq / aw.rounds[1].makespan_s : 0) +
               ", " + fmt(elapsed) + " s";
  }
  return v;
}

// 2: steady-state true VRAM use during full occupancy.
Verdict criterion_2() {
  Verdict v;
  const auto cfg = scenario("scenario_a.ini");
  const auto st = run_experiment(with_kind(cfg, StrategyKind::static_fedavg));
  const auto aw = run_experiment(with_kind(cfg, StrategyKind::resource_aware_fedavg));
  const double u_static = utilisation(st.rounds.back(), cfg.cluster).full_occupancy_used_vram_pct;
  const double u_aware = utilisation(aw.rounds.back(), cfg.cluster).full_occupancy_used_vram_pct;
  const double want_static = 100.0 * 2600 / 11264;
  const double want_aware = 100.0 * 3 * 2600 / 11264;
  v.require(std::abs(u_static - want_static) <= 0.5, "static use " + fmt(u_static) + "%");
  v.require(std::abs(u_aware - want_aware) <= 0.5, "aware use " + fmt(u_aware) + "%");
  v.require(u_aware >= 2.6 * u_static, "gain " + fmt(u_aware / u_static));
  if (v.pass) {
    v.detail = "aware " + fmt(u_aware) + "% vs static " + fmt(u_static) + "%, gain " +
               fmt(u_aware / u_static) + "x";
  }
  return v;
}

// Brute-force replay of one round of the heterogeneous scenario.
double replay_scenario_b(bool aware) {
  const std::int64_t batches[] = {32, 1024, 2048};
  std::vector<oracle::Job> jobs;
  for (int cohort = 0; cohort < 3; ++cohort) {
    const std::int64_t peak = 300 + 400 + 2 * batches[cohort];
    const std::int64_t vram = aware ? oracle::ceil_div(peak * 110, 100) : 11264;
    for (int i = 0; i < 30; ++i)
      jobs.push_back({1024, oracle::ceil_div(vram * 1024, 11264), vram, 500 * 20.0 / 1000.0});
  }
  return oracle::fifo_replay_single_gpu(jobs, 32 * 1024, 11264).makespan;
}

// 3: heterogeneous cohorts against an independent event replay.
Verdict criterion_3() {
  Verdict v;
  const auto cfg = scenario("scenario_b.ini");
  const auto start = Clock::now();
  const auto st = run_experiment(with_kind(cfg, StrategyKind::static_fedavg));
  const auto aw = run_experiment(with_kind(cfg, StrategyKind::resource_aware_fedavg));
  const double elapsed = seconds_since(start);
  const double oracle_static = replay_scenario_b(false);
  const double oracle_aware = replay_scenario_b(true);
  const double m_static = st.rounds.back().makespan_s;
  const double m_aware = aw.rounds.back().makespan_s;
  v.require(std::abs(m_static - oracle_static) <= 1e-9,
            "static makespan " + fmt(m_static) + " vs replay " + fmt(oracle_static));
  v.require(std::abs(m_aware - oracle_aware) <= 1e-9,
            "aware makespan " + fmt(m_aware) + " vs replay " + fmt(oracle_aware));
  v.require(m_aware < m_static, "aware not faster");
  v.require(m_static / m_aware >= 1.5, "speedup " + fmt(m_static / m_aware));
  v.require(elapsed < 10.0, "runtime " + fmt(elapsed) + " s");
  if (v.pass) {
    v.detail = "static " + fmt(m_static) + " s, aware " + fmt(m_aware) + " s, speedup " +
               fmt(m_static / m_aware) + ", " + fmt(elapsed) + " s";
  }
  return v;
}

// 4: sweep gap trend.
Verdict criterion_4() {
  Verdict v;
  const auto cfg = scenario("scenario_a.ini");
  const std::vector<std::size_t> points{1, 10, 25, 50, 100};
  const auto sweep = run_sweep(cfg, points);
  std::vector<double> gaps;
  for (auto n : points) {
    const auto* s = sweep.find(n, StrategyKind::static_fedavg);
    const auto* a = sweep.find(n, StrategyKind::resource_aware_fedavg);
    if (!s || !a) {
      v.require(false, "missing row for point " + std::to_string(n));
      return v;
    }
    gaps.push_back(s->total_time_s - a->total_time_s);
  }
  v.require(gaps[0] == 0.0, "point-1 gap " + fmt(gaps[0]));
  for (std::size_t i = 2; i < gaps.size(); ++i)
    v.require(gaps[i] >= gaps[i - 1], "gap shrinks at point " + std::to_string(points[i]));
  if (v.pass) {
    v.detail = "gaps";
    for (std::size_t i = 0; i < points.size(); ++i)
      v.detail += " " + std::to_string(points[i]) + ":" + fmt(gaps[i]);
  }
  return v;
}

// 5: randomized rounds never oversubscribe and admit in strict FIFO order.
Verdict criterion_5() {
  Verdict v;
  const auto start = Clock::now();
  std::mt19937_64 rng(20240611);
  std::size_t snapshots = 0, ooms = 0;
  for (int round = 0; round < 1000 && v.pass; ++round) {
    ClusterSpec cluster;
    cluster.cpu_cores = Share::from_units(1024 + static_cast<std::int64_t>(rng() % (15 * 1024)));
    const int g = static_cast<int>(rng() % 4);
    for (int d = 0; d < g; ++d)
      cluster.gpus.push_back({d, 2048 + static_cast<std::int64_t>(rng() % 22000)});

    std::vector<RoundClient> clients;
    const std::size_t n = 1 + rng() % 40;
    for (std::uint32_t i = 0; i < n; ++i) {
      ResourceSpec spec;
      spec.num_cpus = Share::from_units(static_cast<std::int64_t>(rng() % (cluster.cpu_cores.units() + 1)));
      std::int64_t true_peak = 0;
      if (g > 0 && rng() % 4 != 0) {
        const std::int64_t max_dev = cluster.max_device_vram_mb();
        spec.vram_mb = 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(max_dev));
        spec.num_gpus = Share::from_units(1 + static_cast<std::int64_t>(rng() % 1024));
        true_peak = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(spec.vram_mb * 3 / 2 + 1));
      }
      WorkloadModelConfig wl;
      // Rounds to a constant true_peak at batch size 1.
      wl.model_mb = 0.1;
      wl.per_sample_mb = 0.1;
      wl.base_mb = true_peak > 0 ? static_cast<double>(true_peak) - 0.2 : 0.1;
      wl.warmup_fraction = static_cast<double>(rng() % 50) / 100.0;
      wl.step_time_s_per_ksample = 1.0 + static_cast<double>(rng() % 100);
      clients.push_back({ClientId{i}, spec,
                         synth_workload(ClientId{i}, 1, 1 + static_cast<int>(rng() % 1000), 1.0, wl, 0)});
    }

    SubmitOptions opt;
    opt.monitors_on = false;
    opt.observer = [&](const SchedulerSnapshot& s) {
      ++snapshots;
      if (auto bad = s.ledger.check_invariants()) v.require(false, "ledger: " + *bad);
      // Independent recount from the live allocations.
      std::int64_t cpu = 0;
      std::vector<std::int64_t> frac(cluster.gpus.size(), 0), vram(cluster.gpus.size(), 0);
      for (const auto& [id, a] : s.ledger.allocations()) {
        cpu += a.spec.num_cpus.units();
        if (a.gpu_device) {
          frac[static_cast<std::size_t>(*a.gpu_device)] += a.spec.num_gpus.units();
          vram[static_cast<std::size_t>(*a.gpu_device)] += a.spec.vram_mb;
        }
      }
      v.require(cpu <= cluster.cpu_cores.units(), "cpu oversubscribed");
      for (std::size_t d = 0; d < cluster.gpus.size(); ++d) {
        v.require(frac[d] <= 1024, "gpu fraction oversubscribed");
        v.require(vram[d] <= cluster.gpus[d].vram_mb, "vram oversubscribed");
      }
      // Strict FIFO: after every event the queue head is blocked.
      if (!s.queue.empty())
        v.require(!s.ledger.find_placement(s.queue.front().spec).has_value(),
                  "unblocked head left waiting at t=" + fmt(s.t));
    };
    const auto report = submit_round(clients, cluster, opt);
    ooms += report.oom_count();
    v.require(report.clients.size() == n, "client missing from report");
    for (std::size_t i = 1; i < report.clients.size(); ++i) {
      const auto& prev = report.clients[i - 1].allocation;
      const auto& cur = report.clients[i].allocation;
      v.require(prev.admit_t <= cur.admit_t && prev.admit_order < cur.admit_order,
                "admission out of queue order");
    }
  }
  const double elapsed = seconds_since(start);
  v.require(elapsed < 30.0, "runtime " + fmt(elapsed) + " s");
  if (v.pass) {
    v.detail = "1000 rounds, " + std::to_string(snapshots) + " snapshots, " + std::to_string(ooms) +
               " ooms, " + fmt(elapsed) + " s";
  }
  return v;
}

// 6: VRAM to GPU-share conversion.
Verdict criterion_6() {
  Verdict v;
  const ClusterSpec one{Share::whole(8), {GpuDevice{0, 11264}}};
  v.require(vram_to_gpu_ratio(3500, one).units() == 319, "3500 MB");
  v.require(vram_to_gpu_ratio(11264, one) == Share::whole(1), "full device");
  v.require(vram_to_gpu_ratio(0, one) == Share{}, "zero");
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10000 && v.pass; ++trial) {
    ClusterSpec c{Share::whole(1), {}};
    const int g = 1 + static_cast<int>(rng() % 8);
    std::int64_t total = 0;
    for (int d = 0; d < g; ++d) {
      c.gpus.push_back({d, 1 + static_cast<std::int64_t>(rng() % 81920)});
      total += c.gpus.back().vram_mb;
    }
    const auto vram = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(total + 1));
    const auto r = vram_to_gpu_ratio(vram, c).units();
    v.require(r >= 0 && r <= 1024 * g, "ratio out of [0, G]");
    // Smallest multiple of 1/1024 not below vram / total.
    v.require(r * total >= vram * 1024 && (r == 0 || (r - 1) * total < vram * 1024),
              "not rounded up to 1/1024");
  }
  if (v.pass) v.detail = "3 examples, 10000 random clusters";
  return v;
}

// 7: profiler sampling laws and non-interference.
Verdict criterion_7() {
  Verdict v;
  std::mt19937_64 rng(7);
  struct Flat final : StatsProvider {
    UsageSample read(ClientId, double t) const override { return {t, 1.0, 1, 1.0, 1}; }
  } flat;
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t start = static_cast<std::int64_t>(rng() % 100000);
    const std::int64_t interval = 1 + static_cast<std::int64_t>(rng() % 5000);
    const std::int64_t end = start + static_cast<std::int64_t>(rng() % 60000);
    const auto h = start_monitor(ClientId{0}, interval / 1000.0, flat, start / 1000.0, end / 1000.0);
    v.require(static_cast<std::int64_t>(h.size()) == oracle::grid_count(start, end, interval),
              "sample count on grid " + std::to_string(trial));
  }
  for (int trial = 0; trial < 200; ++trial) {
    WorkloadModelConfig cfg;
    cfg.warmup_fraction = static_cast<double>(rng() % 80) / 100.0;
    cfg.step_time_s_per_ksample = 1.0 + static_cast<double>(rng() % 60);
    const auto w = synth_workload(ClientId{0}, 1 + static_cast<int>(rng() % 4096),
                                  50 + static_cast<int>(rng() % 950), 1.0, cfg, 0);
    const double limit = (1.0 - cfg.warmup_fraction) * w.duration_s;
    const double interval = limit * (1 + static_cast<double>(rng() % 1000)) / 1000.0;
    TraceStatsProvider p;
    p.bind(ClientId{0}, w, 0.0, true);
    const auto s = stop_monitor(start_monitor(ClientId{0}, interval, p, 0.0, w.duration_s));
    v.require(static_cast<double>(s.peak_vram_mb) >= s.mean_vram_mb, "peak below mean");
    v.require(static_cast<double>(s.peak_ram_mb) >= s.mean_ram_mb, "ram peak below mean");
    v.require(s.peak_vram_mb == w.true_peak_vram_mb, "peak missed");
  }
  for (int trial = 0; trial < 20; ++trial) {
    const ClusterSpec cluster{Share::whole(4), {{0, 11264}, {1, 8192}}};
    std::vector<RoundClient> clients;
    for (std::uint32_t i = 0; i < 25; ++i) {
      const std::int64_t vram = 500 + static_cast<std::int64_t>(rng() % 7000);
      clients.push_back({ClientId{i}, {Share::whole(1), vram_to_gpu_ratio(vram, cluster), vram},
                         synth_workload(ClientId{i}, 1 + static_cast<int>(rng() % 2048), 300, 1.0,
                                        WorkloadModelConfig{}, 0)});
    }
    SubmitOptions on, off;
    off.monitors_on = false;
    auto a = submit_round(clients, cluster, on);
    const auto b = submit_round(clients, cluster, off);
    for (auto& c : a.clients) c.usage.reset();
    v.require(a == b, "monitors changed the round");
  }
  if (v.pass) v.detail = "100 grids, 200 traces, 20 on/off rounds";
  return v;
}

// 8: FedAvg against a brute-force weighted mean.
Verdict criterion_8() {
  Verdict v;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> val(-100.0, 100.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    const std::size_t dim = 1 + rng() % 32;
    std::vector<std::vector<double>> params(n, std::vector<double>(dim));
    std::vector<double> weights(n);
    std::vector<WeightedParams> entries;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& x : params[i]) x = val(rng);
      weights[i] = static_cast<double>(1 + rng() % 10000);
      entries.push_back({params[i], weights[i]});
    }
    const auto want = oracle::weighted_mean(params, weights);
    const auto got = fedavg_aggregate(entries);
    for (std::size_t k = 0; k < dim; ++k) {
      const double rel = std::abs(got[k] - want[k]) / std::max(std::abs(want[k]), 1e-300);
      if (want[k] != 0.0) worst = std::max(worst, rel);
      v.require(want[k] == 0.0 ? got[k] == 0.0 : rel <= 1e-12, "instance " + std::to_string(trial));
    }
  }
  if (v.pass) v.detail = "200 instances, worst relative error " + fmt(worst);
  return v;
}

// 9: OOM detection and backoff recovery.
Verdict criterion_9() {
  Verdict v;
  const auto r = run_experiment(scenario("oom.ini"));
  std::size_t total = 0;
  for (const auto& round : r.rounds) total += round.oom_count();
  // Hand trace: 2000+2000 admitted, 12000 > 11264 fails client 1 (later).
  // Round 2: 6600 (profiled client 0) + 4000 admitted together, fails again.
  // Round 3: 6600 + 8000 cannot co-reside; both complete sequentially.
  v.require(total == 2, "total oom " + std::to_string(total));
  v.require(r.rounds.size() == 3, "round count");
  if (!v.pass) return v;
  v.require(r.rounds[0].oom_count() == 1, "round 1 oom count");
  const auto& c0 = r.rounds[0].clients[0];
  const auto& c1 = r.rounds[0].clients[1];
  v.require(c1.outcome == Outcome::oom_failed && c0.outcome == Outcome::completed,
            "victim is not the last admitted");
  v.require(c1.allocation.admit_order > c0.allocation.admit_order, "admission order");
  v.require(r.rounds[1].clients[1].allocation.spec.vram_mb == 4000, "first backoff");
  v.require(r.rounds[2].clients[1].allocation.spec.vram_mb == 8000, "second backoff");
  v.require(r.rounds[2].clients[1].outcome == Outcome::completed, "retry did not complete");
  if (v.pass) v.detail = "ooms per round 1/1/0, victim client 1, backoff 2000->4000->8000";
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

// 10: the sweep command is byte-reproducible.
Verdict criterion_10() {
  Verdict v;
  const auto base = fs::temp_directory_path() / "fedsched_acceptance_sweep";
  fs::remove_all(base);
  const auto cfg = fs::path(FEDSCHED_SOURCE_DIR) / "configs" / "scenario_a.ini";
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + FEDSCHED_CLI_PATH + "\" sweep \"" + cfg.string() +
                            "\" --points 1,10,25,50,100 --seed 42 -o \"" + (base / run).string() +
                            "\" >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    v.require(WIFEXITED(status) && WEXITSTATUS(status) == 0, std::string("sweep run ") + run + " failed");
  }
  if (v.pass) {
    for (const char* file : {"sweep.csv", "sweep.svg"}) {
      const auto a = slurp(base / "a" / file);
      v.require(!a.empty(), std::string(file) + " empty");
      v.require(a == slurp(base / "b" / file), std::string(file) + " differs");
    }
  }
  fs::remove_all(base);
  if (v.pass) v.detail = "sweep.csv and sweep.svg identical across two runs";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"scheduler oracle equivalence, homogeneous scenario", criterion_1},
      {"utilisation gain at full occupancy", criterion_2},
      {"heterogeneous cohorts speedup", criterion_3},
      {"sweep gap trend", criterion_4},
      {"no oversubscription, strict FIFO", criterion_5},
      {"vram to gpu share conversion", criterion_6},
      {"profiler laws", criterion_7},
      {"fedavg brute-force equivalence", criterion_8},
      {"oom detection and backoff", criterion_9},
      {"sweep determinism", criterion_10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failures += v.pass ? 0 : 1;
    std::printf("[%s] criterion %zu: %s (%s)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                v.detail.c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failures),
              criteria.size());
  return failures == 0 ? 0 : 1;
}
