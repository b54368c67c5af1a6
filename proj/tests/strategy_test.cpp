#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "fedsched/scheduler.hpp"
#include "fedsched/strategy.hpp"
#include "oracles.hpp"

using namespace fedsched;

namespace {

const ClusterSpec kCluster{Share::whole(8), {GpuDevice{0, 11264}}};

StrategyConfig aware_cfg() {
  StrategyConfig c;
  c.kind = StrategyKind::resource_aware_fedavg;
  c.default_spec = ResourceSpec{Share::whole(1), Share::whole(1), 11264};
  return c;
}

ClientProperties gpu_props(double peak) {
  return {{props::kPeakVramMb, peak}, {props::kMeanGpuPct, 50},   {props::kPeakRamMb, 100},
          {props::kMeanCpuPct, 50},   {props::kCpuTimeS, 1},       {props::kGpuTimeS, 1},
          {props::kUsesGpu, 1},       {props::kTrainDurationS, 10}};
}

std::vector<ClientId> ids(std::uint32_t n) {
  std::vector<ClientId> out;
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(ClientId{i});
  return out;
}

}  // namespace

TEST_CASE("strategy kind names round-trip") {
  for (auto k : {StrategyKind::static_fedavg, StrategyKind::resource_aware_fedavg})
    CHECK(parse_strategy_kind(to_string(k)) == k);
  CHECK_FALSE(parse_strategy_kind("fedprox").has_value());
}

TEST_CASE("sample_clients") {
  const auto pool = ids(10);
  CHECK(sample_clients(pool, 10, 5) == pool);
  const auto one = sample_clients(pool, 1, 123);
  REQUIRE(one.size() == 1);
  CHECK(one[0].value < 10);
  CHECK(sample_clients(pool, 4, 99) == sample_clients(pool, 4, 99));
  CHECK_THROWS_AS(sample_clients(pool, 11, 0), std::invalid_argument);

  const auto big = ids(100);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = sample_clients(big, 17, seed);
    CHECK(s.size() == 17);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::set<ClientId>(s.begin(), s.end()).size() == 17);
  }
}

TEST_CASE("sample_clients is roughly uniform") {
  const auto pool = ids(10);
  std::vector<int> hits(10, 0);
  for (std::uint64_t seed = 0; seed < 5000; ++seed)
    for (auto c : sample_clients(pool, 3, seed)) ++hits[c.value];
  // Expected 1500 each; binomial sd is about 32.
  for (int h : hits) CHECK(std::abs(h - 1500) < 200);
}

TEST_CASE("configure_fit cold start and profiled update") {
  auto cfg = aware_cfg();
  auto state = ClientManagerState::with_pool(10, cfg.default_spec);
  const auto first = configure_fit(1, state, cfg, kCluster, 10, 0);
  REQUIRE(first.instructions.size() == 10);
  for (const auto& ins : first.instructions) {
    CHECK(ins.spec == cfg.default_spec);
    CHECK(ins.round_index == 1);
  }

  std::vector<FitResult> results;
  for (std::uint32_t i = 0; i < 10; ++i)
    results.push_back({ClientId{i}, {1.0}, 10, gpu_props(i == 7 ? 2600 : 1000)});
  aggregate_fit(results, state, 1);
  const auto second = configure_fit(2, state, cfg, kCluster, 10, 0);
  const auto& c7 = second.instructions[7];
  CHECK(c7.client == ClientId{7});
  CHECK(c7.spec.vram_mb == 2860);
  CHECK(c7.spec.num_gpus.units() == 260);
  CHECK(c7.spec.num_cpus == cfg.default_spec.num_cpus);
  CHECK(second.instructions[0].spec.vram_mb == 1100);
}

TEST_CASE("static strategy always hands out the default spec") {
  auto cfg = aware_cfg();
  cfg.kind = StrategyKind::static_fedavg;
  auto state = ClientManagerState::with_pool(5, cfg.default_spec);
  std::vector<FitResult> results;
  for (std::uint32_t i = 0; i < 5; ++i) results.push_back({ClientId{i}, {0.0}, 1, gpu_props(500)});
  for (int round = 1; round <= 3; ++round) {
    const auto plan = configure_fit(round, state, cfg, kCluster, 5, 0);
    for (const auto& ins : plan.instructions) CHECK(ins.spec == cfg.default_spec);
    aggregate_fit(results, state, round);
  }
}

TEST_CASE("next_resource_estimate") {
  const auto cfg = aware_cfg();
  const auto e = next_resource_estimate(gpu_props(2600), kCluster, cfg);
  CHECK(e.spec.vram_mb == 2860);
  CHECK(e.spec.num_gpus == vram_to_gpu_ratio(2860, kCluster));
  CHECK_FALSE(e.warning.has_value());

  auto cpu_only = gpu_props(0);
  cpu_only[props::kUsesGpu] = 0;
  const auto c = next_resource_estimate(cpu_only, kCluster, cfg);
  CHECK(c.spec.vram_mb == 0);
  CHECK(c.spec.num_gpus == Share{});

  const auto clamped = next_resource_estimate(gpu_props(11000), kCluster, cfg);
  CHECK(clamped.spec.vram_mb == 11264);
  CHECK(clamped.spec.num_gpus == Share::whole(1));
  CHECK(clamped.warning.has_value());

  CHECK(next_resource_estimate(gpu_props(10), kCluster, cfg).spec.vram_mb == 64);
  CHECK_THROWS_AS(next_resource_estimate(ClientProperties{}, kCluster, cfg), std::invalid_argument);
}

TEST_CASE("profiling never inflates an over-provisioned default") {
  std::mt19937_64 rng(8);
  const auto cfg = aware_cfg();
  for (int trial = 0; trial < 500; ++trial) {
    const double peak = static_cast<double>(rng() % 10240);
    if (peak * cfg.safety_margin > static_cast<double>(cfg.default_spec.vram_mb)) continue;
    const auto e = next_resource_estimate(gpu_props(peak), kCluster, cfg);
    CHECK(e.spec.vram_mb <= cfg.default_spec.vram_mb);
    CHECK(e.spec.num_gpus <= cfg.default_spec.num_gpus);
    CHECK_FALSE(validate_resource_spec(e.spec, kCluster).has_value());
  }
}

TEST_CASE("fedavg_aggregate examples") {
  const std::vector<WeightedParams> single{{{1.5, -2.0}, 3}};
  CHECK(fedavg_aggregate(single) == ModelParams{1.5, -2.0});
  const std::vector<WeightedParams> sym{{{1.0, 0.0}, 1}, {{0.0, 1.0}, 1}};
  CHECK(fedavg_aggregate(sym) == ModelParams{0.5, 0.5});
  const std::vector<WeightedParams> weighted{{{2.0}, 1}, {{4.0}, 3}};
  CHECK(fedavg_aggregate(weighted) == ModelParams{3.5});

  CHECK_THROWS_AS(fedavg_aggregate(std::vector<WeightedParams>{}), std::invalid_argument);
  const std::vector<WeightedParams> mismatch{{{1.0}, 1}, {{1.0, 2.0}, 1}};
  CHECK_THROWS_AS(fedavg_aggregate(mismatch), std::invalid_argument);
  const std::vector<WeightedParams> zero{{{1.0}, 0}};
  CHECK_THROWS_AS(fedavg_aggregate(zero), std::invalid_argument);
  const std::vector<WeightedParams> nan{{{std::nan("")}, 1}};
  CHECK_THROWS_AS(fedavg_aggregate(nan), std::invalid_argument);
}

TEST_CASE("fedavg_aggregate matches a brute-force weighted mean") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> val(-10.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    const std::size_t dim = 1 + rng() % 32;
    std::vector<std::vector<double>> params(n, std::vector<double>(dim));
    std::vector<double> weights(n);
    std::vector<WeightedParams> entries;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& x : params[i]) x = val(rng);
      weights[i] = static_cast<double>(1 + rng() % 1000);
      entries.push_back({params[i], weights[i]});
    }
    const auto expected = oracle::weighted_mean(params, weights);
    const auto got = fedavg_aggregate(entries);
    REQUIRE(got.size() == dim);
    for (std::size_t k = 0; k < dim; ++k)
      CHECK(std::abs(got[k] - expected[k]) <= 1e-12 * std::max(1.0, std::abs(expected[k])));
  }
}

TEST_CASE("aggregate_fit touches participants only") {
  auto state = ClientManagerState::with_pool(4, aware_cfg().default_spec);
  state.clients[ClientId{3}].last_properties = gpu_props(123);
  state.clients[ClientId{3}].last_round = 0;
  const std::vector<FitResult> results{{ClientId{0}, {1.0, 2.0}, 5, gpu_props(700)},
                                       {ClientId{1}, {1.0, 2.0}, 5, gpu_props(800)}};
  CHECK(aggregate_fit(results, state, 1) == ModelParams{1.0, 2.0});
  CHECK(state.clients[ClientId{0}].last_properties->at(props::kPeakVramMb) == 700);
  CHECK(state.clients[ClientId{1}].last_round == 1);
  CHECK_FALSE(state.clients[ClientId{2}].last_properties.has_value());
  CHECK(state.clients[ClientId{3}].last_properties->at(props::kPeakVramMb) == 123);
  CHECK_THROWS_WITH_AS(aggregate_fit(std::vector<FitResult>{}, state, 2), "no results to aggregate",
                       std::invalid_argument);
}

TEST_CASE("on_failure backs off and clamps") {
  auto cfg = aware_cfg();
  cfg.default_spec = ResourceSpec{Share::whole(1), vram_to_gpu_ratio(2000, kCluster), 2000};
  auto state = ClientManagerState::with_pool(3, cfg.default_spec);
  state.clients[ClientId{0}].last_properties = gpu_props(6000);
  on_failure(ClientId{0}, state, cfg, kCluster);
  CHECK(state.clients[ClientId{0}].spec.vram_mb == 4000);
  CHECK(state.clients[ClientId{0}].spec.num_gpus == vram_to_gpu_ratio(4000, kCluster));
  CHECK_FALSE(state.clients[ClientId{0}].last_properties.has_value());
  CHECK(state.clients[ClientId{1}].spec == cfg.default_spec);

  state.clients[ClientId{2}].spec = ResourceSpec{Share::whole(1), vram_to_gpu_ratio(8000, kCluster), 8000};
  on_failure(ClientId{2}, state, cfg, kCluster);
  CHECK(state.clients[ClientId{2}].spec.vram_mb == 11264);
  CHECK(state.clients[ClientId{2}].spec.num_gpus == Share::whole(1));
}

TEST_CASE("validate_strategy_config") {
  auto cfg = aware_cfg();
  CHECK_FALSE(validate_strategy_config(cfg, kCluster).has_value());
  cfg.safety_margin = 0.9;
  CHECK(validate_strategy_config(cfg, kCluster).has_value());
  cfg = aware_cfg();
  cfg.oom_backoff_factor = 1.0;
  CHECK(validate_strategy_config(cfg, kCluster).has_value());
  cfg = aware_cfg();
  cfg.min_vram_mb = 0;
  CHECK(validate_strategy_config(cfg, kCluster).has_value());
}
