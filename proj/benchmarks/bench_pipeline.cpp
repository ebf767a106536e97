#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "gridplan/planning.hpp"
#include "gridplan/qpcore.hpp"
#include "gridplan/scenarios.hpp"

namespace planning = gridplan::planning;
namespace scen = gridplan::scenarios;
namespace qp = gridplan::qp;

namespace {

planning::SystemSpec bench_system(int microgrids) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  planning::SystemSpec sys;
  for (int i = 0; i < microgrids; ++i) {
    planning::MicrogridSpec mg;
    mg.id = "mg" + std::to_string(i);
    mg.location_id = "L" + std::to_string(i);
    mg.fixed_cost = 2000.0;
    mg.solar_unit_cost = 12.0;
    mg.wind_unit_cost = 15.0;
    mg.solar_cap = 40.0;
    mg.wind_cap = 40.0;
    mg.grid_cap = 60.0;
    mg.inelastic_load.resize(24);
    for (double& v : mg.inelastic_load) v = 8.0 + 6.0 * u01(rng);
    mg.storage.capacity = 15.0;
    mg.storage.dod = 0.8;
    mg.storage.charge_cap = 5.0;
    mg.storage.discharge_cap = 5.0;
    mg.storage.charge_eff = 0.95;
    mg.storage.discharge_eff = 0.95;
    mg.storage.wear_cost = 0.05;
    planning::UserSpec user;
    user.id = mg.id + "_u0";
    user.min_load.assign(24, 0.0);
    user.max_load.resize(24);
    user.preferred_load.resize(24);
    for (int t = 0; t < 24; ++t) {
      user.max_load[t] = 1.0 + 3.0 * u01(rng);
      user.preferred_load[t] = 0.5 * user.max_load[t];
      user.daily_total += user.preferred_load[t];
    }
    user.discomfort_coeff = 0.4;
    mg.users.push_back(std::move(user));
    sys.microgrids.push_back(std::move(mg));
  }
  sys.tariff.assign(24, 1.0);
  sys.distribution_eff.assign(microgrids, std::vector<double>(microgrids, 0.9));
  for (int i = 0; i < microgrids; ++i) sys.distribution_eff[i][i] = 1.0;
  sys.horizon = {3650, 2e-4};
  return sys;
}

scen::ScenarioSet bench_scenarios(const planning::SystemSpec& sys, int count) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  scen::ScenarioSet set;
  for (const auto& mg : sys.microgrids) set.locations.push_back(mg.location_id);
  for (int s = 0; s < count; ++s) {
    scen::Scenario d;
    d.id = s;
    for (const auto& loc : set.locations) {
      d.solar[loc].resize(24);
      d.wind[loc].resize(24);
      for (int t = 0; t < 24; ++t) {
        d.solar[loc][t] = u01(rng);
        d.wind[loc][t] = u01(rng);
      }
    }
    set.scenarios.push_back(std::move(d));
    set.probabilities.push_back(1.0 / count);
  }
  return set;
}

void solve_schedule_qp(benchmark::State& state) {
  const int microgrids = static_cast<int>(state.range(0));
  const auto sys = bench_system(microgrids);
  const auto sets = bench_scenarios(sys, 3);
  const double theta =
      planning::discount_coefficient(sys.horizon.days, sys.horizon.daily_rate);
  const std::vector<int> install(microgrids, 1);
  const auto program = planning::build_iop_qp(sys, sets, theta, install);
  for (auto _ : state) {
    const auto sol = qp::solve_qp(program);
    benchmark::DoNotOptimize(sol.objective);
  }
  state.counters["vars"] = program.n;
}

void reduce_scenario_set(benchmark::State& state) {
  const auto sys = bench_system(2);
  const auto sets = bench_scenarios(sys, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const auto reduced = scen::reduce_scenarios(sets, 10);
    benchmark::DoNotOptimize(reduced.scenarios.size());
  }
}

} // namespace

BENCHMARK(solve_schedule_qp)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(reduce_scenario_set)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
