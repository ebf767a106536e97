#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridplan/errors.hpp"
#include "gridplan/planning.hpp"
#include "gridplan/qpcore.hpp"
#include "gridplan/scenarios.hpp"
#include "planning_instances.hpp"

namespace planning = gridplan::planning;
namespace scen = gridplan::scenarios;
namespace qp = gridplan::qp;
using gridplan::PlanningError;
using gridplan::ValidationError;
using gridplan::testing::pair_scenarios;
using gridplan::testing::pair_system;
using gridplan::testing::solo_scenarios;
using gridplan::testing::solo_spec;

namespace {

const std::vector<double> kSoloTariff = gridplan::testing::solo_tariff();

nlohmann::json valid_system_json() {
  nlohmann::json mg;
  mg["id"] = "a";
  mg["location_id"] = "site";
  mg["fixed_cost"] = 100.0;
  mg["solar_unit_cost"] = 10.0;
  mg["wind_unit_cost"] = 12.0;
  mg["solar_cap"] = 50.0;
  mg["wind_cap"] = 50.0;
  mg["grid_cap"] = 500.0;
  mg["inelastic_load"] = std::vector<double>(24, 10.0);

  nlohmann::json j;
  j["tariff"] = std::vector<double>(24, 1.0);
  j["distribution_eff"] = {{1.0}};
  j["horizon"] = {{"days", 365}, {"daily_rate", 0.0}};
  j["microgrids"] = {mg};
  return j;
}

} // namespace

TEST_SUITE("planning") {

TEST_CASE("discount coefficient") {
  CHECK(planning::discount_coefficient(7300, 0.0) == 7300.0);
  CHECK(planning::discount_coefficient(1, 0.01) == doctest::Approx(1.0 / 1.01).epsilon(1e-15));

  double direct = 0.0;
  for (int d = 1; d <= 7300; ++d) direct += std::pow(1.0002, -d);
  CHECK(planning::discount_coefficient(7300, 0.0002) == doctest::Approx(direct).epsilon(1e-9));

  CHECK_THROWS_AS(planning::discount_coefficient(0, 0.01), ValidationError);
  CHECK_THROWS_AS(planning::discount_coefficient(10, -0.5), ValidationError);
}

TEST_CASE("operational cost sums tariff, wear and discomfort") {
  planning::MicrogridSpec mg;
  mg.id = "m";
  mg.location_id = "x";
  mg.grid_cap = 10;
  mg.inelastic_load = {1.0, 1.0};
  mg.storage.capacity = 5;
  mg.storage.charge_cap = 2;
  mg.storage.discharge_cap = 2;
  mg.storage.wear_cost = 0.2;
  planning::UserSpec u;
  u.id = "u";
  u.daily_total = 4;
  u.min_load = {0, 0};
  u.max_load = {5, 5};
  u.preferred_load = {2, 2};
  u.discomfort_coeff = 2.0;
  mg.users = {u};

  planning::Schedule sch;
  sch.grid_draw = {1.0, 2.0};
  sch.charge = {1.0, 0.0};
  sch.discharge = {0.0, 1.0};
  sch.elastic["u"] = {3.0, 1.0};

  // 0.5*1 + 1*2 + 0.2*(1+1) + 2*(1^2 + 1^2)
  CHECK(planning::operational_cost(sch, mg, {0.5, 1.0}) ==
        doctest::Approx(6.9).epsilon(1e-15));
}

TEST_CASE("expected operational cost is the probability mixture") {
  CHECK(planning::expected_operational_cost({10.0, 20.0}, {0.25, 0.75}) ==
        doctest::Approx(17.5).epsilon(1e-15));
  CHECK_THROWS_AS(planning::expected_operational_cost({1.0}, {0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(planning::expected_operational_cost({1.0, 1.0}, {0.5, 0.6}), ValidationError);
}

TEST_CASE("investment cost") {
  planning::MicrogridSpec mg = solo_spec();
  mg.fixed_cost = 10.0;
  mg.solar_unit_cost = 2.0;
  mg.wind_unit_cost = 1.0;
  mg.solar_cap = 5.0;
  mg.wind_cap = 5.0;
  CHECK(planning::investment_cost(1, 3.0, 4.0, mg) == doctest::Approx(20.0).epsilon(1e-15));
  CHECK(planning::investment_cost(0, 0.0, 0.0, mg) == 0.0);
  CHECK_THROWS_AS(planning::investment_cost(1, 6.0, 0.0, mg), ValidationError);
  CHECK_THROWS_AS(planning::investment_cost(2, 0.0, 0.0, mg), ValidationError);
}

TEST_CASE("standalone problem variable counts") {
  auto mg = solo_spec();
  planning::UserSpec u;
  u.id = "u";
  u.daily_total = 0.02;
  u.min_load = {0.0, 0.0};
  u.max_load = {0.02, 0.02};
  u.preferred_load = {0.01, 0.01};
  u.discomfort_coeff = 1.0;
  mg.users = {u};

  const auto set = solo_scenarios();
  // install: capacities + per slot (supply, elastic, grid draw)
  CHECK(planning::build_noncoop_qp(mg, set, kSoloTariff, 1.0, 1).n == 8);
  // no install: per slot (elastic, grid draw)
  CHECK(planning::build_noncoop_qp(mg, set, kSoloTariff, 1.0, 0).n == 4);
}

TEST_CASE("standalone branches match the exhaustive grid oracle") {
  const auto mg = solo_spec();
  const auto set = solo_scenarios();
  for (int z : {0, 1}) {
    CAPTURE(z);
    const auto prog = planning::build_noncoop_qp(mg, set, kSoloTariff, 1.0, z);
    const auto sol = qp::solve_qp(prog);
    REQUIRE(sol.status == qp::SolveStatus::optimal);
    const auto grid = qp::brute_force_min(prog, 1e-3);
    REQUIRE(grid.has_value());
    CHECK(std::abs(sol.objective - grid->objective) <= 1e-3);
  }
}

TEST_CASE("standalone plan installs and covers load renewably") {
  const auto plan = planning::solve_noncoop(solo_spec(), solo_scenarios(), kSoloTariff, 1.0);
  CHECK(plan.install_vector == std::vector<int>{1});
  CHECK(plan.total_cost == doctest::Approx(0.002).epsilon(1e-6));
  CHECK(plan.subproblems_solved == 2);
  REQUIRE(plan.microgrids.size() == 1);
  const auto& mg = plan.microgrids[0];
  CHECK(mg.solar_capacity == doctest::Approx(0.03).epsilon(1e-6));
  CHECK(mg.wind_capacity == doctest::Approx(0.02).epsilon(1e-6));
  CHECK(mg.investment_cost == doctest::Approx(0.002).epsilon(1e-6));
  for (double q : mg.schedules[0].grid_draw) CHECK(q <= 1e-8);
  CHECK(plan.audit.max_balance_residual <= 1e-6);
  CHECK(plan.audit.max_supply_violation <= 1e-6);
  CHECK(plan.max_kkt_residual <= 1e-6);
}

TEST_CASE("installation ties break toward not installing") {
  planning::MicrogridSpec mg;
  mg.id = "tie";
  mg.location_id = "site";
  mg.fixed_cost = 0.0;
  mg.solar_unit_cost = 0.1;
  mg.wind_unit_cost = 0.1;
  mg.solar_cap = 1.0;
  mg.wind_cap = 0.0;
  mg.grid_cap = 2.0;
  mg.inelastic_load = {1.0};

  scen::ScenarioSet set;
  set.locations = {"site"};
  scen::Scenario s;
  s.id = 0;
  s.solar["site"] = {1.0};
  s.wind["site"] = {0.0};
  set.scenarios.push_back(std::move(s));
  set.probabilities = {1.0};

  // Covering the load renewably costs exactly the grid tariff.
  const auto plan = planning::solve_noncoop(mg, set, {0.1}, 1.0);
  CHECK(plan.install_vector == std::vector<int>{0});
  CHECK(plan.total_cost == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("a site with no renewable resource never installs") {
  auto mg = solo_spec();
  auto set = solo_scenarios();
  set.scenarios[0].solar["site"] = {0.0, 0.0};
  set.scenarios[0].wind["site"] = {0.0, 0.0};
  const auto plan = planning::solve_noncoop(mg, set, kSoloTariff, 1.0);
  CHECK(plan.install_vector == std::vector<int>{0});
  CHECK(plan.total_cost == doctest::Approx(0.0025).epsilon(1e-6));
}

TEST_CASE("raising the tariff never lowers the optimal cost") {
  auto mg = solo_spec();
  auto set = solo_scenarios();
  set.scenarios[0].solar["site"] = {0.0, 0.0};
  set.scenarios[0].wind["site"] = {0.0, 0.0};
  const auto cheap = planning::solve_noncoop(mg, set, {1.0, 1.0}, 1.0);
  const auto dear = planning::solve_noncoop(mg, set, {2.0, 2.0}, 1.0);
  CHECK(dear.total_cost >= cheap.total_cost - 1e-12);
  CHECK(dear.total_cost == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("duplicated scenarios with split probability change nothing") {
  const auto mg = solo_spec();
  auto set = solo_scenarios();
  scen::Scenario copy = set.scenarios[0];
  copy.id = 1;
  set.scenarios.push_back(copy);
  set.probabilities = {0.3, 0.7};

  const auto base = planning::solve_noncoop(mg, solo_scenarios(), kSoloTariff, 1.0);
  const auto mixed = planning::solve_noncoop(mg, set, kSoloTariff, 1.0);
  CHECK(mixed.total_cost == doctest::Approx(base.total_cost).epsilon(1e-8));
}

TEST_CASE("theta scales only the operational part") {
  const auto mg = solo_spec();
  const auto set = solo_scenarios();
  const auto base = planning::solve_noncoop(mg, set, kSoloTariff, 1.0);
  const auto longer = planning::solve_noncoop(mg, set, kSoloTariff, 10.0);
  // Renewables already cover everything; only investment remains in both.
  CHECK(longer.microgrids[0].investment_cost ==
        doctest::Approx(base.microgrids[0].investment_cost).epsilon(1e-6));
  CHECK(longer.theta == 10.0);
}

TEST_CASE("storage shifts cheap power into the expensive slot") {
  planning::MicrogridSpec mg;
  mg.id = "store";
  mg.location_id = "site";
  mg.fixed_cost = 0.01;
  mg.solar_cap = 0.0;
  mg.wind_cap = 0.0;
  mg.grid_cap = 5.0;
  mg.inelastic_load = {0.0, 1.0};
  mg.storage.capacity = 1.0;
  mg.storage.dod = 1.0;
  mg.storage.charge_cap = 1.0;
  mg.storage.discharge_cap = 1.0;
  mg.storage.charge_eff = 1.0;
  mg.storage.discharge_eff = 1.0;
  mg.storage.wear_cost = 0.2;

  auto set = solo_scenarios();
  set.scenarios[0].solar["site"] = {0.0, 0.0};
  set.scenarios[0].wind["site"] = {0.0, 0.0};

  const auto plan = planning::solve_noncoop(mg, set, {1.0, 3.0}, 1.0);
  // Charge 1 kWh at tariff 1, discharge it at tariff 3, pay wear both ways.
  CHECK(plan.total_cost == doctest::Approx(1.4).epsilon(1e-6));
  const auto& sch = plan.microgrids[0].schedules[0];
  CHECK(sch.charge[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sch.discharge[1] == doctest::Approx(1.0).epsilon(1e-6));
  // The day ends at the starting level.
  CHECK(sch.storage_level.back() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(plan.audit.simultaneous_charge_slots == 0);

  SUBCASE("depth-of-discharge floor limits the shift") {
    auto limited = mg;
    limited.storage.dod = 0.4;
    const auto p2 = planning::solve_noncoop(limited, set, {1.0, 3.0}, 1.0);
    // Only 0.4 kWh of headroom: 0.4*1 + 0.6*3 + 0.2*0.8.
    CHECK(p2.total_cost == doctest::Approx(2.36).epsilon(1e-6));
    for (double level : p2.microgrids[0].schedules[0].storage_level)
      CHECK(level >= 0.6 - 1e-6);
  }
  SUBCASE("losses can make storage not worth cycling") {
    auto lossy = mg;
    lossy.storage.charge_eff = 0.8;
    lossy.storage.discharge_eff = 0.5;
    const auto p3 = planning::solve_noncoop(lossy, set, {1.0, 3.0}, 1.0);
    CHECK(p3.total_cost == doctest::Approx(3.0).epsilon(1e-6));
  }
}

TEST_CASE("infeasible load is reported as a planning error") {
  auto mg = solo_spec();
  mg.grid_cap = 0.005; // below the inelastic load with no renewables
  auto set = solo_scenarios();
  set.scenarios[0].solar["site"] = {0.0, 0.0};
  set.scenarios[0].wind["site"] = {0.0, 0.0};
  CHECK_THROWS_AS(planning::solve_noncoop(mg, set, kSoloTariff, 1.0), PlanningError);
}

TEST_CASE("joint problem masks match the exhaustive grid oracle") {
  const auto sys = pair_system();
  const auto set = pair_scenarios();
  const std::vector<std::pair<std::vector<int>, double>> masks = {
      {{0, 0}, 0.002},    // grid only
      {{1, 0}, 0.0006},   // alpha powers both; fixed cost lives outside the QP
      {{0, 1}, 0.002},    // beta's site is dead, grid covers everything
  };
  for (const auto& [install, expected] : masks) {
    CAPTURE(install[0]);
    CAPTURE(install[1]);
    const auto prog = planning::build_iop_qp(sys, set, 1.0, install);
    const auto sol = qp::solve_qp(prog);
    REQUIRE(sol.status == qp::SolveStatus::optimal);
    CHECK(sol.objective == doctest::Approx(expected).epsilon(1e-6));
    const auto grid = qp::brute_force_min(prog, 1e-3);
    REQUIRE(grid.has_value());
    CHECK(std::abs(sol.objective - grid->objective) <= 1e-3);
  }
}

TEST_CASE("joint plan powers the dead site through the interconnection") {
  const auto plan = planning::solve_iop(pair_system(), pair_scenarios(), 1.0);
  CHECK(plan.install_vector == std::vector<int>{1, 0});
  CHECK(plan.total_cost == doctest::Approx(0.0011).epsilon(1e-6));
  CHECK(plan.subproblems_solved == 4);

  const auto& alpha = plan.microgrids[0];
  const auto& beta = plan.microgrids[1];
  CHECK(alpha.solar_capacity == doctest::Approx(0.03).epsilon(1e-6));
  CHECK(beta.install == 0);
  // Beta receives 0.01 kW after the 0.5 distribution efficiency.
  CHECK(beta.schedules[0].dispatch_from.at("alpha")[0] ==
        doctest::Approx(0.02).epsilon(1e-6));
  CHECK(beta.schedules[0].renewable_in[0] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(beta.schedules[0].grid_draw[0] <= 1e-8);
  CHECK(plan.audit.max_balance_residual <= 1e-6);
  CHECK(plan.audit.max_supply_violation <= 1e-6);
}

TEST_CASE("joint planning never costs more than standalone planning") {
  const auto sys = pair_system();
  const auto set = pair_scenarios();
  const auto joint = planning::solve_iop(sys, set, 1.0);
  const auto standalone = planning::solve_noncoop_system(sys, set, 1.0);
  CHECK(joint.total_cost <= standalone.total_cost + 1e-9);
  // Alpha alone installs (0.0007); beta alone buys from the grid (0.001).
  CHECK(standalone.total_cost == doctest::Approx(0.0017).epsilon(1e-6));
  CHECK(standalone.subproblems_solved == 4);
}

TEST_CASE("standalone system run equals per-microgrid runs") {
  const auto sys = pair_system();
  const auto set = pair_scenarios();
  const auto whole = planning::solve_noncoop_system(sys, set, 1.0);
  for (std::size_t i = 0; i < sys.microgrids.size(); ++i) {
    const auto solo =
        planning::solve_noncoop(sys.microgrids[i], set, sys.tariff, 1.0);
    CHECK(whole.microgrids[i].overall_cost ==
          doctest::Approx(solo.total_cost).epsilon(1e-9));
    CHECK(whole.install_vector[i] == solo.install_vector[0]);
  }
}

TEST_CASE("a one-microgrid joint problem reduces to the standalone one") {
  planning::SystemSpec sys;
  sys.microgrids = {solo_spec()};
  sys.tariff = kSoloTariff;
  sys.distribution_eff = {{1.0}};
  sys.horizon = {1, 0.0};
  const auto joint = planning::solve_iop(sys, solo_scenarios(), 1.0);
  const auto solo = planning::solve_noncoop(solo_spec(), solo_scenarios(), kSoloTariff, 1.0);
  CHECK(joint.total_cost == doctest::Approx(solo.total_cost).epsilon(1e-9));
  CHECK(joint.install_vector == solo.install_vector);
}

TEST_CASE("install ties prefer fewer installs, then the smaller vector") {
  planning::SystemSpec sys;
  planning::MicrogridSpec m0;
  m0.id = "m0";
  m0.location_id = "s";
  m0.fixed_cost = 0.02;
  m0.solar_unit_cost = 0.1;
  m0.wind_unit_cost = 0.1;
  m0.solar_cap = 3.0;
  m0.wind_cap = 0.0;
  m0.grid_cap = 2.0;
  m0.inelastic_load = {1.0};
  planning::MicrogridSpec m1 = m0;
  m1.id = "m1";

  sys.microgrids = {m0, m1};
  sys.tariff = {1.0};
  sys.distribution_eff = {{1.0, 0.9}, {0.9, 1.0}};
  sys.horizon = {1, 0.0};

  scen::ScenarioSet set;
  set.locations = {"s"};
  scen::Scenario s;
  s.id = 0;
  s.solar["s"] = {1.0};
  s.wind["s"] = {0.0};
  set.scenarios.push_back(std::move(s));
  set.probabilities = {1.0};

  // Installing at either microgrid alone costs the same by symmetry and beats
  // both the all-grid and the both-install plans.
  const auto plan = planning::solve_iop(sys, set, 1.0);
  CHECK(plan.install_vector == std::vector<int>{0, 1});
  CHECK(plan.total_cost ==
        doctest::Approx(0.02 + 0.1 * (1.0 + 1.0 / 0.9)).epsilon(1e-6));
}

TEST_CASE("enumeration refuses oversized systems") {
  planning::PlanOptions opts;
  opts.enum_limit = 1;
  CHECK_THROWS_AS(planning::solve_iop(pair_system(), pair_scenarios(), 1.0, opts),
                  PlanningError);
}

TEST_CASE("system JSON loader pins the daily contract") {
  const auto good = valid_system_json();
  const auto sys = planning::system_from_json_string(good.dump());
  CHECK(sys.microgrids.size() == 1);
  CHECK(sys.microgrids[0].id == "a");
  CHECK(sys.tariff.size() == 24);
  CHECK(sys.horizon.days == 365);
  CHECK(sys.index_of("a") == 0);
  CHECK(sys.index_of("zz") == -1);

  SUBCASE("malformed text") {
    CHECK_THROWS_AS(planning::system_from_json_string("not json"), ValidationError);
  }
  SUBCASE("wrong tariff length") {
    auto bad = good;
    bad["tariff"] = std::vector<double>(23, 1.0);
    CHECK_THROWS_AS(planning::system_from_json_string(bad.dump()), ValidationError);
  }
  SUBCASE("wrong load length") {
    auto bad = good;
    bad["microgrids"][0]["inelastic_load"] = std::vector<double>(23, 1.0);
    CHECK_THROWS_AS(planning::system_from_json_string(bad.dump()), ValidationError);
  }
  SUBCASE("distribution efficiency needs a unit diagonal") {
    auto bad = good;
    bad["distribution_eff"] = {{0.9}};
    CHECK_THROWS_AS(planning::system_from_json_string(bad.dump()), ValidationError);
  }
  SUBCASE("missing required field") {
    auto bad = good;
    bad["microgrids"][0].erase("grid_cap");
    CHECK_THROWS_AS(planning::system_from_json_string(bad.dump()), ValidationError);
  }
}

TEST_CASE("plan serialization is deterministic and carries the essentials") {
  const auto plan = planning::solve_iop(pair_system(), pair_scenarios(), 1.0);
  gridplan::io::Manifest manifest;
  manifest.params["mode"] = "coop";
  const std::string a = planning::plan_to_json_string(plan, "coop", manifest);
  const std::string b = planning::plan_to_json_string(plan, "coop", manifest);
  CHECK(a == b);
  CHECK(a.find("\"coop\"") != std::string::npos);
  CHECK(a.find("alpha") != std::string::npos);

  const std::string caps = planning::capacities_csv(plan);
  CHECK(caps.find("alpha") != std::string::npos);
  CHECK(caps.find("beta") != std::string::npos);
  const std::string costs = planning::costs_csv(plan);
  CHECK(costs.find("alpha") != std::string::npos);
}

} // TEST_SUITE
