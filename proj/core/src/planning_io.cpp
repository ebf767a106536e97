#include "gridplan/planning.hpp"

#include <sstream>

#include <json.hpp>

#include "gridplan/errors.hpp"

namespace gridplan::planning {

namespace {

// Daily-operation contract for configs and artifacts: 24 hourly slots.
constexpr std::size_t kSlotsPerDay = 24;

std::vector<double> slot_vector(const nlohmann::json& j, const std::string& what) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != kSlotsPerDay)
    throw ValidationError(what + " must have " + std::to_string(kSlotsPerDay) + " entries, got " +
                          std::to_string(v.size()));
  return v;
}

StorageSpec storage_from_json(const nlohmann::json& j) {
  StorageSpec st;
  st.capacity = j.at("capacity").get<double>();
  st.dod = j.at("dod").get<double>();
  st.charge_cap = j.at("charge_cap").get<double>();
  st.discharge_cap = j.at("discharge_cap").get<double>();
  st.charge_eff = j.at("charge_eff").get<double>();
  st.discharge_eff = j.at("discharge_eff").get<double>();
  st.wear_cost = j.at("wear_cost").get<double>();
  if (j.contains("initial_level")) st.initial_level = j.at("initial_level").get<double>();
  return st;
}

UserSpec user_from_json(const nlohmann::json& j) {
  UserSpec u;
  u.id = j.at("id").get<std::string>();
  u.daily_total = j.at("daily_total").get<double>();
  u.min_load = slot_vector(j.at("min_load"), "user " + u.id + ": min_load");
  u.max_load = slot_vector(j.at("max_load"), "user " + u.id + ": max_load");
  u.preferred_load = slot_vector(j.at("preferred_load"), "user " + u.id + ": preferred_load");
  u.discomfort_coeff = j.at("discomfort_coeff").get<double>();
  return u;
}

MicrogridSpec microgrid_from_json(const nlohmann::json& j) {
  MicrogridSpec mg;
  mg.id = j.at("id").get<std::string>();
  mg.location_id = j.at("location_id").get<std::string>();
  mg.fixed_cost = j.at("fixed_cost").get<double>();
  mg.solar_unit_cost = j.at("solar_unit_cost").get<double>();
  mg.wind_unit_cost = j.at("wind_unit_cost").get<double>();
  mg.solar_cap = j.at("solar_cap").get<double>();
  mg.wind_cap = j.at("wind_cap").get<double>();
  mg.grid_cap = j.at("grid_cap").get<double>();
  mg.inelastic_load = slot_vector(j.at("inelastic_load"),
                                  "microgrid " + mg.id + ": inelastic_load");
  if (j.contains("storage")) mg.storage = storage_from_json(j.at("storage"));
  if (j.contains("users"))
    for (const auto& ju : j.at("users")) mg.users.push_back(user_from_json(ju));
  return mg;
}

nlohmann::json schedule_to_json(const Schedule& sch, bool has_storage) {
  nlohmann::json j;
  j["scenario"] = sch.scenario_id;
  j["grid_draw"] = sch.grid_draw;
  j["dispatch_from"] = sch.dispatch_from;
  j["renewable_in"] = sch.renewable_in;
  if (has_storage) {
    j["storage_level"] = sch.storage_level;
    j["charge"] = sch.charge;
    j["discharge"] = sch.discharge;
  }
  if (!sch.elastic.empty()) j["elastic"] = sch.elastic;
  return j;
}

} // namespace

SystemSpec system_from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("system config: invalid JSON: ") + e.what());
  }
  SystemSpec sys;
  try {
    sys.tariff = slot_vector(j.at("tariff"), "tariff");
    sys.distribution_eff = j.at("distribution_eff").get<std::vector<std::vector<double>>>();
    const auto& jh = j.at("horizon");
    sys.horizon.days = jh.at("days").get<int>();
    sys.horizon.daily_rate = jh.at("daily_rate").get<double>();
    for (const auto& jm : j.at("microgrids")) sys.microgrids.push_back(microgrid_from_json(jm));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("system config: missing or malformed field: ") + e.what());
  }
  sys.validate();
  return sys;
}

SystemSpec load_system_spec(const std::string& path) {
  return system_from_json_string(io::read_text_file(path));
}

std::string plan_to_json_string(const PlanSolution& plan, const std::string& mode,
                                const io::Manifest& manifest) {
  nlohmann::json j;
  j["mode"] = mode;
  j["theta"] = plan.theta;
  j["total_cost"] = plan.total_cost;
  j["install"] = plan.install_vector;
  j["max_kkt_residual"] = plan.max_kkt_residual;
  j["subproblems_solved"] = plan.subproblems_solved;
  j["audit"] = {{"max_balance_residual", plan.audit.max_balance_residual},
                {"max_supply_violation", plan.audit.max_supply_violation},
                {"max_bound_violation", plan.audit.max_bound_violation},
                {"simultaneous_charge_slots", plan.audit.simultaneous_charge_slots}};
  j["microgrids"] = nlohmann::json::array();
  for (const auto& mg : plan.microgrids) {
    nlohmann::json jm;
    jm["id"] = mg.id;
    jm["install"] = mg.install;
    jm["solar_capacity"] = mg.solar_capacity;
    jm["wind_capacity"] = mg.wind_capacity;
    jm["investment_cost"] = mg.investment_cost;
    jm["operational_cost"] = mg.operational_cost;
    jm["overall_cost"] = mg.overall_cost;
    jm["schedules"] = nlohmann::json::array();
    const bool has_storage = !mg.schedules.empty() && !mg.schedules.front().storage_level.empty();
    for (const auto& sch : mg.schedules) jm["schedules"].push_back(schedule_to_json(sch, has_storage));
    j["microgrids"].push_back(std::move(jm));
  }
  j["manifest"] = nlohmann::json::parse(manifest.to_json_string());
  return j.dump(2) + "\n";
}

std::string capacities_csv(const PlanSolution& plan) {
  std::ostringstream os;
  os << "microgrid,install,solar_kw,wind_kw\n";
  for (const auto& mg : plan.microgrids)
    os << mg.id << ',' << mg.install << ',' << io::format_double(mg.solar_capacity) << ','
       << io::format_double(mg.wind_capacity) << '\n';
  return os.str();
}

std::string costs_csv(const PlanSolution& plan) {
  std::ostringstream os;
  os << "microgrid,investment,operational,overall\n";
  for (const auto& mg : plan.microgrids)
    os << mg.id << ',' << io::format_double(mg.investment_cost) << ','
       << io::format_double(mg.operational_cost) << ',' << io::format_double(mg.overall_cost)
       << '\n';
  return os.str();
}

} // namespace gridplan::planning
