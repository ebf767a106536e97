#ifndef GRIDPLAN_PLANNING_HPP
#define GRIDPLAN_PLANNING_HPP

#include <map>
#include <string>
#include <vector>

#include "gridplan/io.hpp"
#include "gridplan/qpcore.hpp"
#include "gridplan/scenarios.hpp"

namespace gridplan::planning {

/// Battery parameters; capacity == 0 means the microgrid has no storage and
/// no storage variables enter any problem.
struct StorageSpec {
  double capacity = 0;       // kWh
  double dod = 1;            // usable fraction, floor = capacity * (1 - dod)
  double charge_cap = 0;     // kW
  double discharge_cap = 0;  // kW
  double charge_eff = 1;
  double discharge_eff = 1;
  double initial_level = -1; // kWh; negative selects the floor
  double wear_cost = 0;      // HKD per kWh charged or discharged

  bool present() const { return capacity > 0; }
  double floor_level() const { return capacity * (1 - dod); }
  double start_level() const { return initial_level >= 0 ? initial_level : floor_level(); }
  void validate(const std::string& context) const;
};

struct UserSpec {
  std::string id;
  double daily_total = 0;              // kWh that must be consumed per day
  std::vector<double> min_load;        // kW per slot
  std::vector<double> max_load;        // kW per slot
  std::vector<double> preferred_load;  // kW per slot
  double discomfort_coeff = 0;         // HKD/kW^2 on deviation from preferred

  void validate(const std::string& context, std::size_t slots) const;
};

struct MicrogridSpec {
  std::string id;
  std::string location_id; // binds to scenario profiles
  double fixed_cost = 0;   // HKD, incurred only when installing
  double solar_unit_cost = 0; // HKD/kW
  double wind_unit_cost = 0;  // HKD/kW
  double solar_cap = 0;       // kW
  double wind_cap = 0;        // kW
  double grid_cap = 0;        // kW procurement ceiling
  StorageSpec storage;
  std::vector<double> inelastic_load; // kW per slot
  std::vector<UserSpec> users;

  std::size_t slot_count() const { return inelastic_load.size(); }
  void validate() const;
};

struct PlanningHorizon {
  int days = 1;
  double daily_rate = 0;
};

struct SystemSpec {
  std::vector<MicrogridSpec> microgrids;
  std::vector<double> tariff; // HKD/kWh per slot
  std::vector<std::vector<double>> distribution_eff; // MxM, unit diagonal
  PlanningHorizon horizon;

  void validate() const;
  int index_of(const std::string& microgrid_id) const; // -1 when absent
};

/// Present-value weight for one expected daily operational cost over the
/// horizon: sum_{d=1..days} (1 + rate)^-d.
double discount_coefficient(int days, double daily_rate);

/// One microgrid's dispatch for one scenario. dispatch_from holds the
/// renewable power received per supplying microgrid (own id = local supply);
/// renewable_in is the delivered sum after distribution losses.
struct Schedule {
  int scenario_id = 0;
  std::vector<double> grid_draw;
  std::map<std::string, std::vector<double>> dispatch_from;
  std::vector<double> renewable_in;
  std::vector<double> storage_level;
  std::vector<double> charge;
  std::vector<double> discharge;
  std::map<std::string, std::vector<double>> elastic;
};

/// Single-day operational cost: tariff * grid draw + storage wear + quadratic
/// discomfort of every user's deviation from its preferred profile.
double operational_cost(const Schedule& schedule, const MicrogridSpec& spec,
                        const std::vector<double>& tariff);

double expected_operational_cost(const std::vector<double>& scenario_costs,
                                 const std::vector<double>& probabilities);

double investment_cost(int install, double solar_capacity, double wind_capacity,
                       const MicrogridSpec& spec);

struct MicrogridPlan {
  std::string id;
  int install = 0;
  double solar_capacity = 0;
  double wind_capacity = 0;
  std::vector<Schedule> schedules;  // aligned with the scenario set order
  double investment_cost = 0;       // HKD
  double operational_cost = 0;      // HKD, discounted expected
  double overall_cost = 0;          // investment + operational
};

struct ScheduleAudit {
  double max_balance_residual = 0;   // worst equality-row defect of the schedules
  double max_supply_violation = 0;   // worst dispatch-cap overshoot
  double max_bound_violation = 0;    // worst raw solver excursion outside a box
  int simultaneous_charge_slots = 0; // slots with both charge and discharge active
};

struct PlanSolution {
  std::vector<MicrogridPlan> microgrids;
  std::vector<int> install_vector;
  double total_cost = 0;
  double theta = 0;
  ScheduleAudit audit;
  double max_kkt_residual = 0;
  int subproblems_solved = 0;
};

struct PlanOptions {
  qp::SolveOptions solver; // solver.tol is the schedule acceptance tolerance
  double tie_tol = 1e-6;   // relative tie window for install comparisons
  int enum_limit = 16;     // refuse enumeration beyond 2^enum_limit
  int threads = 0;         // 0 = hardware concurrency
};

/// Single-microgrid overall-cost problem for a fixed install decision.
/// install == 0 carries no capacity or supply variables.
qp::QuadraticProgram build_noncoop_qp(const MicrogridSpec& spec,
                                      const scenarios::ScenarioSet& scen,
                                      const std::vector<double>& tariff, double theta,
                                      int install);

/// System problem for a fixed install vector: dispatch variables from every
/// installed source to every microgrid, coupled by per-source supply caps.
qp::QuadraticProgram build_iop_qp(const SystemSpec& system, const scenarios::ScenarioSet& scen,
                                  double theta, const std::vector<int>& install);

/// Solves both install branches, returns the cheaper plan; ties go to the
/// no-install branch. total_cost is the standalone benchmark cost.
PlanSolution solve_noncoop(const MicrogridSpec& spec, const scenarios::ScenarioSet& scen,
                           const std::vector<double>& tariff, double theta,
                           const PlanOptions& opts = {});

/// Runs solve_noncoop independently for every microgrid in the system.
PlanSolution solve_noncoop_system(const SystemSpec& system, const scenarios::ScenarioSet& scen,
                                  double theta, const PlanOptions& opts = {});

/// Enumerates all install vectors, solves each convex subproblem, returns the
/// global minimizer. Ties prefer fewer installs, then the lexicographically
/// smallest vector.
PlanSolution solve_iop(const SystemSpec& system, const scenarios::ScenarioSet& scen, double theta,
                       const PlanOptions& opts = {});

// Configuration and result serialization. The JSON loader additionally pins
// every per-slot vector to 24 entries, the daily-operation contract.
SystemSpec system_from_json_string(const std::string& text);
SystemSpec load_system_spec(const std::string& path);

std::string plan_to_json_string(const PlanSolution& plan, const std::string& mode,
                                const io::Manifest& manifest);
std::string capacities_csv(const PlanSolution& plan);
std::string costs_csv(const PlanSolution& plan);

} // namespace gridplan::planning

#endif
