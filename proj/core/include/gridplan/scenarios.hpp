#ifndef GRIDPLAN_SCENARIOS_HPP
#define GRIDPLAN_SCENARIOS_HPP

#include <map>
#include <string>
#include <vector>

#include "gridplan/meteorology.hpp"

namespace gridplan::scenarios {

/// One joint daily realization: 24 per-unit solar and wind values per location.
struct Scenario {
  int id = 0;
  std::map<std::string, std::vector<double>> solar;
  std::map<std::string, std::vector<double>> wind;
};

struct ScenarioSet {
  std::vector<std::string> locations; // sorted; the alignment contract
  std::vector<Scenario> scenarios;
  std::vector<double> probabilities; // aligned with scenarios, sums to 1

  void validate() const;
  const Scenario* find(int id) const;
  // Uniform across every profile in the set; 24 for the daily pipeline.
  int slot_count() const;
};

/// Slice per-location year profiles into daily joint scenarios with uniform
/// probability 1/day_count. Scenario ids are day indices (0-based).
ScenarioSet build_daily_scenarios(const std::vector<meteo::LocationProfiles>& profiles);

/// Euclidean norm of the difference of the concatenated per-location
/// (solar || wind) day vectors.
double scenario_distance(const Scenario& a, const Scenario& b);

/// Greedy forward selection down to `target_count` scenarios, minimizing
/// sum over dropped scenarios of pi * distance-to-nearest-kept. Each dropped
/// scenario's probability moves to its nearest kept scenario. Ties break
/// toward the lowest scenario id.
ScenarioSet reduce_scenarios(const ScenarioSet& set, int target_count);

/// The probability-distance objective achieved by a given kept subset.
double reduction_error(const ScenarioSet& original, const std::vector<int>& kept_ids);

std::string to_json_string(const ScenarioSet& set);
ScenarioSet from_json_string(const std::string& text);

void save_scenario_set(const std::string& path, const ScenarioSet& set);
ScenarioSet load_scenario_set(const std::string& path);

} // namespace gridplan::scenarios

#endif
