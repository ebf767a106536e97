#include "gridplan/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "gridplan/errors.hpp"
#include "gridplan/io.hpp"

namespace gridplan::scenarios {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

void check_slot_vector(const std::vector<double>& v, std::size_t slots, const std::string& what) {
  require(v.size() == slots,
          what + ": expected " + std::to_string(slots) + " values, got " + std::to_string(v.size()));
  for (double x : v) require(std::isfinite(x) && x >= 0.0 && x <= 1.0, what + ": values must lie in [0,1]");
}

} // namespace

void ScenarioSet::validate() const {
  require(!scenarios.empty(), "scenario set: empty");
  require(scenarios.size() == probabilities.size(), "scenario set: probability count mismatch");
  require(!locations.empty(), "scenario set: no locations");

  double sum = 0.0;
  for (double p : probabilities) {
    require(std::isfinite(p) && p >= 0.0, "scenario set: probabilities must be >= 0");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-12, "scenario set: probabilities must sum to 1");

  const std::size_t slots = slot_count();
  require(slots >= 1, "scenario set: empty profiles");
  std::set<int> ids;
  for (const auto& s : scenarios) {
    require(ids.insert(s.id).second, "scenario set: duplicate scenario id " + std::to_string(s.id));
    require(s.solar.size() == locations.size() && s.wind.size() == locations.size(),
            "scenario " + std::to_string(s.id) + ": location coverage mismatch");
    for (const auto& loc : locations) {
      auto is = s.solar.find(loc);
      auto iw = s.wind.find(loc);
      require(is != s.solar.end() && iw != s.wind.end(),
              "scenario " + std::to_string(s.id) + ": missing location " + loc);
      check_slot_vector(is->second, slots, "scenario " + std::to_string(s.id) + " solar at " + loc);
      check_slot_vector(iw->second, slots, "scenario " + std::to_string(s.id) + " wind at " + loc);
    }
  }
}

int ScenarioSet::slot_count() const {
  if (scenarios.empty()) return 0;
  const auto& first = scenarios.front();
  if (first.solar.empty()) return 0;
  return static_cast<int>(first.solar.begin()->second.size());
}

const Scenario* ScenarioSet::find(int id) const {
  for (const auto& s : scenarios)
    if (s.id == id) return &s;
  return nullptr;
}

ScenarioSet build_daily_scenarios(const std::vector<meteo::LocationProfiles>& profiles) {
  require(!profiles.empty(), "build_daily_scenarios: no locations");

  const std::size_t slots = profiles.front().solar.per_unit.size();
  require(slots > 0 && slots % meteo::kSlotsPerDay == 0,
          "build_daily_scenarios: profile length must be a multiple of 24");
  for (const auto& lp : profiles) {
    require(lp.solar.per_unit.size() == slots && lp.wind.per_unit.size() == slots,
            "build_daily_scenarios: day counts misaligned at location " + lp.solar.location_id);
  }

  ScenarioSet set;
  for (const auto& lp : profiles) set.locations.push_back(lp.solar.location_id);
  std::sort(set.locations.begin(), set.locations.end());
  require(std::adjacent_find(set.locations.begin(), set.locations.end()) == set.locations.end(),
          "build_daily_scenarios: duplicate location id");

  const int days = static_cast<int>(slots) / meteo::kSlotsPerDay;
  for (int d = 0; d < days; ++d) {
    Scenario s;
    s.id = d;
    for (const auto& lp : profiles) {
      auto day_slice = [&](const std::vector<double>& v) {
        return std::vector<double>(v.begin() + d * meteo::kSlotsPerDay,
                                   v.begin() + (d + 1) * meteo::kSlotsPerDay);
      };
      s.solar[lp.solar.location_id] = day_slice(lp.solar.per_unit);
      s.wind[lp.wind.location_id] = day_slice(lp.wind.per_unit);
    }
    set.scenarios.push_back(std::move(s));
    set.probabilities.push_back(1.0 / days);
  }
  set.validate();
  return set;
}

double scenario_distance(const Scenario& a, const Scenario& b) {
  if (a.solar.size() != b.solar.size() || a.wind.size() != b.wind.size())
    throw ValidationError("scenario_distance: location sets differ");

  double sum = 0.0;
  auto accumulate = [&sum](const std::map<std::string, std::vector<double>>& ma,
                           const std::map<std::string, std::vector<double>>& mb) {
    for (const auto& [loc, va] : ma) {
      auto it = mb.find(loc);
      if (it == mb.end()) throw ValidationError("scenario_distance: location " + loc + " missing");
      const auto& vb = it->second;
      if (va.size() != vb.size()) throw ValidationError("scenario_distance: slot counts differ");
      for (std::size_t k = 0; k < va.size(); ++k) {
        const double d = va[k] - vb[k];
        sum += d * d;
      }
    }
  };
  accumulate(a.solar, b.solar);
  accumulate(a.wind, b.wind);
  return std::sqrt(sum);
}

namespace {

std::vector<std::vector<double>> distance_matrix(const ScenarioSet& set) {
  const std::size_t n = set.scenarios.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist[i][j] = dist[j][i] = scenario_distance(set.scenarios[i], set.scenarios[j]);
  return dist;
}

} // namespace

ScenarioSet reduce_scenarios(const ScenarioSet& set, int target_count) {
  set.validate();
  const int n = static_cast<int>(set.scenarios.size());
  require(target_count >= 1 && target_count <= n,
          "reduce_scenarios: target count out of range [1, " + std::to_string(n) + "]");

  if (target_count == n) return set;

  // Scenarios are iterated in ascending id order so that strict comparisons
  // break ties toward the lowest id.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return set.scenarios[a].id < set.scenarios[b].id; });

  const auto dist = distance_matrix(set);
  std::vector<bool> kept(n, false);
  std::vector<double> nearest_kept(n, std::numeric_limits<double>::infinity());

  for (int round = 0; round < target_count; ++round) {
    int best = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (int u : order) {
      if (kept[u]) continue;
      double obj = 0.0;
      for (int k : order) {
        if (kept[k] || k == u) continue;
        obj += set.probabilities[k] * std::min(nearest_kept[k], dist[k][u]);
      }
      if (obj < best_obj) {
        best_obj = obj;
        best = u;
      }
    }
    kept[best] = true;
    for (int k = 0; k < n; ++k) nearest_kept[k] = std::min(nearest_kept[k], dist[k][best]);
  }

  // Redistribute each dropped scenario's probability to its nearest kept
  // scenario, ties toward the lowest kept id.
  std::vector<double> new_pi(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (kept[i]) new_pi[i] = set.probabilities[i];
  for (int k : order) {
    if (kept[k]) continue;
    int target = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int u : order) {
      if (!kept[u]) continue;
      if (dist[k][u] < best_d) {
        best_d = dist[k][u];
        target = u;
      }
    }
    new_pi[target] += set.probabilities[k];
  }

  ScenarioSet out;
  out.locations = set.locations;
  for (int i : order) {
    if (!kept[i]) continue;
    out.scenarios.push_back(set.scenarios[i]);
    out.probabilities.push_back(new_pi[i]);
  }
  out.validate();
  return out;
}

double reduction_error(const ScenarioSet& original, const std::vector<int>& kept_ids) {
  original.validate();
  std::set<int> kept(kept_ids.begin(), kept_ids.end());
  for (int id : kept)
    require(original.find(id) != nullptr, "reduction_error: unknown scenario id " + std::to_string(id));
  require(!kept.empty(), "reduction_error: kept set is empty");

  double obj = 0.0;
  for (std::size_t k = 0; k < original.scenarios.size(); ++k) {
    const auto& s = original.scenarios[k];
    if (kept.count(s.id)) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& other : original.scenarios) {
      if (!kept.count(other.id)) continue;
      best = std::min(best, scenario_distance(s, other));
    }
    obj += original.probabilities[k] * best;
  }
  return obj;
}

std::string to_json_string(const ScenarioSet& set) {
  nlohmann::json j;
  j["locations"] = set.locations;
  j["scenarios"] = nlohmann::json::array();
  for (std::size_t k = 0; k < set.scenarios.size(); ++k) {
    const auto& s = set.scenarios[k];
    nlohmann::json js;
    js["id"] = s.id;
    js["pi"] = set.probabilities[k];
    js["solar"] = s.solar;
    js["wind"] = s.wind;
    j["scenarios"].push_back(std::move(js));
  }
  return j.dump(2) + "\n";
}

ScenarioSet from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scenario set: invalid JSON: ") + e.what());
  }
  ScenarioSet set;
  try {
    set.locations = j.at("locations").get<std::vector<std::string>>();
    for (const auto& js : j.at("scenarios")) {
      Scenario s;
      s.id = js.at("id").get<int>();
      s.solar = js.at("solar").get<std::map<std::string, std::vector<double>>>();
      s.wind = js.at("wind").get<std::map<std::string, std::vector<double>>>();
      set.scenarios.push_back(std::move(s));
      set.probabilities.push_back(js.at("pi").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scenario set: missing or malformed field: ") + e.what());
  }
  set.validate();
  return set;
}

void save_scenario_set(const std::string& path, const ScenarioSet& set) {
  io::write_text_file(path, to_json_string(set));
}

ScenarioSet load_scenario_set(const std::string& path) {
  return from_json_string(io::read_text_file(path));
}

} // namespace gridplan::scenarios
