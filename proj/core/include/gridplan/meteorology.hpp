#ifndef GRIDPLAN_METEOROLOGY_HPP
#define GRIDPLAN_METEOROLOGY_HPP

#include <optional>
#include <string>
#include <vector>

namespace gridplan::meteo {

inline constexpr int kSlotsPerDay = 24;

enum class Technology { solar, wind };

const char* technology_name(Technology t);

/// Hourly observations for one location, day-major (day 0 hour 0..23, day 1 ...).
/// Sites without an irradiance sensor leave `irradiance` empty (wind-only site).
struct WeatherSeries {
  std::string location_id;
  int day_count = 0;
  std::optional<std::vector<double>> irradiance; // W/m^2
  std::vector<double> wind_speed;                // m/s

  int slot_count() const { return day_count * kSlotsPerDay; }
  void validate() const;
};

struct SolarModel {
  double array_area = 0;              // m^2
  double module_efficiency = 0;       // (0,1]
  double packing_factor = 0;          // (0,1]
  double conditioning_efficiency = 0; // (0,1]
  double reference_irradiance = 1000; // W/m^2, rating point for per-unit output

  void validate() const;
};

struct WindModel {
  double air_density = 0;             // kg/m^3
  double performance_coefficient = 0; // (0, 0.593]
  double swept_area = 0;              // m^2
  double cut_in = 0;                  // m/s
  double cut_out = 0;                 // m/s
  double rated_speed = 0;             // m/s, output is capped at this speed

  void validate() const;
};

/// Generation per kW of installed capacity; every value in [0,1].
struct GenerationProfile {
  std::string location_id;
  Technology technology = Technology::solar;
  std::vector<double> per_unit;
};

/// Instantaneous module output in W for a given irradiance.
double solar_power(double irradiance_wm2, const SolarModel& model);

/// Turbine output in W: zero outside [cut_in, cut_out], cubic in between,
/// capped at the rated-speed output.
double wind_power(double speed_ms, const WindModel& model);

struct LocationProfiles {
  GenerationProfile solar;
  GenerationProfile wind;
};

/// Normalize a weather series into per-unit solar and wind profiles. Solar is
/// rated at `reference_irradiance`, wind at `rated_speed`; both clamped to [0,1].
/// A wind-only series yields an all-zero solar profile.
LocationProfiles per_unit_profile(const WeatherSeries& series, const SolarModel& solar,
                                  const WindModel& wind);

/// Mean per-unit output over the whole profile.
double capacity_factor(const GenerationProfile& profile);

/// Sample correlation coefficient. Throws DegenerateSeriesError when either
/// series has zero variance; never silently returns a conventional value.
double correlation(const std::vector<double>& x, const std::vector<double>& y);

/// Pairwise correlations of equally long profiles: symmetric, unit diagonal.
std::vector<std::vector<double>> correlation_matrix(const std::vector<GenerationProfile>& profiles);

/// CSV with header `day,hour,irradiance_wm2,wind_speed_ms` (irradiance column
/// optional), hour in 0..23, days in ascending blocks of 24 rows.
WeatherSeries load_weather_csv(const std::string& path, const std::string& location_id);

std::string capacity_factors_csv(const std::vector<GenerationProfile>& profiles);
std::string correlation_matrix_csv(const std::vector<std::string>& location_ids,
                                   const std::vector<std::vector<double>>& matrix);

} // namespace gridplan::meteo

#endif
