#include "gridplan/meteorology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gridplan/errors.hpp"
#include "gridplan/io.hpp"

namespace gridplan::meteo {

namespace {

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

} // namespace

const char* technology_name(Technology t) {
  return t == Technology::solar ? "solar" : "wind";
}

void WeatherSeries::validate() const {
  require(day_count > 0, "weather series " + location_id + ": day_count must be positive");
  const std::size_t n = static_cast<std::size_t>(slot_count());
  require(wind_speed.size() == n,
          "weather series " + location_id + ": wind series length != day_count*24");
  if (irradiance) {
    require(irradiance->size() == n,
            "weather series " + location_id + ": irradiance length != day_count*24");
    for (double v : *irradiance)
      require(finite_nonneg(v), "weather series " + location_id + ": irradiance must be finite and >= 0");
  }
  for (double v : wind_speed)
    require(finite_nonneg(v), "weather series " + location_id + ": wind speed must be finite and >= 0");
}

void SolarModel::validate() const {
  require(array_area > 0, "solar model: array_area must be positive");
  require(module_efficiency > 0 && module_efficiency <= 1, "solar model: module_efficiency in (0,1]");
  require(packing_factor > 0 && packing_factor <= 1, "solar model: packing_factor in (0,1]");
  require(conditioning_efficiency > 0 && conditioning_efficiency <= 1,
          "solar model: conditioning_efficiency in (0,1]");
  require(reference_irradiance > 0, "solar model: reference_irradiance must be positive");
}

void WindModel::validate() const {
  require(air_density > 0, "wind model: air_density must be positive");
  require(performance_coefficient > 0 && performance_coefficient <= 0.593,
          "wind model: performance_coefficient in (0, 0.593]");
  require(swept_area > 0, "wind model: swept_area must be positive");
  require(cut_in > 0, "wind model: cut_in must be positive");
  require(cut_in < rated_speed, "wind model: cut_in must be below rated_speed");
  require(rated_speed <= cut_out, "wind model: rated_speed must not exceed cut_out");
}

double solar_power(double irradiance_wm2, const SolarModel& model) {
  if (!finite_nonneg(irradiance_wm2))
    throw ValidationError("solar_power: irradiance must be finite and >= 0");
  return model.array_area * model.module_efficiency * model.packing_factor *
         model.conditioning_efficiency * irradiance_wm2;
}

double wind_power(double speed_ms, const WindModel& model) {
  if (!finite_nonneg(speed_ms))
    throw ValidationError("wind_power: speed must be finite and >= 0");
  if (speed_ms < model.cut_in || speed_ms > model.cut_out) return 0.0;
  const double s = std::min(speed_ms, model.rated_speed);
  return 0.5 * model.air_density * model.performance_coefficient * model.swept_area * s * s * s;
}

LocationProfiles per_unit_profile(const WeatherSeries& series, const SolarModel& solar,
                                  const WindModel& wind) {
  series.validate();
  solar.validate();
  wind.validate();

  const std::size_t n = static_cast<std::size_t>(series.slot_count());
  LocationProfiles out;
  out.solar = {series.location_id, Technology::solar, std::vector<double>(n, 0.0)};
  out.wind = {series.location_id, Technology::wind, std::vector<double>(n, 0.0)};

  const double solar_rating = solar_power(solar.reference_irradiance, solar);
  const double wind_rating = wind_power(wind.rated_speed, wind);

  if (series.irradiance) {
    for (std::size_t k = 0; k < n; ++k) {
      double pu = solar_power((*series.irradiance)[k], solar) / solar_rating;
      out.solar.per_unit[k] = std::clamp(pu, 0.0, 1.0);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    double pu = wind_power(series.wind_speed[k], wind) / wind_rating;
    out.wind.per_unit[k] = std::clamp(pu, 0.0, 1.0);
  }
  return out;
}

double capacity_factor(const GenerationProfile& profile) {
  if (profile.per_unit.empty())
    throw ValidationError("capacity_factor: empty profile for " + profile.location_id);
  double sum = std::accumulate(profile.per_unit.begin(), profile.per_unit.end(), 0.0);
  return sum / static_cast<double>(profile.per_unit.size());
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("correlation: series lengths differ");
  if (x.size() < 2) throw ValidationError("correlation: need at least 2 samples");

  // A constant series must be caught by value, not by computed variance: the
  // mean's round-off leaves a nonzero residue that would mask the degeneracy.
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y))
    throw DegenerateSeriesError("correlation: constant series has no defined correlation");

  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DegenerateSeriesError("correlation: constant series has no defined correlation");
  return sxy / (std::sqrt(sxx) * std::sqrt(syy));
}

std::vector<std::vector<double>> correlation_matrix(const std::vector<GenerationProfile>& profiles) {
  const std::size_t m = profiles.size();
  if (m == 0) throw ValidationError("correlation_matrix: no profiles");
  for (const auto& p : profiles) {
    if (p.per_unit.size() != profiles.front().per_unit.size())
      throw ValidationError("correlation_matrix: profile lengths differ (" + p.location_id + ")");
  }

  std::vector<std::vector<double>> out(m, std::vector<double>(m, 1.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double c;
      try {
        c = correlation(profiles[i].per_unit, profiles[j].per_unit);
      } catch (const DegenerateSeriesError&) {
        // identify which side is constant
        auto constant = [](const std::vector<double>& v) {
          return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
        };
        const std::string& who =
            constant(profiles[i].per_unit) ? profiles[i].location_id : profiles[j].location_id;
        throw DegenerateSeriesError("correlation_matrix: constant profile at location " + who);
      }
      out[i][j] = out[j][i] = c;
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& s, const std::string& path, int line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ValidationError(path + ":" + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
}

} // namespace

WeatherSeries load_weather_csv(const std::string& path, const std::string& location_id) {
  std::istringstream in(io::read_text_file(path));
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
  ++line_no;
  auto header = split_csv_line(line);

  bool has_irradiance;
  if (header == std::vector<std::string>{"day", "hour", "irradiance_wm2", "wind_speed_ms"}) {
    has_irradiance = true;
  } else if (header == std::vector<std::string>{"day", "hour", "wind_speed_ms"}) {
    has_irradiance = false;
  } else {
    throw ValidationError(path + ":1: expected header day,hour,irradiance_wm2,wind_speed_ms "
                                 "(irradiance column optional)");
  }

  WeatherSeries series;
  series.location_id = location_id;
  if (has_irradiance) series.irradiance.emplace();

  long long prev_day = -1;
  int expected_hour = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));

    long long day = static_cast<long long>(parse_number(fields[0], path, line_no));
    int hour = static_cast<int>(parse_number(fields[1], path, line_no));
    if (hour != expected_hour)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected hour " +
                            std::to_string(expected_hour) + ", got " + std::to_string(hour));
    if (expected_hour == 0) {
      if (prev_day >= 0 && day <= prev_day)
        throw ValidationError(path + ":" + std::to_string(line_no) + ": days must be ascending");
      prev_day = day;
    } else if (day != prev_day) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": day changed mid-block");
    }
    expected_hour = (expected_hour + 1) % kSlotsPerDay;

    std::size_t col = 2;
    if (has_irradiance) series.irradiance->push_back(parse_number(fields[col++], path, line_no));
    series.wind_speed.push_back(parse_number(fields[col], path, line_no));
  }

  if (expected_hour != 0)
    throw ValidationError(path + ": truncated final day (ends mid-block at hour " +
                          std::to_string(expected_hour - 1) + ")");
  series.day_count = static_cast<int>(series.wind_speed.size()) / kSlotsPerDay;
  series.validate();
  return series;
}

std::string capacity_factors_csv(const std::vector<GenerationProfile>& profiles) {
  std::string out = "location,technology,capacity_factor\n";
  for (const auto& p : profiles) {
    out += p.location_id;
    out += ',';
    out += technology_name(p.technology);
    out += ',';
    out += io::format_double(capacity_factor(p));
    out += '\n';
  }
  return out;
}

std::string correlation_matrix_csv(const std::vector<std::string>& location_ids,
                                   const std::vector<std::vector<double>>& matrix) {
  if (location_ids.size() != matrix.size())
    throw ValidationError("correlation_matrix_csv: id/matrix size mismatch");
  std::string out = "location";
  for (const auto& id : location_ids) {
    out += ',';
    out += id;
  }
  out += '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    if (matrix[i].size() != location_ids.size())
      throw ValidationError("correlation_matrix_csv: matrix is not square");
    out += location_ids[i];
    for (double v : matrix[i]) {
      out += ',';
      out += io::format_double(v);
    }
    out += '\n';
  }
  return out;
}

} // namespace gridplan::meteo
