#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridplan/bargaining.hpp"
#include "gridplan/errors.hpp"
#include "gridplan/io.hpp"
#include "gridplan/meteorology.hpp"
#include "gridplan/planning.hpp"
#include "gridplan/scenarios.hpp"

namespace fs = std::filesystem;
using namespace gridplan;

namespace {

struct Models {
  meteo::SolarModel solar;
  meteo::WindModel wind;
};

Models load_models(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("models file " + path + ": invalid JSON: " + e.what());
  }
  Models m;
  try {
    const auto& js = j.at("solar");
    m.solar.array_area = js.at("array_area").get<double>();
    m.solar.module_efficiency = js.at("module_efficiency").get<double>();
    m.solar.packing_factor = js.at("packing_factor").get<double>();
    m.solar.conditioning_efficiency = js.at("conditioning_efficiency").get<double>();
    if (js.contains("reference_irradiance"))
      m.solar.reference_irradiance = js.at("reference_irradiance").get<double>();
    const auto& jw = j.at("wind");
    m.wind.air_density = jw.at("air_density").get<double>();
    m.wind.performance_coefficient = jw.at("performance_coefficient").get<double>();
    m.wind.swept_area = jw.at("swept_area").get<double>();
    m.wind.cut_in = jw.at("cut_in").get<double>();
    m.wind.cut_out = jw.at("cut_out").get<double>();
    m.wind.rated_speed = jw.at("rated_speed").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("models file " + path + ": missing or malformed field: " + e.what());
  }
  m.solar.validate();
  m.wind.validate();
  return m;
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("GRIDPLAN_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
      throw ValidationError(std::string("GRIDPLAN_THREADS is not a number: ") + env);
    }
  }
  return 0; // hardware concurrency
}

std::string location_of(const std::string& weather_path) {
  return fs::path(weather_path).stem().string();
}

void emit(const fs::path& out_dir, const std::string& name, const std::string& content) {
  fs::create_directories(out_dir);
  const fs::path target = out_dir / name;
  io::write_text_file(target.string(), content);
  std::cout << "wrote " << target.string() << "\n";
}

std::vector<meteo::LocationProfiles> load_profiles(const std::vector<std::string>& weather_files,
                                                   const Models& models, io::Manifest& manifest) {
  std::vector<meteo::LocationProfiles> profiles;
  for (const auto& file : weather_files) {
    manifest.record_input(file);
    const auto series = meteo::load_weather_csv(file, location_of(file));
    profiles.push_back(meteo::per_unit_profile(series, models.solar, models.wind));
  }
  return profiles;
}

struct AnalyzeArgs {
  std::vector<std::string> weather_files;
  std::string models_path;
  std::string out_dir;
};

void cmd_analyze(const AnalyzeArgs& args) {
  io::Manifest manifest;
  manifest.params["command"] = "analyze";
  manifest.record_input(args.models_path);
  const Models models = load_models(args.models_path);
  const auto profiles = load_profiles(args.weather_files, models, manifest);

  std::vector<meteo::GenerationProfile> flat;
  std::vector<std::string> ids;
  std::vector<meteo::GenerationProfile> solar, wind;
  for (const auto& p : profiles) {
    flat.push_back(p.solar);
    flat.push_back(p.wind);
    ids.push_back(p.solar.location_id);
    solar.push_back(p.solar);
    wind.push_back(p.wind);
  }

  emit(args.out_dir, "capacity_factors.csv", meteo::capacity_factors_csv(flat));
  emit(args.out_dir, "correlation_solar.csv",
       meteo::correlation_matrix_csv(ids, meteo::correlation_matrix(solar)));
  emit(args.out_dir, "correlation_wind.csv",
       meteo::correlation_matrix_csv(ids, meteo::correlation_matrix(wind)));

  // Cross matrix: row location's solar series against column location's wind.
  std::vector<std::vector<double>> cross(ids.size(), std::vector<double>(ids.size(), 0.0));
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j)
      cross[i][j] = meteo::correlation(solar[i].per_unit, wind[j].per_unit);
  emit(args.out_dir, "correlation_solar_wind.csv", meteo::correlation_matrix_csv(ids, cross));
  emit(args.out_dir, "analyze_manifest.json", manifest.to_json_string());
}

struct ScenarioArgs {
  std::vector<std::string> weather_files;
  std::string models_path;
  std::string out_dir;
  int target_count = 10;
};

void cmd_scenarios(const ScenarioArgs& args) {
  io::Manifest manifest;
  manifest.params["command"] = "scenarios";
  manifest.params["target_count"] = std::to_string(args.target_count);
  manifest.record_input(args.models_path);
  const Models models = load_models(args.models_path);
  const auto profiles = load_profiles(args.weather_files, models, manifest);

  const auto full = scenarios::build_daily_scenarios(profiles);
  const auto reduced = scenarios::reduce_scenarios(full, args.target_count);
  std::vector<int> kept;
  for (const auto& s : reduced.scenarios) kept.push_back(s.id);
  const double error = scenarios::reduction_error(full, kept);

  nlohmann::json j = nlohmann::json::parse(scenarios::to_json_string(reduced));
  j["manifest"] = nlohmann::json::parse(manifest.to_json_string());
  emit(args.out_dir, "scenarios.json", j.dump(2) + "\n");
  std::cout << "kept " << reduced.scenarios.size() << " of " << full.scenarios.size()
            << " scenarios, reduction error " << io::format_double(error) << "\n";
}

struct PlanArgs {
  std::string system_path;
  std::string scenarios_path;
  std::string mode = "coop";
  std::string out_dir;
  double tol = 1e-6;
  int max_iter = 200000;
  int enum_limit = 16;
  int threads = 0;
};

void cmd_plan(const PlanArgs& args) {
  io::Manifest manifest;
  manifest.params["command"] = "plan";
  manifest.params["mode"] = args.mode;
  manifest.params["system"] = args.system_path;
  manifest.params["scenarios"] = args.scenarios_path;
  manifest.params["tol"] = io::format_double(args.tol);
  manifest.params["max_iter"] = std::to_string(args.max_iter);
  manifest.params["enum_limit"] = std::to_string(args.enum_limit);
  manifest.record_input(args.system_path);
  manifest.record_input(args.scenarios_path);

  const auto system = planning::load_system_spec(args.system_path);
  const std::string scen_text = io::read_text_file(args.scenarios_path);
  const auto scen = scenarios::from_json_string(scen_text);
  // Refuse stale scenario artifacts: re-check the weather hashes they embed.
  const auto j_scen = nlohmann::json::parse(scen_text);
  if (j_scen.contains("manifest"))
    io::Manifest::from_json_string(j_scen.at("manifest").dump()).verify_inputs_unchanged();

  const double theta = planning::discount_coefficient(system.horizon.days,
                                                      system.horizon.daily_rate);
  manifest.params["theta"] = io::format_double(theta);

  planning::PlanOptions opts;
  opts.solver.tol = args.tol;
  opts.solver.max_iter = args.max_iter;
  opts.enum_limit = args.enum_limit;
  opts.threads = resolve_threads(args.threads);

  planning::PlanSolution plan;
  if (args.mode == "noncoop")
    plan = planning::solve_noncoop_system(system, scen, theta, opts);
  else if (args.mode == "coop")
    plan = planning::solve_iop(system, scen, theta, opts);
  else
    throw ValidationError("unknown mode " + args.mode + " (expected noncoop or coop)");

  emit(args.out_dir, "plan_" + args.mode + ".json",
       planning::plan_to_json_string(plan, args.mode, manifest));
  emit(args.out_dir, "plan_" + args.mode + "_capacities.csv", planning::capacities_csv(plan));
  emit(args.out_dir, "plan_" + args.mode + "_costs.csv", planning::costs_csv(plan));
  std::cout << "mode " << args.mode << ", total cost " << io::format_double(plan.total_cost)
            << ", max KKT residual " << io::format_double(plan.max_kkt_residual) << "\n";
}

struct PlanFile {
  std::string mode;
  std::vector<std::string> ids;
  std::vector<double> overall;
  std::vector<double> operational;
  double investment_total = 0;
  io::Manifest manifest;
};

PlanFile read_plan_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("plan file " + path + ": invalid JSON: " + e.what());
  }
  PlanFile pf;
  try {
    pf.mode = j.at("mode").get<std::string>();
    for (const auto& jm : j.at("microgrids")) {
      pf.ids.push_back(jm.at("id").get<std::string>());
      pf.overall.push_back(jm.at("overall_cost").get<double>());
      pf.operational.push_back(jm.at("operational_cost").get<double>());
      pf.investment_total += jm.at("investment_cost").get<double>();
    }
    pf.manifest = io::Manifest::from_json_string(j.at("manifest").dump());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("plan file " + path + ": missing or malformed field: " + e.what());
  }
  return pf;
}

struct BargainArgs {
  std::string noncoop_path;
  std::string coop_path;
  std::string out_dir;
};

void cmd_bargain(const BargainArgs& args) {
  const PlanFile non = read_plan_file(args.noncoop_path);
  const PlanFile coop = read_plan_file(args.coop_path);
  if (non.mode != "noncoop")
    throw ValidationError(args.noncoop_path + " is a " + non.mode + " plan, expected noncoop");
  if (coop.mode != "coop")
    throw ValidationError(args.coop_path + " is a " + coop.mode + " plan, expected coop");
  if (non.ids != coop.ids)
    throw ValidationError("plans cover different microgrids; rerun both modes on one config");

  const auto non_scen = non.manifest.params.find("scenarios");
  const auto coop_scen = coop.manifest.params.find("scenarios");
  if (non_scen == non.manifest.params.end() || coop_scen == coop.manifest.params.end())
    throw ManifestError("plan manifest lacks a scenario-file reference");
  if (non_scen->second != coop_scen->second)
    throw ManifestError("plans reference different scenario files: " + non_scen->second +
                        " vs " + coop_scen->second);
  io::Manifest::require_consistent(non.manifest, coop.manifest);
  non.manifest.verify_inputs_unchanged();
  coop.manifest.verify_inputs_unchanged();

  bargaining::BargainingInput input;
  input.ids = non.ids;
  input.noncoop_cost = non.overall;
  input.coop_operational = coop.operational;
  input.total_investment = coop.investment_total;

  const auto outcome = bargaining::solve_csp_closed_form(input);
  const auto check = bargaining::solve_csp_numeric(input);
  for (std::size_t i = 0; i < input.size(); ++i)
    if (std::abs(outcome.shares[i] - check.shares[i]) >
        1e-6 * std::max(1.0, std::abs(outcome.shares[i])))
      throw InconsistencyError("numeric cost-share cross-check diverged for " + input.ids[i]);

  io::Manifest manifest;
  manifest.params["command"] = "bargain";
  manifest.record_input(args.noncoop_path);
  manifest.record_input(args.coop_path);

  emit(args.out_dir, "bargaining.json",
       bargaining::bargaining_to_json_string(outcome, input, manifest));
  emit(args.out_dir, "cost_shares.csv", bargaining::cost_shares_csv(outcome, input));

  double noncoop_total = 0;
  for (double v : input.noncoop_cost) noncoop_total += v;
  const double pct = noncoop_total != 0 ? 100.0 * input.total_surplus() / noncoop_total : 0.0;
  std::cout << "system overall cost reduction " << io::format_double(pct) << "%\n";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"renewable microgrid planning toolkit"};
  app.require_subcommand(1);

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand(
      "analyze", "capacity factors and correlation matrices from weather series");
  analyze->add_option("weather", aa.weather_files, "weather CSV, one per location")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--models", aa.models_path, "generation model parameters JSON")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--out", aa.out_dir, "output directory")->required();
  analyze->callback([&] { cmd_analyze(aa); });

  ScenarioArgs sa;
  auto* scen = app.add_subcommand(
      "scenarios", "build daily joint scenarios and reduce them to a representative set");
  scen->add_option("weather", sa.weather_files, "weather CSV, one per location")
      ->required()
      ->check(CLI::ExistingFile);
  scen->add_option("--models", sa.models_path, "generation model parameters JSON")
      ->required()
      ->check(CLI::ExistingFile);
  scen->add_option("--out", sa.out_dir, "output directory")->required();
  scen->add_option("--scenarios", sa.target_count, "number of scenarios to keep")
      ->capture_default_str();
  scen->callback([&] { cmd_scenarios(sa); });

  PlanArgs pa;
  auto* plan = app.add_subcommand("plan", "solve the investment and operation problem");
  plan->add_option("system", pa.system_path, "system configuration JSON")
      ->required()
      ->check(CLI::ExistingFile);
  plan->add_option("scenario_file", pa.scenarios_path, "scenario set JSON")
      ->required()
      ->check(CLI::ExistingFile);
  plan->add_option("--mode", pa.mode, "noncoop or coop")->capture_default_str();
  plan->add_option("--out", pa.out_dir, "output directory")->required();
  plan->add_option("--tol", pa.tol, "KKT acceptance tolerance")->capture_default_str();
  plan->add_option("--max-iter", pa.max_iter, "solver iteration limit")->capture_default_str();
  plan->add_option("--enum-limit", pa.enum_limit, "max microgrids for install enumeration")
      ->capture_default_str();
  plan->add_option("--threads", pa.threads, "worker threads (0 = hardware)")
      ->capture_default_str();
  plan->callback([&] { cmd_plan(pa); });

  BargainArgs ba;
  auto* bargain = app.add_subcommand("bargain", "split the cooperative investment cost");
  bargain->add_option("noncoop_plan", ba.noncoop_path, "plan_noncoop.json")
      ->required()
      ->check(CLI::ExistingFile);
  bargain->add_option("coop_plan", ba.coop_path, "plan_coop.json")
      ->required()
      ->check(CLI::ExistingFile);
  bargain->add_option("--out", ba.out_dir, "output directory")->required();
  bargain->callback([&] { cmd_bargain(ba); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ManifestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const InconsistencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const PlanningError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
