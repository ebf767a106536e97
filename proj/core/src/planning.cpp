#include "gridplan/planning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "gridplan/errors.hpp"

namespace gridplan::planning {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

void check_profile(const std::vector<double>& v, std::size_t slots, const std::string& what,
                   double min_value = 0.0) {
  require(v.size() == slots, what + ": expected " + std::to_string(slots) + " values, got " +
                                 std::to_string(v.size()));
  for (double x : v)
    require(std::isfinite(x) && x >= min_value, what + ": values must be finite and >= " +
                                                    io::format_double(min_value));
}

void check_nonneg(double v, const std::string& what) {
  require(std::isfinite(v) && v >= 0, what + " must be finite and >= 0");
}

} // namespace

void StorageSpec::validate(const std::string& context) const {
  check_nonneg(capacity, context + ": storage capacity");
  if (!present()) return;
  require(dod > 0 && dod <= 1, context + ": depth of discharge must lie in (0,1]");
  require(charge_eff > 0 && charge_eff <= 1, context + ": charge efficiency must lie in (0,1]");
  require(discharge_eff > 0 && discharge_eff <= 1,
          context + ": discharge efficiency must lie in (0,1]");
  check_nonneg(charge_cap, context + ": charge cap");
  check_nonneg(discharge_cap, context + ": discharge cap");
  check_nonneg(wear_cost, context + ": wear cost");
  const double tol = 1e-9 * std::max(1.0, capacity);
  require(start_level() >= floor_level() - tol && start_level() <= capacity + tol,
          context + ": initial level must lie between the floor and the capacity");
}

void UserSpec::validate(const std::string& context, std::size_t slots) const {
  require(!id.empty(), context + ": user id must not be empty");
  check_nonneg(daily_total, context + ": daily total");
  check_nonneg(discomfort_coeff, context + ": discomfort coefficient");
  check_profile(min_load, slots, context + ": min_load");
  check_profile(max_load, slots, context + ": max_load");
  check_profile(preferred_load, slots, context + ": preferred_load");
  double lo = 0, hi = 0;
  for (std::size_t t = 0; t < slots; ++t) {
    require(min_load[t] <= max_load[t],
            context + ": min_load exceeds max_load in slot " + std::to_string(t));
    lo += min_load[t];
    hi += max_load[t];
  }
  const double tol = 1e-9 * std::max(1.0, std::abs(daily_total));
  require(daily_total >= lo - tol && daily_total <= hi + tol,
          context + ": daily total " + io::format_double(daily_total) +
              " falls outside the reachable range [" + io::format_double(lo) + ", " +
              io::format_double(hi) + "]");
}

void MicrogridSpec::validate() const {
  require(!id.empty(), "microgrid id must not be empty");
  const std::string ctx = "microgrid " + id;
  require(!location_id.empty(), ctx + ": location_id must not be empty");
  check_nonneg(fixed_cost, ctx + ": fixed cost");
  check_nonneg(solar_unit_cost, ctx + ": solar unit cost");
  check_nonneg(wind_unit_cost, ctx + ": wind unit cost");
  check_nonneg(solar_cap, ctx + ": solar cap");
  check_nonneg(wind_cap, ctx + ": wind cap");
  check_nonneg(grid_cap, ctx + ": grid cap");
  require(!inelastic_load.empty(), ctx + ": inelastic_load must not be empty");
  check_profile(inelastic_load, inelastic_load.size(), ctx + ": inelastic_load");
  storage.validate(ctx);
  std::vector<std::string> seen;
  for (const auto& u : users) {
    u.validate(ctx + ", user " + u.id, slot_count());
    require(std::find(seen.begin(), seen.end(), u.id) == seen.end(),
            ctx + ": duplicate user id " + u.id);
    seen.push_back(u.id);
  }
}

void SystemSpec::validate() const {
  require(!microgrids.empty(), "system: needs at least one microgrid");
  const std::size_t m = microgrids.size();
  require(!tariff.empty(), "system: tariff must not be empty");
  check_profile(tariff, tariff.size(), "system: tariff");
  std::vector<std::string> ids;
  for (const auto& mg : microgrids) {
    mg.validate();
    require(mg.slot_count() == tariff.size(),
            "microgrid " + mg.id + ": slot count differs from tariff length");
    require(std::find(ids.begin(), ids.end(), mg.id) == ids.end(),
            "system: duplicate microgrid id " + mg.id);
    ids.push_back(mg.id);
  }
  require(distribution_eff.size() == m, "system: distribution_eff must be MxM");
  for (std::size_t i = 0; i < m; ++i) {
    require(distribution_eff[i].size() == m, "system: distribution_eff must be MxM");
    for (std::size_t j = 0; j < m; ++j) {
      const double v = distribution_eff[i][j];
      require(std::isfinite(v) && v > 0 && v <= 1,
              "system: distribution_eff entries must lie in (0,1]");
    }
    require(std::abs(distribution_eff[i][i] - 1.0) <= 1e-12,
            "system: distribution_eff diagonal must be 1");
  }
  require(horizon.days >= 1, "system: horizon days must be >= 1");
  require(std::isfinite(horizon.daily_rate) && horizon.daily_rate >= 0,
          "system: daily rate must be finite and >= 0");
}

int SystemSpec::index_of(const std::string& microgrid_id) const {
  for (std::size_t i = 0; i < microgrids.size(); ++i)
    if (microgrids[i].id == microgrid_id) return static_cast<int>(i);
  return -1;
}

double discount_coefficient(int days, double daily_rate) {
  require(days >= 1, "horizon days must be >= 1");
  require(std::isfinite(daily_rate) && daily_rate >= 0, "daily rate must be finite and >= 0");
  if (daily_rate == 0) return static_cast<double>(days);
  return (1.0 - std::pow(1.0 + daily_rate, -days)) / daily_rate;
}

double operational_cost(const Schedule& schedule, const MicrogridSpec& spec,
                        const std::vector<double>& tariff) {
  const std::size_t slots = spec.slot_count();
  require(tariff.size() == slots, "operational cost: tariff length mismatch");
  require(schedule.grid_draw.size() == slots, "operational cost: grid draw length mismatch");
  double cost = 0;
  for (std::size_t t = 0; t < slots; ++t) cost += tariff[t] * schedule.grid_draw[t];
  if (spec.storage.present()) {
    require(schedule.charge.size() == slots && schedule.discharge.size() == slots,
            "operational cost: storage schedule length mismatch");
    for (std::size_t t = 0; t < slots; ++t)
      cost += spec.storage.wear_cost * (schedule.charge[t] + schedule.discharge[t]);
  }
  for (const auto& user : spec.users) {
    auto it = schedule.elastic.find(user.id);
    require(it != schedule.elastic.end(), "operational cost: missing elastic schedule for user " +
                                              user.id);
    require(it->second.size() == slots, "operational cost: elastic length mismatch for user " +
                                            user.id);
    for (std::size_t t = 0; t < slots; ++t) {
      const double dev = it->second[t] - user.preferred_load[t];
      cost += user.discomfort_coeff * dev * dev;
    }
  }
  return cost;
}

double expected_operational_cost(const std::vector<double>& scenario_costs,
                                 const std::vector<double>& probabilities) {
  require(scenario_costs.size() == probabilities.size(),
          "expected cost: scenario/probability count mismatch");
  require(!scenario_costs.empty(), "expected cost: no scenarios");
  double sum_p = 0, cost = 0;
  for (std::size_t w = 0; w < probabilities.size(); ++w) {
    require(std::isfinite(scenario_costs[w]), "expected cost: non-finite scenario cost");
    require(std::isfinite(probabilities[w]) && probabilities[w] >= 0,
            "expected cost: probabilities must be >= 0");
    sum_p += probabilities[w];
    cost += probabilities[w] * scenario_costs[w];
  }
  require(std::abs(sum_p - 1.0) <= 1e-9, "expected cost: probabilities must sum to 1");
  return cost;
}

double investment_cost(int install, double solar_capacity, double wind_capacity,
                       const MicrogridSpec& spec) {
  require(install == 0 || install == 1, "investment cost: install must be 0 or 1");
  const double tol_s = 1e-9 * std::max(1.0, spec.solar_cap);
  const double tol_w = 1e-9 * std::max(1.0, spec.wind_cap);
  require(solar_capacity >= -tol_s && solar_capacity <= spec.solar_cap + tol_s,
          "investment cost: solar capacity outside [0, cap] for microgrid " + spec.id);
  require(wind_capacity >= -tol_w && wind_capacity <= spec.wind_cap + tol_w,
          "investment cost: wind capacity outside [0, cap] for microgrid " + spec.id);
  if (install == 0) return 0;
  return spec.fixed_cost + spec.solar_unit_cost * solar_capacity +
         spec.wind_unit_cost * wind_capacity;
}

namespace {

// Variable indices for one (microgrid, scenario) block. e is slot-major per
// installed source: e[src_pos * T + t].
struct BlockIndex {
  std::vector<int> e;
  std::vector<int> r, d, s;
  std::vector<std::vector<int>> x;
  std::vector<int> q;
};

struct ProblemLayout {
  int M = 0, T = 0, S = 0;
  std::vector<int> installed; // ascending microgrid indices with install=1
  std::vector<int> gs, gw;    // per microgrid, -1 without install
  std::vector<std::vector<BlockIndex>> block; // [scenario][microgrid]
  double fixed_offset = 0;    // sum of fixed costs of installed microgrids
  qp::QuadraticProgram qp;
};

const std::vector<double>& profile_at(const scenarios::Scenario& scen,
                                      const std::map<std::string, std::vector<double>>& side,
                                      const std::string& loc) {
  auto it = side.find(loc);
  require(it != side.end(), "scenario " + std::to_string(scen.id) + ": missing location " + loc);
  return it->second;
}

ProblemLayout assemble(const SystemSpec& sys, const scenarios::ScenarioSet& scen, double theta,
                       const std::vector<int>& install, bool local_supply_naming) {
  sys.validate();
  scen.validate();
  require(std::isfinite(theta) && theta > 0, "discount coefficient must be positive");
  const int M = static_cast<int>(sys.microgrids.size());
  const int T = static_cast<int>(sys.tariff.size());
  const int S = static_cast<int>(scen.scenarios.size());
  require(static_cast<int>(install.size()) == M, "install vector length mismatch");
  for (int zi : install) require(zi == 0 || zi == 1, "install entries must be 0 or 1");
  require(scen.slot_count() == T, "scenario slot count " + std::to_string(scen.slot_count()) +
                                      " does not match tariff length " + std::to_string(T));
  for (const auto& mg : sys.microgrids)
    require(std::find(scen.locations.begin(), scen.locations.end(), mg.location_id) !=
                scen.locations.end(),
            "scenario set lacks location " + mg.location_id + " needed by microgrid " + mg.id);

  ProblemLayout lay;
  lay.M = M;
  lay.T = T;
  lay.S = S;
  lay.gs.assign(M, -1);
  lay.gw.assign(M, -1);
  for (int i = 0; i < M; ++i)
    if (install[i]) lay.installed.push_back(i);

  qp::QpBuilder b;
  for (int i : lay.installed) {
    const auto& mg = sys.microgrids[i];
    lay.gs[i] = b.add_variable("G_s[" + mg.id + "]", 0, mg.solar_cap);
    b.add_linear_cost(lay.gs[i], mg.solar_unit_cost);
    lay.gw[i] = b.add_variable("G_w[" + mg.id + "]", 0, mg.wind_cap);
    b.add_linear_cost(lay.gw[i], mg.wind_unit_cost);
    lay.fixed_offset += mg.fixed_cost;
  }

  const int nsrc = static_cast<int>(lay.installed.size());
  lay.block.assign(S, std::vector<BlockIndex>(M));
  for (int w = 0; w < S; ++w) {
    const auto& sc = scen.scenarios[w];
    const double weight = theta * scen.probabilities[w];
    for (int i = 0; i < M; ++i) {
      const auto& mg = sys.microgrids[i];
      BlockIndex& blk = lay.block[w][i];
      const std::string tag = "[" + mg.id + "][w" + std::to_string(sc.id) + "]";

      blk.e.resize(static_cast<std::size_t>(nsrc) * T, -1);
      for (int sp = 0; sp < nsrc; ++sp) {
        const int j = lay.installed[sp];
        const auto& src = sys.microgrids[j];
        const auto& sol = profile_at(sc, sc.solar, src.location_id);
        const auto& wind = profile_at(sc, sc.wind, src.location_id);
        for (int t = 0; t < T; ++t) {
          const double avail_cap = src.solar_cap * sol[t] + src.wind_cap * wind[t];
          const std::string name =
              local_supply_naming && M == 1
                  ? "g" + tag + "[t" + std::to_string(t) + "]"
                  : "e[" + mg.id + "<-" + src.id + "][w" + std::to_string(sc.id) + "][t" +
                        std::to_string(t) + "]";
          blk.e[static_cast<std::size_t>(sp) * T + t] = b.add_variable(name, 0, avail_cap);
        }
      }

      if (mg.storage.present()) {
        blk.r.resize(T);
        blk.d.resize(T);
        blk.s.resize(T);
        for (int t = 0; t < T; ++t) {
          blk.r[t] = b.add_variable("r" + tag + "[t" + std::to_string(t) + "]", 0,
                                    mg.storage.charge_cap);
          b.add_linear_cost(blk.r[t], weight * mg.storage.wear_cost);
        }
        for (int t = 0; t < T; ++t) {
          blk.d[t] = b.add_variable("d" + tag + "[t" + std::to_string(t) + "]", 0,
                                    mg.storage.discharge_cap);
          b.add_linear_cost(blk.d[t], weight * mg.storage.wear_cost);
        }
        for (int t = 0; t < T; ++t)
          blk.s[t] = b.add_variable("s" + tag + "[t" + std::to_string(t) + "]",
                                    mg.storage.floor_level(), mg.storage.capacity);
      }

      blk.x.resize(mg.users.size());
      for (std::size_t u = 0; u < mg.users.size(); ++u) {
        const auto& user = mg.users[u];
        blk.x[u].resize(T);
        for (int t = 0; t < T; ++t) {
          blk.x[u][t] = b.add_variable("x[" + mg.id + "." + user.id + "][w" +
                                           std::to_string(sc.id) + "][t" + std::to_string(t) + "]",
                                       user.min_load[t], user.max_load[t]);
          b.set_quadratic(blk.x[u][t], weight * user.discomfort_coeff, user.preferred_load[t]);
        }
      }

      blk.q.resize(T);
      for (int t = 0; t < T; ++t) {
        blk.q[t] = b.add_variable("q" + tag + "[t" + std::to_string(t) + "]", 0, mg.grid_cap);
        b.add_linear_cost(blk.q[t], weight * sys.tariff[t]);
      }
    }
  }

  for (int w = 0; w < S; ++w) {
    const auto& sc = scen.scenarios[w];
    for (int i = 0; i < M; ++i) {
      const auto& mg = sys.microgrids[i];
      const BlockIndex& blk = lay.block[w][i];

      for (int t = 0; t < T; ++t) {
        std::vector<std::pair<int, double>> terms;
        for (int sp = 0; sp < nsrc; ++sp) {
          const int j = lay.installed[sp];
          terms.emplace_back(blk.e[static_cast<std::size_t>(sp) * T + t],
                             sys.distribution_eff[i][j]);
        }
        terms.emplace_back(blk.q[t], 1.0);
        if (mg.storage.present()) {
          terms.emplace_back(blk.d[t], 1.0);
          terms.emplace_back(blk.r[t], -1.0);
        }
        for (const auto& xu : blk.x) terms.emplace_back(xu[t], -1.0);
        b.add_equality(terms, mg.inelastic_load[t]);
      }

      if (mg.storage.present()) {
        const double s0 = mg.storage.start_level();
        for (int t = 0; t < T; ++t) {
          std::vector<std::pair<int, double>> terms = {
              {blk.s[t], 1.0},
              {blk.r[t], -mg.storage.charge_eff},
              {blk.d[t], 1.0 / mg.storage.discharge_eff}};
          if (t > 0) terms.emplace_back(blk.s[t - 1], -1.0);
          b.add_equality(terms, t == 0 ? s0 : 0.0);
        }
        b.add_equality({{blk.s[T - 1], 1.0}}, s0);
      }

      for (std::size_t u = 0; u < mg.users.size(); ++u) {
        std::vector<std::pair<int, double>> terms;
        for (int t = 0; t < T; ++t) terms.emplace_back(blk.x[u][t], 1.0);
        b.add_equality(terms, mg.users[u].daily_total);
      }
    }

    for (int sp = 0; sp < nsrc; ++sp) {
      const int i = lay.installed[sp];
      const auto& mg = sys.microgrids[i];
      const auto& sol = profile_at(sc, sc.solar, mg.location_id);
      const auto& wind = profile_at(sc, sc.wind, mg.location_id);
      for (int t = 0; t < T; ++t) {
        std::vector<std::pair<int, double>> terms;
        for (int j = 0; j < M; ++j)
          terms.emplace_back(lay.block[w][j].e[static_cast<std::size_t>(sp) * T + t], 1.0);
        terms.emplace_back(lay.gs[i], -sol[t]);
        terms.emplace_back(lay.gw[i], -wind[t]);
        b.add_inequality(terms, 0.0);
      }
    }
  }

  lay.qp = b.build();
  return lay;
}

SystemSpec wrap_single(const MicrogridSpec& spec, const std::vector<double>& tariff) {
  SystemSpec sys;
  sys.microgrids = {spec};
  sys.tariff = tariff;
  sys.distribution_eff = {{1.0}};
  sys.horizon = {1, 0.0};
  return sys;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_lock;
  auto drain = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> hold(error_lock);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int k = 0; k < workers; ++k) pool.emplace_back(drain);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct SubResult {
  bool solved = false;
  bool infeasible = false;
  double objective = 0; // qp objective plus fixed investment offset
  Eigen::VectorXd x;
  double kkt_residual = 0;
  std::string diagnostic;
};

SubResult solve_install_vector(const SystemSpec& sys, const scenarios::ScenarioSet& scen,
                               double theta, const std::vector<int>& install,
                               const PlanOptions& opts, bool local_naming) {
  ProblemLayout lay = assemble(sys, scen, theta, install, local_naming);
  qp::SolveOptions sopts = opts.solver;
  // headroom so post-solve clamping onto the boxes stays within the
  // user-facing tolerance
  sopts.tol = std::min(opts.solver.tol, 1e-8);
  qp::QpSolution sol = qp::solve_qp(lay.qp, sopts);

  SubResult res;
  if (sol.status == qp::SolveStatus::infeasible) {
    res.infeasible = true;
    res.diagnostic = sol.diagnostic.empty() ? "infeasible" : sol.diagnostic;
    return res;
  }
  res.kkt_residual = sol.kkt.max_residual();
  if (res.kkt_residual <= opts.solver.tol) {
    res.solved = true;
    res.objective = sol.objective + lay.fixed_offset;
    res.x = std::move(sol.x);
  } else {
    res.diagnostic = sol.diagnostic.empty() ? "solver did not reach the requested tolerance"
                                            : sol.diagnostic;
  }
  return res;
}

std::string install_label(const std::vector<int>& install) {
  std::string s = "z=[";
  for (std::size_t i = 0; i < install.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(install[i]);
  }
  return s + "]";
}

// Prefer `a` over `b`: lower objective; within the tie window fewer installs,
// then lexicographically smaller install vector.
bool prefer(double obj_a, const std::vector<int>& za, double obj_b, const std::vector<int>& zb,
            double tie_tol) {
  const double window = tie_tol * std::max(1.0, std::min(std::abs(obj_a), std::abs(obj_b)));
  if (obj_a < obj_b - window) return true;
  if (obj_b < obj_a - window) return false;
  int na = 0, nb = 0;
  for (int v : za) na += v;
  for (int v : zb) nb += v;
  if (na != nb) return na < nb;
  return za < zb;
}

PlanSolution extract_solution(const SystemSpec& sys, const scenarios::ScenarioSet& scen,
                              double theta, const std::vector<int>& install,
                              const ProblemLayout& lay, const Eigen::VectorXd& x,
                              const PlanOptions& opts) {
  const int M = lay.M, T = lay.T, S = lay.S;
  const int nsrc = static_cast<int>(lay.installed.size());

  PlanSolution out;
  out.install_vector = install;
  out.theta = theta;

  double bound_violation = 0;
  for (int k = 0; k < lay.qp.n; ++k) {
    bound_violation = std::max(bound_violation, lay.qp.lower[k] - x[k]);
    bound_violation = std::max(bound_violation, x[k] - lay.qp.upper[k]);
  }
  out.audit.max_bound_violation = std::max(0.0, bound_violation);

  auto value = [&](int k) { return std::clamp(x[k], lay.qp.lower[k], lay.qp.upper[k]); };

  for (int i = 0; i < M; ++i) {
    const auto& mg = sys.microgrids[i];
    MicrogridPlan plan;
    plan.id = mg.id;
    plan.install = install[i];
    if (install[i]) {
      plan.solar_capacity = value(lay.gs[i]);
      plan.wind_capacity = value(lay.gw[i]);
    }

    std::vector<double> costs(S, 0.0);
    plan.schedules.resize(S);
    for (int w = 0; w < S; ++w) {
      const BlockIndex& blk = lay.block[w][i];
      Schedule& sch = plan.schedules[w];
      sch.scenario_id = scen.scenarios[w].id;
      sch.grid_draw.resize(T);
      sch.renewable_in.assign(T, 0.0);
      for (int t = 0; t < T; ++t) sch.grid_draw[t] = value(blk.q[t]);
      for (int sp = 0; sp < nsrc; ++sp) {
        const int j = lay.installed[sp];
        auto& flow = sch.dispatch_from[sys.microgrids[j].id];
        flow.resize(T);
        for (int t = 0; t < T; ++t) {
          flow[t] = value(blk.e[static_cast<std::size_t>(sp) * T + t]);
          sch.renewable_in[t] += sys.distribution_eff[i][j] * flow[t];
        }
      }
      if (mg.storage.present()) {
        sch.storage_level.resize(T);
        sch.charge.resize(T);
        sch.discharge.resize(T);
        for (int t = 0; t < T; ++t) {
          sch.storage_level[t] = value(blk.s[t]);
          sch.charge[t] = value(blk.r[t]);
          sch.discharge[t] = value(blk.d[t]);
        }
      }
      for (std::size_t u = 0; u < mg.users.size(); ++u) {
        auto& xs = sch.elastic[mg.users[u].id];
        xs.resize(T);
        for (int t = 0; t < T; ++t) xs[t] = value(blk.x[u][t]);
      }
      costs[w] = operational_cost(sch, mg, sys.tariff);
    }

    plan.investment_cost = investment_cost(install[i], plan.solar_capacity, plan.wind_capacity, mg);
    plan.operational_cost = theta * expected_operational_cost(costs, scen.probabilities);
    plan.overall_cost = plan.investment_cost + plan.operational_cost;
    out.total_cost += plan.overall_cost;
    out.microgrids.push_back(std::move(plan));
  }

  // Post-clamp audit of every modeled relation.
  for (int w = 0; w < S; ++w) {
    const auto& sc = scen.scenarios[w];
    for (int i = 0; i < M; ++i) {
      const auto& mg = sys.microgrids[i];
      const Schedule& sch = out.microgrids[i].schedules[w];
      for (int t = 0; t < T; ++t) {
        double lhs = sch.renewable_in[t] + sch.grid_draw[t];
        double rhs = mg.inelastic_load[t];
        if (mg.storage.present()) {
          lhs += sch.discharge[t];
          rhs += sch.charge[t];
        }
        for (const auto& [uid, xs] : sch.elastic) rhs += xs[t];
        out.audit.max_balance_residual =
            std::max(out.audit.max_balance_residual, std::abs(lhs - rhs));
        if (mg.storage.present()) {
          const double prev = t == 0 ? mg.storage.start_level() : sch.storage_level[t - 1];
          const double recursion = sch.storage_level[t] - prev -
                                   mg.storage.charge_eff * sch.charge[t] +
                                   sch.discharge[t] / mg.storage.discharge_eff;
          out.audit.max_balance_residual =
              std::max(out.audit.max_balance_residual, std::abs(recursion));
          if (std::min(sch.charge[t], sch.discharge[t]) > opts.solver.tol)
            ++out.audit.simultaneous_charge_slots;
        }
      }
      if (mg.storage.present())
        out.audit.max_balance_residual =
            std::max(out.audit.max_balance_residual,
                     std::abs(sch.storage_level[T - 1] - mg.storage.start_level()));
      for (const auto& user : mg.users) {
        double total = 0;
        for (double v : sch.elastic.at(user.id)) total += v;
        out.audit.max_balance_residual =
            std::max(out.audit.max_balance_residual, std::abs(total - user.daily_total));
      }
    }
    for (int sp = 0; sp < nsrc; ++sp) {
      const int i = lay.installed[sp];
      const auto& mg = sys.microgrids[i];
      const auto& sol = profile_at(sc, sc.solar, mg.location_id);
      const auto& wind = profile_at(sc, sc.wind, mg.location_id);
      const MicrogridPlan& plan = out.microgrids[i];
      for (int t = 0; t < T; ++t) {
        double supplied = 0;
        for (int j = 0; j < M; ++j)
          supplied += out.microgrids[j].schedules[w].dispatch_from.at(mg.id)[t];
        const double avail = plan.solar_capacity * sol[t] + plan.wind_capacity * wind[t];
        out.audit.max_supply_violation =
            std::max(out.audit.max_supply_violation, supplied - avail);
      }
    }
  }
  out.audit.max_supply_violation = std::max(0.0, out.audit.max_supply_violation);
  return out;
}

} // namespace

qp::QuadraticProgram build_noncoop_qp(const MicrogridSpec& spec,
                                      const scenarios::ScenarioSet& scen,
                                      const std::vector<double>& tariff, double theta,
                                      int install) {
  require(install == 0 || install == 1, "install must be 0 or 1");
  return assemble(wrap_single(spec, tariff), scen, theta, {install}, true).qp;
}

qp::QuadraticProgram build_iop_qp(const SystemSpec& system, const scenarios::ScenarioSet& scen,
                                  double theta, const std::vector<int>& install) {
  return assemble(system, scen, theta, install, false).qp;
}

PlanSolution solve_noncoop(const MicrogridSpec& spec, const scenarios::ScenarioSet& scen,
                           const std::vector<double>& tariff, double theta,
                           const PlanOptions& opts) {
  const SystemSpec sys = wrap_single(spec, tariff);

  std::vector<SubResult> branch(2);
  parallel_for(2, opts.threads, [&](int zbit) {
    branch[zbit] = solve_install_vector(sys, scen, theta, {zbit}, opts, true);
  });

  int pick = -1;
  for (int zbit = 0; zbit < 2; ++zbit) {
    if (!branch[zbit].solved) continue;
    if (pick < 0 || prefer(branch[zbit].objective, {zbit}, branch[pick].objective, {pick},
                           opts.tie_tol))
      pick = zbit;
  }
  if (pick < 0) {
    std::ostringstream os;
    os << "no install branch of microgrid " << spec.id << " solved:";
    for (int zbit = 0; zbit < 2; ++zbit)
      os << " [z=" << zbit << ": "
         << (branch[zbit].infeasible ? "infeasible" : branch[zbit].diagnostic) << "]";
    throw PlanningError(os.str());
  }

  const ProblemLayout lay = assemble(sys, scen, theta, {pick}, true);
  PlanSolution out = extract_solution(sys, scen, theta, {pick}, lay, branch[pick].x, opts);
  out.max_kkt_residual = branch[pick].kkt_residual;
  out.subproblems_solved = 2;
  return out;
}

PlanSolution solve_noncoop_system(const SystemSpec& system, const scenarios::ScenarioSet& scen,
                                  double theta, const PlanOptions& opts) {
  system.validate();
  const int M = static_cast<int>(system.microgrids.size());

  std::vector<PlanSolution> parts(M);
  parallel_for(M, opts.threads, [&](int i) {
    PlanOptions inner = opts;
    inner.threads = 1; // outer loop already saturates the pool
    parts[i] = solve_noncoop(system.microgrids[i], scen, system.tariff, theta, inner);
  });

  PlanSolution out;
  out.theta = theta;
  for (int i = 0; i < M; ++i) {
    PlanSolution& part = parts[i];
    out.microgrids.push_back(std::move(part.microgrids[0]));
    out.install_vector.push_back(part.install_vector[0]);
    out.total_cost += part.total_cost;
    out.max_kkt_residual = std::max(out.max_kkt_residual, part.max_kkt_residual);
    out.subproblems_solved += part.subproblems_solved;
    out.audit.max_balance_residual =
        std::max(out.audit.max_balance_residual, part.audit.max_balance_residual);
    out.audit.max_supply_violation =
        std::max(out.audit.max_supply_violation, part.audit.max_supply_violation);
    out.audit.max_bound_violation =
        std::max(out.audit.max_bound_violation, part.audit.max_bound_violation);
    out.audit.simultaneous_charge_slots += part.audit.simultaneous_charge_slots;
  }
  return out;
}

PlanSolution solve_iop(const SystemSpec& system, const scenarios::ScenarioSet& scen, double theta,
                       const PlanOptions& opts) {
  system.validate();
  const int M = static_cast<int>(system.microgrids.size());
  if (M > opts.enum_limit)
    throw PlanningError("system has " + std::to_string(M) +
                        " microgrids; install enumeration supports at most " +
                        std::to_string(opts.enum_limit));

  const int masks = 1 << M;
  auto mask_install = [M](int mask) {
    std::vector<int> z(M);
    for (int i = 0; i < M; ++i) z[i] = (mask >> i) & 1;
    return z;
  };

  std::vector<SubResult> results(masks);
  parallel_for(masks, opts.threads, [&](int mask) {
    results[mask] = solve_install_vector(system, scen, theta, mask_install(mask), opts, false);
  });

  int best = -1;
  for (int mask = 0; mask < masks; ++mask) {
    if (!results[mask].solved) continue;
    if (best < 0 || prefer(results[mask].objective, mask_install(mask), results[best].objective,
                           mask_install(best), opts.tie_tol))
      best = mask;
  }
  if (best < 0) {
    std::ostringstream os;
    os << "no install vector solved:";
    for (int mask = 0; mask < masks; ++mask)
      os << ' ' << install_label(mask_install(mask)) << ": "
         << (results[mask].infeasible ? "infeasible" : results[mask].diagnostic) << ';';
    throw PlanningError(os.str());
  }

  const std::vector<int> z = mask_install(best);
  const ProblemLayout lay = assemble(system, scen, theta, z, false);
  PlanSolution out = extract_solution(system, scen, theta, z, lay, results[best].x, opts);
  out.max_kkt_residual = results[best].kkt_residual;
  out.subproblems_solved = masks;
  return out;
}

} // namespace gridplan::planning
