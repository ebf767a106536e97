#include "gridplan/bargaining.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "gridplan/errors.hpp"

namespace gridplan::bargaining {

namespace {

double consistency_tol(const BargainingInput& in) {
  double scale = std::abs(in.total_investment);
  for (double v : in.noncoop_cost) scale += std::abs(v);
  for (double v : in.coop_operational) scale += std::abs(v);
  return 1e-9 * std::max(1.0, scale);
}

std::vector<double> shares_from_surpluses(const BargainingInput& in,
                                          const std::vector<double>& sigma) {
  std::vector<double> v(in.size());
  for (std::size_t i = 0; i < in.size(); ++i)
    v[i] = in.noncoop_cost[i] - in.coop_operational[i] - sigma[i];
  return v;
}

} // namespace

double BargainingInput::total_surplus() const {
  double s = -total_investment;
  for (std::size_t i = 0; i < size(); ++i) s += noncoop_cost[i] - coop_operational[i];
  return s;
}

void BargainingInput::validate() const {
  if (ids.empty()) throw ValidationError("bargaining: needs at least one microgrid");
  if (noncoop_cost.size() != ids.size() || coop_operational.size() != ids.size())
    throw ValidationError("bargaining: cost vectors must match the id list");
  if (!std::isfinite(total_investment) || total_investment < 0)
    throw ValidationError("bargaining: total investment must be finite and nonnegative");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].empty()) throw ValidationError("bargaining: empty microgrid id");
    if (!std::isfinite(noncoop_cost[i]) || !std::isfinite(coop_operational[i]))
      throw ValidationError("bargaining: costs for " + ids[i] + " must be finite");
    for (std::size_t j = 0; j < i; ++j)
      if (ids[j] == ids[i]) throw ValidationError("bargaining: duplicate id " + ids[i]);
  }
}

BargainingOutcome solve_csp_closed_form(const BargainingInput& input) {
  input.validate();
  const double c = input.total_surplus();
  if (c < -consistency_tol(input))
    throw InconsistencyError(
        "bargaining: cooperation costs " + io::format_double(-c) +
        " more than the standalone benchmarks; upstream plans are inconsistent");
  const double m = static_cast<double>(input.size());
  BargainingOutcome out;
  out.surpluses.assign(input.size(), c / m);
  out.shares = shares_from_surpluses(input, out.surpluses);
  out.nash_product = nash_product(out.surpluses);
  return out;
}

BargainingOutcome solve_csp_numeric(const BargainingInput& input) {
  input.validate();
  const double c = input.total_surplus();
  if (c < -consistency_tol(input))
    throw InconsistencyError(
        "bargaining: cooperation costs " + io::format_double(-c) +
        " more than the standalone benchmarks; upstream plans are inconsistent");
  const std::size_t m = input.size();
  std::vector<double> sigma(m, 0.0);

  if (c > 0) {
    // Feasible asymmetric start on the hyperplane sum(sigma) = c.
    double wsum = 0;
    for (std::size_t i = 0; i < m; ++i) wsum += static_cast<double>(i + 1);
    for (std::size_t i = 0; i < m; ++i) sigma[i] = c * static_cast<double>(i + 1) / wsum;

    auto log_sum = [](const std::vector<double>& s) {
      double f = 0;
      for (double v : s) {
        if (v <= 0) return -std::numeric_limits<double>::infinity();
        f += std::log(v);
      }
      return f;
    };

    const double md = static_cast<double>(m);
    double f = log_sum(sigma);
    std::vector<double> trial(m);
    for (int it = 0; it < 50000; ++it) {
      // Gradient of sum(log sigma) projected onto the hyperplane.
      double mean = 0;
      for (double v : sigma) mean += 1.0 / v;
      mean /= md;
      double pmax = 0;
      for (double v : sigma) pmax = std::max(pmax, std::abs(1.0 / v - mean));
      if (pmax <= 1e-13 * md / c) break;

      double eta = (c / md) * (c / md); // reciprocal of the curvature at the optimum
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt, eta *= 0.5) {
        for (std::size_t i = 0; i < m; ++i) trial[i] = sigma[i] + eta * (1.0 / sigma[i] - mean);
        const double ft = log_sum(trial);
        if (ft > f) {
          sigma.swap(trial);
          f = ft;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
  }

  BargainingOutcome out;
  out.surpluses = std::move(sigma);
  out.shares = shares_from_surpluses(input, out.surpluses);
  out.nash_product = nash_product(out.surpluses);
  return out;
}

double nash_product(const std::vector<double>& surpluses) {
  double p = 1;
  for (double v : surpluses) p *= std::max(v, 0.0);
  return p;
}

std::vector<IncentiveRecord> verify_incentive(const BargainingOutcome& outcome,
                                              const BargainingInput& input) {
  input.validate();
  if (outcome.shares.size() != input.size())
    throw ValidationError("bargaining: outcome does not match the input size");
  std::vector<IncentiveRecord> report(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    IncentiveRecord& r = report[i];
    r.id = input.ids[i];
    r.noncoop_cost = input.noncoop_cost[i];
    r.coop_overall = outcome.shares[i] + input.coop_operational[i];
    r.satisfied = r.coop_overall <= r.noncoop_cost + 1e-6 * std::max(1.0, std::abs(r.noncoop_cost));
    r.reduction_pct = r.noncoop_cost != 0
                          ? 100.0 * (r.noncoop_cost - r.coop_overall) / r.noncoop_cost
                          : 0.0;
  }
  return report;
}

std::string bargaining_to_json_string(const BargainingOutcome& outcome,
                                      const BargainingInput& input,
                                      const io::Manifest& manifest) {
  const auto report = verify_incentive(outcome, input);
  double noncoop_total = 0;
  for (double v : input.noncoop_cost) noncoop_total += v;
  nlohmann::json j;
  j["total_investment"] = input.total_investment;
  j["total_surplus"] = input.total_surplus();
  j["nash_product"] = outcome.nash_product;
  j["system_reduction_pct"] =
      noncoop_total != 0 ? 100.0 * input.total_surplus() / noncoop_total : 0.0;
  j["microgrids"] = nlohmann::json::array();
  for (std::size_t i = 0; i < input.size(); ++i) {
    nlohmann::json jm;
    jm["id"] = input.ids[i];
    jm["share"] = outcome.shares[i];
    jm["surplus"] = outcome.surpluses[i];
    jm["noncoop_cost"] = input.noncoop_cost[i];
    jm["coop_operational"] = input.coop_operational[i];
    jm["coop_overall"] = report[i].coop_overall;
    jm["reduction_pct"] = report[i].reduction_pct;
    jm["incentive_satisfied"] = report[i].satisfied;
    j["microgrids"].push_back(std::move(jm));
  }
  j["manifest"] = nlohmann::json::parse(manifest.to_json_string());
  return j.dump(2) + "\n";
}

std::string cost_shares_csv(const BargainingOutcome& outcome, const BargainingInput& input) {
  const auto report = verify_incentive(outcome, input);
  std::ostringstream os;
  os << "microgrid,cost_share,reduction_pct\n";
  for (std::size_t i = 0; i < input.size(); ++i)
    os << input.ids[i] << ',' << io::format_double(outcome.shares[i]) << ','
       << io::format_double(report[i].reduction_pct) << '\n';
  return os.str();
}

} // namespace gridplan::bargaining
