#ifndef GRIDPLAN_BARGAINING_HPP
#define GRIDPLAN_BARGAINING_HPP

#include <string>
#include <vector>

#include "gridplan/io.hpp"

namespace gridplan::bargaining {

/// Inputs of the cost-sharing stage: each microgrid's standalone benchmark
/// cost, its operational cost under the cooperative plan, and the total
/// cooperative investment that the shares must recover.
struct BargainingInput {
  std::vector<std::string> ids;
  std::vector<double> noncoop_cost;     // standalone overall cost per microgrid
  std::vector<double> coop_operational; // operational cost under the joint plan
  double total_investment = 0;

  std::size_t size() const { return ids.size(); }
  /// Joint saving to be split: sum(noncoop) - (total_investment + sum(coop_operational)).
  double total_surplus() const;
  void validate() const;
};

/// shares[i] is what microgrid i pays toward the joint investment; its overall
/// cost becomes shares[i] + coop_operational[i] and its surplus is the
/// distance to the standalone benchmark.
struct BargainingOutcome {
  std::vector<double> shares;
  std::vector<double> surpluses;
  double nash_product = 0;
};

/// Equal-surplus allocation: every microgrid keeps exactly 1/M of the joint
/// saving. Budget balance holds by construction. Throws InconsistencyError
/// when the joint saving is negative beyond tolerance.
BargainingOutcome solve_csp_closed_form(const BargainingInput& input);

/// Maximizes sum(log surplus) over the budget-balance hyperplane by projected
/// gradient ascent; exists as an independent check of the closed form. A
/// nonpositive joint saving returns the all-zero-surplus boundary point.
BargainingOutcome solve_csp_numeric(const BargainingInput& input);

/// Product of surpluses, the bargaining objective; negative entries clip to 0.
double nash_product(const std::vector<double>& surpluses);

struct IncentiveRecord {
  std::string id;
  double noncoop_cost = 0;
  double coop_overall = 0; // share + coop_operational
  double reduction_pct = 0;
  bool satisfied = false; // coop_overall <= noncoop_cost + 1e-6 relative
};

std::vector<IncentiveRecord> verify_incentive(const BargainingOutcome& outcome,
                                              const BargainingInput& input);

std::string bargaining_to_json_string(const BargainingOutcome& outcome,
                                      const BargainingInput& input,
                                      const io::Manifest& manifest);
std::string cost_shares_csv(const BargainingOutcome& outcome, const BargainingInput& input);

} // namespace gridplan::bargaining

#endif
