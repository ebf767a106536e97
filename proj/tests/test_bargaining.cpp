#include "doctest.h"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gridplan/bargaining.hpp"
#include "gridplan/errors.hpp"

namespace bargaining = gridplan::bargaining;
using gridplan::InconsistencyError;
using gridplan::ValidationError;

namespace {

bargaining::BargainingInput two_grid_input() {
  bargaining::BargainingInput in;
  in.ids = {"a", "b"};
  in.noncoop_cost = {100.0, 50.0};
  in.coop_operational = {40.0, 30.0};
  in.total_investment = 40.0;
  return in;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

} // namespace

TEST_SUITE("bargaining") {

TEST_CASE("input validation") {
  auto in = two_grid_input();
  CHECK_NOTHROW(in.validate());
  CHECK(in.size() == 2);
  CHECK(in.total_surplus() == doctest::Approx(40.0).epsilon(1e-15));

  SUBCASE("mismatched vector lengths") {
    in.coop_operational.pop_back();
    CHECK_THROWS_AS(in.validate(), ValidationError);
  }
  SUBCASE("empty input") {
    bargaining::BargainingInput empty;
    CHECK_THROWS_AS(empty.validate(), ValidationError);
  }
  SUBCASE("non-finite cost") {
    in.noncoop_cost[0] = std::nan("");
    CHECK_THROWS_AS(in.validate(), ValidationError);
  }
  SUBCASE("negative investment") {
    in.total_investment = -1.0;
    CHECK_THROWS_AS(in.validate(), ValidationError);
  }
}

TEST_CASE("closed form splits the surplus equally") {
  const auto out = bargaining::solve_csp_closed_form(two_grid_input());
  REQUIRE(out.shares.size() == 2);
  CHECK(out.surpluses[0] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(out.surpluses[1] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(out.shares[0] == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(out.shares[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.shares[0] + out.shares[1] == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(out.nash_product == doctest::Approx(400.0).epsilon(1e-12));
}

TEST_CASE("symmetric input gets symmetric shares") {
  bargaining::BargainingInput in;
  in.ids = {"a", "b"};
  in.noncoop_cost = {100.0, 100.0};
  in.coop_operational = {30.0, 30.0};
  in.total_investment = 40.0;
  const auto out = bargaining::solve_csp_closed_form(in);
  CHECK(out.shares[0] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(out.shares[1] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(out.surpluses[0] == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(out.surpluses[1] == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("raising one benchmark moves shares by the equal-split rule") {
  const double delta = 12.0;
  auto base_in = two_grid_input();
  auto moved_in = base_in;
  moved_in.noncoop_cost[0] += delta;

  const auto base = bargaining::solve_csp_closed_form(base_in);
  const auto moved = bargaining::solve_csp_closed_form(moved_in);
  const double m = 2.0;
  CHECK(moved.shares[0] == doctest::Approx(base.shares[0] + delta * (m - 1) / m).epsilon(1e-12));
  CHECK(moved.shares[1] == doctest::Approx(base.shares[1] - delta / m).epsilon(1e-12));
  // Every surplus rises by delta/M regardless of whose benchmark moved.
  CHECK(moved.surpluses[1] == doctest::Approx(base.surpluses[1] + delta / m).epsilon(1e-12));
}

TEST_CASE("negative joint surplus is inconsistent") {
  bargaining::BargainingInput in;
  in.ids = {"a", "b"};
  in.noncoop_cost = {10.0, 10.0};
  in.coop_operational = {10.0, 10.0};
  in.total_investment = 5.0;
  CHECK_THROWS_AS(bargaining::solve_csp_closed_form(in), InconsistencyError);
}

TEST_CASE("numeric solver agrees with the closed form on random inputs") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + static_cast<int>(rng() % 6);
    bargaining::BargainingInput in;
    double slack = 0.0;
    for (int i = 0; i < m; ++i) {
      in.ids.push_back("g" + std::to_string(i));
      const double noncoop = 50.0 + 100.0 * u(rng);
      const double oper = (0.2 + 0.6 * u(rng)) * noncoop;
      in.noncoop_cost.push_back(noncoop);
      in.coop_operational.push_back(oper);
      slack += noncoop - oper;
    }
    in.total_investment = 0.8 * slack * u(rng);

    const auto closed = bargaining::solve_csp_closed_form(in);
    const auto numeric = bargaining::solve_csp_numeric(in);
    CAPTURE(trial);
    REQUIRE(numeric.shares.size() == closed.shares.size());
    for (int i = 0; i < m; ++i) {
      CHECK(close_rel(closed.shares[i], numeric.shares[i], 1e-6));
      CHECK(close_rel(closed.surpluses[i], numeric.surpluses[i], 1e-6));
    }

    // Budget balance and the equal-surplus signature of the maximizer.
    double paid = 0.0;
    for (double s : closed.shares) paid += s;
    CHECK(close_rel(paid, in.total_investment, 1e-9));
    const double sigma = in.total_surplus() / m;
    for (double s : closed.surpluses)
      CHECK(std::abs(s - sigma) <= 1e-9 * std::max(1.0, sigma));
  }
}

TEST_CASE("numeric solver returns the boundary point when nothing is saved") {
  bargaining::BargainingInput in;
  in.ids = {"a", "b"};
  in.noncoop_cost = {10.0, 10.0};
  in.coop_operational = {10.0, 10.0};
  in.total_investment = 0.0;
  const auto out = bargaining::solve_csp_numeric(in);
  for (double s : out.surpluses) CHECK(s == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.nash_product == 0.0);
}

TEST_CASE("nash product clips negative surpluses to zero") {
  CHECK(bargaining::nash_product({20.0, 20.0}) == doctest::Approx(400.0).epsilon(1e-15));
  CHECK(bargaining::nash_product({20.0, -1.0}) == 0.0);
  CHECK(bargaining::nash_product({}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("incentive verification flags a losing participant") {
  const auto in = two_grid_input();
  const auto out = bargaining::solve_csp_closed_form(in);
  const auto records = bargaining::verify_incentive(out, in);
  REQUIRE(records.size() == 2);
  for (const auto& r : records) {
    CHECK(r.satisfied);
    CHECK(r.coop_overall <= r.noncoop_cost + 1e-6 * std::max(1.0, r.noncoop_cost));
    CHECK(r.reduction_pct > 0.0);
  }
  CHECK(records[0].coop_overall == doctest::Approx(80.0).epsilon(1e-12));
  CHECK(records[0].reduction_pct == doctest::Approx(20.0).epsilon(1e-9));

  bargaining::BargainingOutcome skewed = out;
  skewed.shares[0] += 30.0; // now pays more than going alone
  skewed.surpluses[0] -= 30.0;
  const auto bad = bargaining::verify_incentive(skewed, in);
  CHECK_FALSE(bad[0].satisfied);
}

TEST_CASE("single microgrid keeps the whole surplus") {
  bargaining::BargainingInput in;
  in.ids = {"solo"};
  in.noncoop_cost = {100.0};
  in.coop_operational = {40.0};
  in.total_investment = 30.0;
  const auto out = bargaining::solve_csp_closed_form(in);
  CHECK(out.shares[0] == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(out.surpluses[0] == doctest::Approx(30.0).epsilon(1e-12));
}

TEST_CASE("outputs serialize deterministically") {
  const auto in = two_grid_input();
  const auto out = bargaining::solve_csp_closed_form(in);
  gridplan::io::Manifest manifest;
  const std::string a = bargaining::bargaining_to_json_string(out, in, manifest);
  const std::string b = bargaining::bargaining_to_json_string(out, in, manifest);
  CHECK(a == b);
  CHECK(a.find("\"a\"") != std::string::npos);

  const std::string csv = bargaining::cost_shares_csv(out, in);
  CHECK(csv.find("a,") != std::string::npos);
  CHECK(csv.find("b,") != std::string::npos);
}

} // TEST_SUITE
