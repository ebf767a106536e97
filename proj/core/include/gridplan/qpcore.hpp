#ifndef GRIDPLAN_QPCORE_HPP
#define GRIDPLAN_QPCORE_HPP

#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace gridplan::qp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Convex quadratic program with a diagonal quadratic term:
///
///   minimize    sum_k h[k] * (x[k] - t[k])^2  +  c[k] * x[k]
///   subject to  eq * x = eq_rhs
///               ineq * x <= ineq_rhs
///               lower <= x <= upper   (+-inf allowed)
struct QuadraticProgram {
  int n = 0;
  Eigen::VectorXd quad_weight; // h, nonnegative
  Eigen::VectorXd quad_target; // t
  Eigen::VectorXd linear_cost; // c
  Eigen::SparseMatrix<double, Eigen::RowMajor> eq;
  Eigen::VectorXd eq_rhs;
  Eigen::SparseMatrix<double, Eigen::RowMajor> ineq;
  Eigen::VectorXd ineq_rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<std::string> names; // empty or size n, diagnostics only

  void validate() const;
  double objective(const Eigen::VectorXd& x) const;
  std::string variable_name(int k) const;
};

/// Incremental assembly of a QuadraticProgram from named variables and rows.
class QpBuilder {
public:
  int add_variable(std::string name, double lo, double hi);
  void set_quadratic(int var, double weight, double target);
  void add_linear_cost(int var, double coef); // accumulates
  void set_bounds(int var, double lo, double hi);
  int add_equality(const std::vector<std::pair<int, double>>& terms, double rhs);
  int add_inequality(const std::vector<std::pair<int, double>>& terms, double rhs);
  int variable_count() const { return static_cast<int>(names_.size()); }
  QuadraticProgram build() const;

private:
  std::vector<std::string> names_;
  std::vector<double> lo_, hi_, h_, t_, c_;
  std::vector<Eigen::Triplet<double>> eq_terms_, ineq_terms_;
  std::vector<double> eq_rhs_, ineq_rhs_;
};

/// Lagrange multipliers: eq free-signed; ineq, lower, upper nonnegative at a
/// KKT point (wrong signs surface in the complementarity residual).
struct Multipliers {
  Eigen::VectorXd eq;
  Eigen::VectorXd ineq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct KktResiduals {
  double primal_eq = 0;       // ||eq x - eq_rhs||_inf
  double primal_ineq = 0;     // worst violation across ineq rows and box bounds
  double stationarity = 0;    // ||grad f + eq'y + ineq'mu - lower + upper||_inf
  double complementarity = 0; // worst |multiplier * slack| and dual sign violation

  double max_residual() const;
};

/// Recompute all four residuals from scratch; shares nothing with the solver.
KktResiduals check_kkt(const QuadraticProgram& qp, const Eigen::VectorXd& x,
                       const Multipliers& mult);

enum class SolveStatus { optimal, infeasible, iteration_limit };

const char* status_name(SolveStatus s);

struct QpSolution {
  Eigen::VectorXd x;
  Multipliers multipliers;
  double objective = 0;
  SolveStatus status = SolveStatus::iteration_limit;
  KktResiduals kkt;
  int iterations = 0;
  bool polished = false;
  std::string diagnostic; // infeasibility certificate rows, iteration-limit info
};

struct SolveOptions {
  double tol = 1e-6;     // bound on all four KKT residuals at optimality
  int max_iter = 200000; // ADMM iteration cap

  // operator-splitting internals
  double rho = 0.1;          // base step (equality rows get 1e3x)
  double sigma = 1e-6;       // proximal regularization
  double alpha = 1.6;        // relaxation
  int scaling_iters = 10;    // Ruiz equilibration rounds, 0 disables
  int check_interval = 25;   // iterations between convergence checks
  bool adaptive_rho = true;
  double polish_delta = 1e-7; // active-set refinement regularization
  int refine_steps = 10;
  double infeas_tol = 1e-9; // certificate confidence threshold
};

/// Operator-splitting solve with active-set polish. Deterministic for
/// identical inputs. status == optimal guarantees kkt.max_residual() <= tol.
QpSolution solve_qp(const QuadraticProgram& qp, const SolveOptions& opts = {});

struct GridMinimum {
  Eigen::VectorXd x;
  double objective = 0;
};

/// Exhaustive grid oracle over the (finite) box, n <= 8; returns the best grid
/// point satisfying every constraint row within grid_step resolution, or
/// nullopt when no grid point is feasible. Interval pruning on constraint rows
/// skips grid points no suffix assignment can repair; the set of feasible grid
/// points examined is identical to the unpruned enumeration.
std::optional<GridMinimum> brute_force_min(const QuadraticProgram& qp, double grid_step);

/// Plain-text dump for external cross-checking: `min`, then lines
/// `quad <var> <h> <t>`, `lin <var> <c>`, `eq <i>: <var> <coef> ... = <rhs>`,
/// `ineq <i>: <var> <coef> ... <= <rhs>`, `bnd <var> <lo> <hi>`.
void dump_qp(const QuadraticProgram& qp, std::ostream& os);
std::string dump_qp_string(const QuadraticProgram& qp);

} // namespace gridplan::qp

#endif
