#include "gridplan/qpcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gridplan/errors.hpp"
#include "gridplan/io.hpp"

namespace gridplan::qp {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

std::string num(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return io::format_double(v);
}

} // namespace

void QuadraticProgram::validate() const {
  require(n >= 1, "quadratic program needs at least one variable");
  require(quad_weight.size() == n, "quad_weight size mismatch");
  require(quad_target.size() == n, "quad_target size mismatch");
  require(linear_cost.size() == n, "linear_cost size mismatch");
  require(lower.size() == n, "lower bound size mismatch");
  require(upper.size() == n, "upper bound size mismatch");
  require(names.empty() || static_cast<int>(names.size()) == n,
          "names must be empty or one per variable");
  for (int k = 0; k < n; ++k) {
    require(std::isfinite(quad_weight[k]) && quad_weight[k] >= 0,
            "quad_weight must be finite and nonnegative: " + variable_name(k));
    require(std::isfinite(quad_target[k]), "quad_target must be finite: " + variable_name(k));
    require(std::isfinite(linear_cost[k]), "linear_cost must be finite: " + variable_name(k));
    require(!std::isnan(lower[k]) && !std::isnan(upper[k]),
            "bounds must not be NaN: " + variable_name(k));
    require(lower[k] < kInf && upper[k] > -kInf,
            "bounds must leave room for a value: " + variable_name(k));
    require(lower[k] <= upper[k], "lower bound exceeds upper bound: " + variable_name(k));
  }
  require(eq.cols() == n || eq.rows() == 0, "equality matrix column count mismatch");
  require(eq_rhs.size() == eq.rows(), "equality rhs size mismatch");
  require(ineq.cols() == n || ineq.rows() == 0, "inequality matrix column count mismatch");
  require(ineq_rhs.size() == ineq.rows(), "inequality rhs size mismatch");
  for (Eigen::Index i = 0; i < eq_rhs.size(); ++i)
    require(std::isfinite(eq_rhs[i]), "equality rhs must be finite, row " + std::to_string(i));
  for (Eigen::Index i = 0; i < ineq_rhs.size(); ++i)
    require(std::isfinite(ineq_rhs[i]), "inequality rhs must be finite, row " + std::to_string(i));
  auto check_entries = [&](const Eigen::SparseMatrix<double, Eigen::RowMajor>& m,
                           const char* label) {
    for (int i = 0; i < m.outerSize(); ++i)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, i); it; ++it)
        require(std::isfinite(it.value()),
                std::string(label) + " coefficient must be finite, row " + std::to_string(i));
  };
  check_entries(eq, "equality");
  check_entries(ineq, "inequality");
}

double QuadraticProgram::objective(const Eigen::VectorXd& x) const {
  double obj = 0;
  for (int k = 0; k < n; ++k) {
    const double dev = x[k] - quad_target[k];
    obj += quad_weight[k] * dev * dev + linear_cost[k] * x[k];
  }
  return obj;
}

std::string QuadraticProgram::variable_name(int k) const {
  if (!names.empty() && k >= 0 && k < static_cast<int>(names.size())) return names[k];
  return "x" + std::to_string(k);
}

int QpBuilder::add_variable(std::string name, double lo, double hi) {
  names_.push_back(std::move(name));
  lo_.push_back(lo);
  hi_.push_back(hi);
  h_.push_back(0);
  t_.push_back(0);
  c_.push_back(0);
  return static_cast<int>(names_.size()) - 1;
}

void QpBuilder::set_quadratic(int var, double weight, double target) {
  h_.at(var) = weight;
  t_.at(var) = target;
}

void QpBuilder::add_linear_cost(int var, double coef) { c_.at(var) += coef; }

void QpBuilder::set_bounds(int var, double lo, double hi) {
  lo_.at(var) = lo;
  hi_.at(var) = hi;
}

int QpBuilder::add_equality(const std::vector<std::pair<int, double>>& terms, double rhs) {
  const int row = static_cast<int>(eq_rhs_.size());
  for (const auto& [var, coef] : terms) {
    require(var >= 0 && var < variable_count(),
            "equality row references unknown variable " + std::to_string(var));
    eq_terms_.emplace_back(row, var, coef);
  }
  eq_rhs_.push_back(rhs);
  return row;
}

int QpBuilder::add_inequality(const std::vector<std::pair<int, double>>& terms, double rhs) {
  const int row = static_cast<int>(ineq_rhs_.size());
  for (const auto& [var, coef] : terms) {
    require(var >= 0 && var < variable_count(),
            "inequality row references unknown variable " + std::to_string(var));
    ineq_terms_.emplace_back(row, var, coef);
  }
  ineq_rhs_.push_back(rhs);
  return row;
}

QuadraticProgram QpBuilder::build() const {
  QuadraticProgram qp;
  qp.n = static_cast<int>(names_.size());
  auto to_vec = [](const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };
  qp.quad_weight = to_vec(h_);
  qp.quad_target = to_vec(t_);
  qp.linear_cost = to_vec(c_);
  qp.lower = to_vec(lo_);
  qp.upper = to_vec(hi_);
  qp.names = names_;
  qp.eq.resize(static_cast<Eigen::Index>(eq_rhs_.size()), qp.n);
  qp.eq.setFromTriplets(eq_terms_.begin(), eq_terms_.end());
  qp.eq_rhs = to_vec(eq_rhs_);
  qp.ineq.resize(static_cast<Eigen::Index>(ineq_rhs_.size()), qp.n);
  qp.ineq.setFromTriplets(ineq_terms_.begin(), ineq_terms_.end());
  qp.ineq_rhs = to_vec(ineq_rhs_);
  qp.validate();
  return qp;
}

double KktResiduals::max_residual() const {
  return std::max({primal_eq, primal_ineq, stationarity, complementarity});
}

const char* status_name(SolveStatus s) {
  switch (s) {
  case SolveStatus::optimal:
    return "optimal";
  case SolveStatus::infeasible:
    return "infeasible";
  case SolveStatus::iteration_limit:
    return "iteration_limit";
  }
  return "unknown";
}

KktResiduals check_kkt(const QuadraticProgram& qp, const Eigen::VectorXd& x,
                       const Multipliers& mult) {
  require(x.size() == qp.n, "kkt check: x size mismatch");
  require(mult.eq.size() == qp.eq.rows(), "kkt check: eq multiplier size mismatch");
  require(mult.ineq.size() == qp.ineq.rows(), "kkt check: ineq multiplier size mismatch");
  require(mult.lower.size() == qp.n && mult.upper.size() == qp.n,
          "kkt check: bound multiplier size mismatch");

  KktResiduals r;

  Eigen::VectorXd station = qp.linear_cost;
  station += (2.0 * qp.quad_weight.array() * (x - qp.quad_target).array()).matrix();
  if (qp.eq.rows() > 0) station += qp.eq.transpose() * mult.eq;
  if (qp.ineq.rows() > 0) station += qp.ineq.transpose() * mult.ineq;
  station -= mult.lower;
  station += mult.upper;
  r.stationarity = station.size() > 0 ? station.cwiseAbs().maxCoeff() : 0.0;

  if (qp.eq.rows() > 0) r.primal_eq = (qp.eq * x - qp.eq_rhs).cwiseAbs().maxCoeff();

  Eigen::VectorXd slack;
  if (qp.ineq.rows() > 0) {
    slack = qp.ineq_rhs - qp.ineq * x;
    r.primal_ineq = std::max(0.0, (-slack).maxCoeff());
  }
  for (int k = 0; k < qp.n; ++k) {
    if (qp.lower[k] > -kInf) r.primal_ineq = std::max(r.primal_ineq, qp.lower[k] - x[k]);
    if (qp.upper[k] < kInf) r.primal_ineq = std::max(r.primal_ineq, x[k] - qp.upper[k]);
  }

  double comp = 0;
  for (Eigen::Index i = 0; i < mult.ineq.size(); ++i) {
    comp = std::max(comp, -mult.ineq[i]); // dual feasibility folded in
    comp = std::max(comp, std::abs(mult.ineq[i] * slack[i]));
  }
  for (int k = 0; k < qp.n; ++k) {
    comp = std::max(comp, -mult.lower[k]);
    comp = std::max(comp, -mult.upper[k]);
    if (qp.lower[k] > -kInf)
      comp = std::max(comp, std::abs(mult.lower[k] * (x[k] - qp.lower[k])));
    else
      comp = std::max(comp, std::abs(mult.lower[k]));
    if (qp.upper[k] < kInf)
      comp = std::max(comp, std::abs(mult.upper[k] * (qp.upper[k] - x[k])));
    else
      comp = std::max(comp, std::abs(mult.upper[k]));
  }
  r.complementarity = comp;
  return r;
}

namespace {

// Row-major coefficient snapshot used by the grid oracle.
struct DenseRow {
  std::vector<double> coef;
  double rhs = 0;
};

// Minimum of h*(x-t)^2 + c*x over [lo, hi]; the unconstrained minimizer is
// t - c/(2h) when h > 0, otherwise the better interval endpoint.
double separable_min(double h, double t, double c, double lo, double hi) {
  auto eval = [&](double x) { return h * (x - t) * (x - t) + c * x; };
  double best = std::min(eval(lo), eval(hi));
  if (h > 0) {
    const double star = t - c / (2 * h);
    if (star > lo && star < hi) best = std::min(best, eval(star));
  }
  return best;
}

} // namespace

std::optional<GridMinimum> brute_force_min(const QuadraticProgram& qp, double grid_step) {
  qp.validate();
  require(qp.n <= 8, "grid oracle supports at most 8 variables");
  require(std::isfinite(grid_step) && grid_step > 0, "grid step must be positive");
  const int n = qp.n;
  for (int k = 0; k < n; ++k)
    require(std::isfinite(qp.lower[k]) && std::isfinite(qp.upper[k]),
            "grid oracle needs finite bounds: " + qp.variable_name(k));

  // Per-variable grid: lo, lo + step, ..., plus hi when it misses the lattice.
  std::vector<std::vector<double>> points(n);
  for (int k = 0; k < n; ++k) {
    const double lo = qp.lower[k], hi = qp.upper[k];
    const long long steps = static_cast<long long>(std::floor((hi - lo) / grid_step + 1e-9));
    for (long long i = 0; i <= steps; ++i) points[k].push_back(lo + static_cast<double>(i) * grid_step);
    if (points[k].back() < hi - 1e-12 * std::max(1.0, std::abs(hi))) points[k].push_back(hi);
  }

  const int me = static_cast<int>(qp.eq.rows());
  const int mi = static_cast<int>(qp.ineq.rows());
  std::vector<DenseRow> erow(me), irow(mi);
  for (int i = 0; i < me; ++i) {
    erow[i].coef.assign(n, 0.0);
    erow[i].rhs = qp.eq_rhs[i];
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(qp.eq, i); it; ++it)
      erow[i].coef[it.col()] += it.value();
  }
  for (int i = 0; i < mi; ++i) {
    irow[i].coef.assign(n, 0.0);
    irow[i].rhs = qp.ineq_rhs[i];
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(qp.ineq, i); it; ++it)
      irow[i].coef[it.col()] += it.value();
  }

  // A grid point is feasible when every row holds within ftol of its rhs.
  auto row_tol = [&](const DenseRow& row) {
    double norm1 = 0;
    for (double a : row.coef) norm1 += std::abs(a);
    return std::max(grid_step, 0.5 * grid_step * norm1);
  };
  std::vector<double> etol(me), itol(mi);
  for (int i = 0; i < me; ++i) etol[i] = row_tol(erow[i]);
  for (int i = 0; i < mi; ++i) itol[i] = row_tol(irow[i]);

  // Interval arithmetic over the not-yet-fixed suffix lets the search skip
  // values that no suffix completion can repair; the admissible interval per
  // row is exact, so pruning never drops a feasible grid point.
  std::vector<std::vector<double>> emin(n + 1, std::vector<double>(me, 0.0));
  std::vector<std::vector<double>> emax(n + 1, std::vector<double>(me, 0.0));
  std::vector<std::vector<double>> imin(n + 1, std::vector<double>(mi, 0.0));
  std::vector<double> obj_rest(n + 1, 0.0);
  for (int k = n - 1; k >= 0; --k) {
    for (int i = 0; i < me; ++i) {
      const double a = erow[i].coef[k];
      const double c1 = a * qp.lower[k], c2 = a * qp.upper[k];
      emin[k][i] = emin[k + 1][i] + std::min(c1, c2);
      emax[k][i] = emax[k + 1][i] + std::max(c1, c2);
    }
    for (int i = 0; i < mi; ++i) {
      const double a = irow[i].coef[k];
      imin[k][i] = imin[k + 1][i] + std::min(a * qp.lower[k], a * qp.upper[k]);
    }
    obj_rest[k] = obj_rest[k + 1] + separable_min(qp.quad_weight[k], qp.quad_target[k],
                                                  qp.linear_cost[k], qp.lower[k], qp.upper[k]);
  }

  std::vector<double> x(n, 0.0), epart(me, 0.0), ipart(mi, 0.0);
  std::optional<GridMinimum> best;
  long long nodes = 0;
  constexpr long long kNodeBudget = 4'000'000'000LL;

  auto recurse = [&](auto&& self, int k, double obj) -> void {
    if (++nodes > kNodeBudget) throw ValidationError("grid oracle exceeded its node budget");
    if (k == n) {
      if (!best || obj < best->objective - 1e-15 * std::max(1.0, std::abs(obj))) {
        GridMinimum g;
        g.x = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
        g.objective = obj;
        best = std::move(g);
      }
      return;
    }
    if (best && obj + obj_rest[k] >= best->objective) return;

    double lo = qp.lower[k], hi = qp.upper[k];
    for (int i = 0; i < me && lo <= hi; ++i) {
      const double a = erow[i].coef[k];
      const double room_hi = erow[i].rhs + etol[i] - epart[i] - emin[k + 1][i];
      const double room_lo = erow[i].rhs - etol[i] - epart[i] - emax[k + 1][i];
      if (a > 0) {
        hi = std::min(hi, room_hi / a);
        lo = std::max(lo, room_lo / a);
      } else if (a < 0) {
        lo = std::max(lo, room_hi / a);
        hi = std::min(hi, room_lo / a);
      } else if (room_lo > 0 || room_hi < 0) {
        return;
      }
    }
    for (int i = 0; i < mi && lo <= hi; ++i) {
      const double a = irow[i].coef[k];
      const double room = irow[i].rhs + itol[i] - ipart[i] - imin[k + 1][i];
      if (a > 0)
        hi = std::min(hi, room / a);
      else if (a < 0)
        lo = std::max(lo, room / a);
      else if (room < 0)
        return;
    }
    for (double v : points[k]) {
      if (v < lo || v > hi) continue;
      x[k] = v;
      for (int i = 0; i < me; ++i) epart[i] += erow[i].coef[k] * v;
      for (int i = 0; i < mi; ++i) ipart[i] += irow[i].coef[k] * v;
      const double dev = v - qp.quad_target[k];
      self(self, k + 1, obj + qp.quad_weight[k] * dev * dev + qp.linear_cost[k] * v);
      for (int i = 0; i < me; ++i) epart[i] -= erow[i].coef[k] * v;
      for (int i = 0; i < mi; ++i) ipart[i] -= irow[i].coef[k] * v;
    }
  };
  recurse(recurse, 0, 0.0);
  return best;
}

void dump_qp(const QuadraticProgram& qp, std::ostream& os) {
  os << "min\n";
  for (int k = 0; k < qp.n; ++k)
    if (qp.quad_weight[k] != 0)
      os << "quad " << qp.variable_name(k) << ' ' << num(qp.quad_weight[k]) << ' '
         << num(qp.quad_target[k]) << '\n';
  for (int k = 0; k < qp.n; ++k)
    if (qp.linear_cost[k] != 0)
      os << "lin " << qp.variable_name(k) << ' ' << num(qp.linear_cost[k]) << '\n';
  for (int i = 0; i < qp.eq.outerSize(); ++i) {
    os << "eq " << i << ':';
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(qp.eq, i); it; ++it)
      os << ' ' << qp.variable_name(static_cast<int>(it.col())) << ' ' << num(it.value());
    os << " = " << num(qp.eq_rhs[i]) << '\n';
  }
  for (int i = 0; i < qp.ineq.outerSize(); ++i) {
    os << "ineq " << i << ':';
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(qp.ineq, i); it; ++it)
      os << ' ' << qp.variable_name(static_cast<int>(it.col())) << ' ' << num(it.value());
    os << " <= " << num(qp.ineq_rhs[i]) << '\n';
  }
  for (int k = 0; k < qp.n; ++k)
    os << "bnd " << qp.variable_name(k) << ' ' << num(qp.lower[k]) << ' ' << num(qp.upper[k])
       << '\n';
}

std::string dump_qp_string(const QuadraticProgram& qp) {
  std::ostringstream os;
  dump_qp(qp, os);
  return os.str();
}

} // namespace gridplan::qp
