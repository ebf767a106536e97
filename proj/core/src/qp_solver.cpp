#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/SparseCholesky>

#include "gridplan/errors.hpp"
#include "gridplan/io.hpp"
#include "gridplan/qpcore.hpp"

namespace gridplan::qp {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqFactor = 1e3;
constexpr double kRhoAdaptThreshold = 5.0;
constexpr int kMinItersBetweenRefactor = 100;

double limit_scaling(double v) {
  if (v < 1e-4) return 1.0;
  return std::min(v, 1e4);
}

struct Candidate {
  Vec x;
  Multipliers mult;
  KktResiduals kkt;
  bool polished = false;
  bool valid = false;
};

// Stacked form: minimize 1/2 x'Px + q'x subject to l <= Ax <= u, where A is
// [eq; ineq; I], P = 2 diag(h) and q = c - 2 h.*t.
class AdmmSolver {
public:
  AdmmSolver(const QuadraticProgram& qp, const SolveOptions& opts) : qp_(qp), opts_(opts) {
    n_ = qp.n;
    me_ = static_cast<int>(qp.eq.rows());
    mi_ = static_cast<int>(qp.ineq.rows());
    m_ = me_ + mi_ + n_;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(qp.eq.nonZeros() + qp.ineq.nonZeros() + n_));
    for (int i = 0; i < qp.eq.outerSize(); ++i)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(qp.eq, i); it; ++it)
        trips.emplace_back(i, static_cast<int>(it.col()), it.value());
    for (int i = 0; i < qp.ineq.outerSize(); ++i)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(qp.ineq, i); it; ++it)
        trips.emplace_back(me_ + i, static_cast<int>(it.col()), it.value());
    for (int k = 0; k < n_; ++k) trips.emplace_back(me_ + mi_ + k, k, 1.0);
    A_.resize(m_, n_);
    A_.setFromTriplets(trips.begin(), trips.end());

    l_.resize(m_);
    u_.resize(m_);
    l_.head(me_) = qp.eq_rhs;
    u_.head(me_) = qp.eq_rhs;
    l_.segment(me_, mi_).setConstant(-kInf);
    u_.segment(me_, mi_) = qp.ineq_rhs;
    l_.tail(n_) = qp.lower;
    u_.tail(n_) = qp.upper;

    p_ = 2.0 * qp.quad_weight;
    q_ = qp.linear_cost - (2.0 * qp.quad_weight.array() * qp.quad_target.array()).matrix();
  }

  QpSolution run();

private:
  void equilibrate();
  void build_rho(double rho_bar);
  void factorize();
  Candidate extract(const Vec& x, const Vec& stacked_y) const;
  Candidate polish(const Vec& x_unscaled, const Vec& y_unscaled) const;
  bool primal_infeasibility_certificate(const Vec& dy_unscaled, std::string* rows) const;

  const QuadraticProgram& qp_;
  SolveOptions opts_;
  int n_ = 0, me_ = 0, mi_ = 0, m_ = 0;

  SpMat A_;   // unscaled stacked constraints
  Vec l_, u_; // unscaled stacked bounds
  Vec p_, q_; // unscaled objective

  SpMat As_;
  Vec ls_, us_, ps_, qs_;
  Vec col_scale_, row_scale_; // x = col_scale .* x_scaled, y = row_scale .* y_scaled / cost_scale
  double cost_scale_ = 1.0;

  Vec rho_, rho_inv_;
  double rho_bar_ = 0.1;
  double sigma_ = 1e-6;
  Eigen::SimplicialLDLT<SpMat> kkt_;
};

void AdmmSolver::equilibrate() {
  As_ = A_;
  ps_ = p_;
  qs_ = q_;
  col_scale_ = Vec::Ones(n_);
  row_scale_ = Vec::Ones(m_);
  cost_scale_ = 1.0;

  Vec dcol(n_), drow(m_);
  for (int round = 0; round < opts_.scaling_iters; ++round) {
    dcol.setZero();
    drow.setZero();
    for (int j = 0; j < As_.outerSize(); ++j) {
      for (SpMat::InnerIterator it(As_, j); it; ++it) {
        const double a = std::abs(it.value());
        dcol[j] = std::max(dcol[j], a);
        drow[it.row()] = std::max(drow[it.row()], a);
      }
    }
    for (int j = 0; j < n_; ++j) {
      dcol[j] = std::max(dcol[j], std::abs(ps_[j]));
      dcol[j] = dcol[j] > 0 ? 1.0 / std::sqrt(limit_scaling(dcol[j])) : 1.0;
    }
    for (int i = 0; i < m_; ++i)
      drow[i] = drow[i] > 0 ? 1.0 / std::sqrt(limit_scaling(drow[i])) : 1.0;

    for (int j = 0; j < As_.outerSize(); ++j)
      for (SpMat::InnerIterator it(As_, j); it; ++it)
        it.valueRef() *= drow[it.row()] * dcol[j];
    ps_.array() *= dcol.array().square();
    qs_.array() *= dcol.array();
    col_scale_.array() *= dcol.array();
    row_scale_.array() *= drow.array();

    const double p_mean = ps_.cwiseAbs().mean();
    const double q_norm = qs_.size() > 0 ? qs_.cwiseAbs().maxCoeff() : 0.0;
    const double c_temp = 1.0 / limit_scaling(std::max(p_mean, q_norm));
    ps_ *= c_temp;
    qs_ *= c_temp;
    cost_scale_ *= c_temp;
  }

  ls_ = row_scale_.cwiseProduct(l_);
  us_ = row_scale_.cwiseProduct(u_);
  for (int i = 0; i < m_; ++i) {
    if (l_[i] == -kInf) ls_[i] = -kInf;
    if (u_[i] == kInf) us_[i] = kInf;
  }
}

void AdmmSolver::build_rho(double rho_bar) {
  rho_bar_ = std::clamp(rho_bar, kRhoMin, kRhoMax);
  rho_.resize(m_);
  for (int i = 0; i < m_; ++i) {
    if (ls_[i] == -kInf && us_[i] == kInf)
      rho_[i] = kRhoMin;
    else if (ls_[i] == us_[i])
      rho_[i] = std::min(rho_bar_ * kRhoEqFactor, kRhoMax);
    else
      rho_[i] = rho_bar_;
  }
  rho_inv_ = rho_.cwiseInverse();
}

void AdmmSolver::factorize() {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(2 * As_.nonZeros() + n_ + m_));
  for (int k = 0; k < n_; ++k) trips.emplace_back(k, k, ps_[k] + sigma_);
  for (int j = 0; j < As_.outerSize(); ++j) {
    for (SpMat::InnerIterator it(As_, j); it; ++it) {
      trips.emplace_back(n_ + static_cast<int>(it.row()), j, it.value());
      trips.emplace_back(j, n_ + static_cast<int>(it.row()), it.value());
    }
  }
  for (int i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, -rho_inv_[i]);
  SpMat kkt(n_ + m_, n_ + m_);
  kkt.setFromTriplets(trips.begin(), trips.end());

  for (int attempt = 0;; ++attempt) {
    kkt_.compute(kkt);
    if (kkt_.info() == Eigen::Success) return;
    if (attempt >= 8) throw PlanningError("quadratic solve failed: KKT factorization error");
    sigma_ *= 10;
    for (int k = 0; k < n_; ++k) kkt.coeffRef(k, k) = ps_[k] + sigma_;
  }
}

Candidate AdmmSolver::extract(const Vec& x, const Vec& stacked_y) const {
  Candidate cand;
  cand.x = x;
  cand.mult.eq = stacked_y.head(me_);
  cand.mult.ineq = stacked_y.segment(me_, mi_);
  cand.mult.lower = (-stacked_y.tail(n_)).cwiseMax(0.0);
  cand.mult.upper = stacked_y.tail(n_).cwiseMax(0.0);
  cand.kkt = check_kkt(qp_, cand.x, cand.mult);
  cand.valid = true;
  return cand;
}

Candidate AdmmSolver::polish(const Vec& x_unscaled, const Vec& y_unscaled) const {
  const double ymax = y_unscaled.size() > 0 ? y_unscaled.cwiseAbs().maxCoeff() : 0.0;
  const Vec ax0 = A_ * x_unscaled;

  // side per stacked row: -1 pinned at lower, +1 at upper, 0 free.
  std::vector<int> side(m_, 0);
  const auto seed = [&](double athr) {
    for (int i = 0; i < m_; ++i) {
      side[i] = 0;
      if (l_[i] == u_[i]) {
        side[i] = -1;
      } else if (y_unscaled[i] < -athr && l_[i] > -kInf) {
        side[i] = -1;
      } else if (y_unscaled[i] > athr && u_[i] < kInf) {
        side[i] = 1;
      } else if (l_[i] > -kInf && ax0[i] - l_[i] <= 1e-6 * std::max(1.0, std::abs(l_[i]))) {
        // Primal proximity catches actives whose multiplier is still tiny;
        // without them the reduced system has free null directions wherever
        // the quadratic weight is zero.
        side[i] = -1;
      } else if (u_[i] < kInf && u_[i] - ax0[i] <= 1e-6 * std::max(1.0, std::abs(u_[i]))) {
        side[i] = 1;
      }
    }
  };

  struct Attempt {
    bool ok = false;
    Vec x, y;
    Candidate cand;
  };
  const auto attempt = [&]() -> Attempt {
    Attempt res;
    std::vector<int> active;
    std::vector<double> rhs_active;
    for (int i = 0; i < m_; ++i) {
      if (side[i] == 0) continue;
      active.push_back(i);
      rhs_active.push_back(side[i] < 0 ? l_[i] : u_[i]);
    }
    const int na = static_cast<int>(active.size());

    // Reduced KKT with delta regularization keeps the factorization alive
    // when active rows are dependent; refinement removes the perturbation.
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < n_; ++k) trips.emplace_back(k, k, p_[k] + opts_.polish_delta);
    SpMat Ared(na, n_);
    {
      std::vector<Eigen::Triplet<double>> atrips;
      std::vector<int> row_of(m_, -1);
      for (int r = 0; r < na; ++r) row_of[active[r]] = r;
      for (int j = 0; j < A_.outerSize(); ++j)
        for (SpMat::InnerIterator it(A_, j); it; ++it)
          if (row_of[it.row()] >= 0) atrips.emplace_back(row_of[it.row()], j, it.value());
      Ared.setFromTriplets(atrips.begin(), atrips.end());
    }
    for (int j = 0; j < Ared.outerSize(); ++j) {
      for (SpMat::InnerIterator it(Ared, j); it; ++it) {
        trips.emplace_back(n_ + static_cast<int>(it.row()), j, it.value());
        trips.emplace_back(j, n_ + static_cast<int>(it.row()), it.value());
      }
    }
    for (int r = 0; r < na; ++r) trips.emplace_back(n_ + r, n_ + r, -opts_.polish_delta);
    SpMat kred(n_ + na, n_ + na);
    kred.setFromTriplets(trips.begin(), trips.end());

    Eigen::SimplicialLDLT<SpMat> ldlt(kred);
    if (ldlt.info() != Eigen::Success) return res;

    // The first solve is biased toward the iterate: without the bias, any
    // null direction of the reduced system (zero quadratic weight and no
    // active row) lands arbitrarily far outside the inactive bounds.
    Vec rhs(n_ + na);
    rhs.head(n_) = -q_;
    for (int r = 0; r < na; ++r) rhs[n_ + r] = rhs_active[r];
    Vec rhs_biased = rhs;
    rhs_biased.head(n_) += opts_.polish_delta * x_unscaled;
    for (int r = 0; r < na; ++r) rhs_biased[n_ + r] -= opts_.polish_delta * y_unscaled[active[r]];
    Vec w = ldlt.solve(rhs_biased);

    // Refinement against the unregularized system; null components stay put.
    // Inconsistent active sets make the residual stall or grow: keep the best.
    Vec resid(n_ + na), w_best = w;
    double resid_best = kInf;
    for (int step = 0; step < opts_.refine_steps; ++step) {
      resid.head(n_) = rhs.head(n_) - p_.cwiseProduct(w.head(n_));
      if (na > 0) {
        resid.head(n_) -= Ared.transpose() * w.tail(na);
        resid.tail(na) = rhs.tail(na) - Ared * w.head(n_);
      }
      const double rnorm = resid.cwiseAbs().maxCoeff();
      if (rnorm < resid_best) {
        resid_best = rnorm;
        w_best = w;
      }
      if (rnorm < 1e-15 || rnorm > 10 * resid_best) break;
      w += ldlt.solve(resid);
    }
    w = w_best;

    res.x = w.head(n_);
    res.y = Vec::Zero(m_);
    for (int r = 0; r < na; ++r) res.y[active[r]] = w[n_ + r];
    res.cand = extract(res.x, res.y);
    res.cand.polished = true;
    res.ok = true;
    return res;
  };

  Candidate best;
  for (double athr : {std::max(opts_.tol, 1e-9 * std::max(1.0, ymax)), 1e-3 * ymax}) {
    seed(athr);
    for (int round = 0; round < 8; ++round) {
      Attempt step = attempt();
      if (!step.ok) break;
      if (!best.valid || step.cand.kkt.max_residual() < best.kkt.max_residual())
        best = step.cand;
      if (best.kkt.max_residual() <= opts_.tol) return best;

      // Active-set revision. Pinning violated rows comes first and alone:
      // mixing adds with drops in one round lets the candidate jump between
      // vertices without settling. Drops happen only once nothing is violated.
      bool changed = false;
      const Vec axc = A_ * step.x;
      for (int i = 0; i < m_; ++i) {
        if (side[i] != 0) continue;
        if (l_[i] > -kInf && axc[i] < l_[i] - 1e-9 * std::max(1.0, std::abs(l_[i]))) {
          side[i] = -1;
          changed = true;
        } else if (u_[i] < kInf && axc[i] > u_[i] + 1e-9 * std::max(1.0, std::abs(u_[i]))) {
          side[i] = 1;
          changed = true;
        }
      }
      if (!changed) {
        const double stol =
            1e-9 * std::max(1.0, step.y.size() > 0 ? step.y.cwiseAbs().maxCoeff() : 0.0);
        for (int i = 0; i < m_; ++i) {
          if (l_[i] == u_[i] || side[i] == 0) continue;
          if ((side[i] < 0 && step.y[i] > stol) || (side[i] > 0 && step.y[i] < -stol)) {
            side[i] = 0;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (best.valid && best.kkt.max_residual() <= opts_.tol) break;
  }
  return best;
}

bool AdmmSolver::primal_infeasibility_certificate(const Vec& dy, std::string* rows) const {
  const double norm = dy.size() > 0 ? dy.cwiseAbs().maxCoeff() : 0.0;
  if (norm <= 1e-12) return false;
  Vec d = dy / norm;
  const double at_norm = (A_.transpose() * d).cwiseAbs().maxCoeff();
  if (at_norm > opts_.infeas_tol) return false;
  double support = 0;
  for (int i = 0; i < m_; ++i) {
    if (d[i] > opts_.infeas_tol) {
      if (u_[i] == kInf) return false;
      support += u_[i] * d[i];
    } else if (d[i] < -opts_.infeas_tol) {
      if (l_[i] == -kInf) return false;
      support += l_[i] * d[i];
    }
  }
  if (support > -opts_.infeas_tol) return false;
  if (rows) {
    std::ostringstream os;
    os << "conflicting rows (stacked index, weight):";
    int listed = 0;
    for (int i = 0; i < m_ && listed < 8; ++i) {
      if (std::abs(d[i]) > 1e-3) {
        os << ' ' << i << ':' << io::format_double(d[i]);
        ++listed;
      }
    }
    *rows = os.str();
  }
  return true;
}

QpSolution AdmmSolver::run() {
  equilibrate();
  build_rho(opts_.rho);
  sigma_ = opts_.sigma;
  factorize();

  Vec x = Vec::Zero(n_);
  Vec z = Vec::Zero(m_);
  for (int i = 0; i < m_; ++i) z[i] = std::clamp(0.0, ls_[i], us_[i]);
  Vec y = Vec::Zero(m_);
  Vec y_prev(m_), rhs(n_ + m_), sol(n_ + m_), ztilde(m_), zr(m_);

  // The ladder schedules polish attempts, loosest first: a polish from a
  // coarse iterate usually lands the exact active set, and acceptance is
  // always the absolute check_kkt bound, never the ladder level itself.
  double eps_cur = std::max(opts_.tol, 1e-3);
  const double eps_floor = std::max(opts_.tol * 1e-8, 1e-14);
  Candidate best;
  int last_refactor_iter = 0;
  int iter = 0;

  QpSolution out;
  out.status = SolveStatus::iteration_limit;

  for (iter = 1; iter <= opts_.max_iter; ++iter) {
    y_prev = y;
    rhs.head(n_) = sigma_ * x - qs_;
    rhs.tail(m_) = z - rho_inv_.cwiseProduct(y);
    sol = kkt_.solve(rhs);
    ztilde = z + rho_inv_.cwiseProduct(sol.tail(m_) - y);

    const double a = opts_.alpha;
    x = a * sol.head(n_) + (1 - a) * x;
    zr = a * ztilde + (1 - a) * z;
    z = (zr + rho_inv_.cwiseProduct(y)).cwiseMax(ls_).cwiseMin(us_);
    y += rho_.cwiseProduct(zr - z);

    if (iter % opts_.check_interval != 0 && iter != opts_.max_iter) continue;

    Vec xu = col_scale_.cwiseProduct(x);
    Vec zu = z.cwiseQuotient(row_scale_);
    Vec yu = row_scale_.cwiseProduct(y) / cost_scale_;
    Vec ax = A_ * xu;
    Vec aty = A_.transpose() * yu;
    Vec px = p_.cwiseProduct(xu);
    const double r_prim = m_ > 0 ? (ax - zu).cwiseAbs().maxCoeff() : 0.0;
    const double r_dual = (px + q_ + aty).cwiseAbs().maxCoeff();
    const double denom_p = std::max({m_ > 0 ? ax.cwiseAbs().maxCoeff() : 0.0,
                                     m_ > 0 ? zu.cwiseAbs().maxCoeff() : 0.0, 1.0});
    const double denom_d = std::max({px.cwiseAbs().maxCoeff(), aty.cwiseAbs().maxCoeff(),
                                     q_.size() > 0 ? q_.cwiseAbs().maxCoeff() : 0.0, 1.0});

    if (r_prim <= eps_cur * denom_p && r_dual <= eps_cur * denom_d) {
      Candidate cand = extract(xu, yu);
      if (!best.valid || cand.kkt.max_residual() < best.kkt.max_residual()) best = cand;
      if (cand.kkt.max_residual() > opts_.tol) {
        Candidate pol = polish(xu, yu);
        if (pol.valid && (!best.valid || pol.kkt.max_residual() < best.kkt.max_residual()))
          best = pol;
      }
      if (best.valid && best.kkt.max_residual() <= opts_.tol) {
        out.status = SolveStatus::optimal;
        break;
      }
      eps_cur = std::max(eps_cur * 0.1, eps_floor);
      if (eps_cur <= eps_floor && best.valid) {
        // residuals cannot shrink further in double precision
        out.status = best.kkt.max_residual() <= opts_.tol ? SolveStatus::optimal
                                                          : SolveStatus::iteration_limit;
        break;
      }
    }

    Vec dy = row_scale_.cwiseProduct(y - y_prev) / cost_scale_;
    std::string cert_rows;
    if (primal_infeasibility_certificate(dy, &cert_rows)) {
      out.status = SolveStatus::infeasible;
      out.diagnostic = cert_rows;
      break;
    }

    if (opts_.adaptive_rho && iter - last_refactor_iter >= kMinItersBetweenRefactor) {
      const double ratio = std::sqrt((r_prim / denom_p) / std::max(r_dual / denom_d, 1e-16));
      if (ratio > kRhoAdaptThreshold || ratio < 1.0 / kRhoAdaptThreshold) {
        build_rho(rho_bar_ * ratio);
        factorize();
        last_refactor_iter = iter;
      }
    }
  }

  if (out.status == SolveStatus::infeasible) {
    out.x = Vec::Zero(n_);
    out.multipliers.eq = Vec::Zero(me_);
    out.multipliers.ineq = Vec::Zero(mi_);
    out.multipliers.lower = Vec::Zero(n_);
    out.multipliers.upper = Vec::Zero(n_);
    out.objective = 0;
    out.iterations = iter;
    return out;
  }

  if (!best.valid) {
    Vec xu = col_scale_.cwiseProduct(x);
    Vec yu = row_scale_.cwiseProduct(y) / cost_scale_;
    best = extract(xu, yu);
    Candidate pol = polish(xu, yu);
    if (pol.valid && pol.kkt.max_residual() < best.kkt.max_residual()) best = pol;
  }

  out.x = best.x;
  out.multipliers = best.mult;
  out.kkt = best.kkt;
  out.polished = best.polished;
  out.objective = qp_.objective(best.x);
  out.iterations = std::min(iter, opts_.max_iter);
  if (out.status != SolveStatus::optimal) {
    if (best.kkt.max_residual() <= opts_.tol) {
      out.status = SolveStatus::optimal;
    } else {
      std::ostringstream os;
      os << "stopped after " << out.iterations
         << " iterations, max KKT residual " << io::format_double(best.kkt.max_residual());
      out.diagnostic = os.str();
    }
  }
  return out;
}

} // namespace

QpSolution solve_qp(const QuadraticProgram& qp, const SolveOptions& opts) {
  qp.validate();
  if (!(opts.tol > 0) || !std::isfinite(opts.tol))
    throw ValidationError("solver tolerance must be positive");
  if (opts.max_iter < 1) throw ValidationError("solver iteration limit must be positive");
  AdmmSolver solver(qp, opts);
  QpSolution sol = solver.run();
  return sol;
}

} // namespace gridplan::qp
