#include "qtrack/mpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qtrack::mpc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Workspace {
  Eigen::MatrixXd a;       // stacked [E; G]
  Eigen::VectorXd lo, hi;  // row bounds, equality rows have lo == hi
  Eigen::VectorXd rho;     // per-row penalty, fixed for the whole solve
  int n = 0;
  int m_eq = 0;
  int m_in = 0;
};

Workspace stack_constraints(const QpProblem& p, const QpSettings& s) {
  Workspace w;
  w.n = p.num_vars();
  w.m_eq = static_cast<int>(p.d.size());
  w.m_in = static_cast<int>(p.h.size());
  const int m = w.m_eq + w.m_in;
  w.a.resize(m, w.n);
  w.lo.resize(m);
  w.hi.resize(m);
  w.rho.resize(m);
  if (w.m_eq > 0) {
    w.a.topRows(w.m_eq) = p.e;
    w.lo.head(w.m_eq) = p.d;
    w.hi.head(w.m_eq) = p.d;
    w.rho.head(w.m_eq).setConstant(s.rho * s.rho_eq_scale);
  }
  if (w.m_in > 0) {
    w.a.bottomRows(w.m_in) = p.g;
    w.lo.tail(w.m_in).setConstant(-kInf);
    w.hi.tail(w.m_in) = p.h;
    w.rho.tail(w.m_in).setConstant(s.rho);
  }
  return w;
}

bool hessian_psd(const Eigen::MatrixXd& p, double tol) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(p);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd diag = ldlt.vectorD();
  const double scale = std::max(1.0, diag.cwiseAbs().maxCoeff());
  return diag.minCoeff() >= -tol * scale;
}

double primal_residual(const Workspace& w, const Eigen::VectorXd& az) {
  double r = 0.0;
  for (int i = 0; i < az.size(); ++i) {
    const double below = w.lo[i] - az[i];
    const double above = az[i] - w.hi[i];
    r = std::max(r, std::max(below, above));
  }
  return std::max(r, 0.0);
}

// Primal infeasibility certificate: a dual direction dy with A'dy ~ 0,
// support(dy) respecting the one-sided rows, and negative bound gap.
bool infeasibility_certificate(const Workspace& w, const Eigen::VectorXd& dy) {
  const double dy_norm = dy.lpNorm<Eigen::Infinity>();
  if (dy_norm < 1e-12) return false;
  const double eps = 1e-8 * dy_norm;
  if ((w.a.transpose() * dy).lpNorm<Eigen::Infinity>() > eps) return false;
  double gap = 0.0;
  for (int i = 0; i < dy.size(); ++i) {
    if (dy[i] > 0.0) {
      gap += w.hi[i] * dy[i];
    } else if (dy[i] < 0.0) {
      if (std::isinf(w.lo[i])) return false;
      gap += w.lo[i] * dy[i];
    }
  }
  return gap < -eps;
}

// Equality-constrained KKT solve used both for polishing and for the
// standalone oracle entry point. Returns false when the system is singular.
bool kkt_solve(const Eigen::MatrixXd& p, const Eigen::VectorXd& q,
               const Eigen::MatrixXd& act, const Eigen::VectorXd& rhs,
               Eigen::VectorXd* z, Eigen::VectorXd* nu) {
  const int n = static_cast<int>(q.size());
  const int ma = static_cast<int>(rhs.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + ma, n + ma);
  kkt.topLeftCorner(n, n) = p;
  if (ma > 0) {
    kkt.topRightCorner(n, ma) = act.transpose();
    kkt.bottomLeftCorner(ma, n) = act;
    kkt.bottomRightCorner(ma, ma) = -1e-12 * Eigen::MatrixXd::Identity(ma, ma);
  }
  Eigen::VectorXd full_rhs(n + ma);
  full_rhs.head(n) = -q;
  full_rhs.tail(ma) = rhs;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) return false;
  const Eigen::VectorXd sol = lu.solve(full_rhs);
  if (!sol.allFinite()) return false;
  *z = sol.head(n);
  *nu = sol.tail(ma);
  return true;
}

void compute_residuals(const QpProblem& p, const Workspace& w, const Eigen::VectorXd& z,
                       const Eigen::VectorXd& y, double* r_prim, double* r_dual) {
  *r_prim = primal_residual(w, w.a * z);
  *r_dual = (p.p * z + p.q + w.a.transpose() * y).lpNorm<Eigen::Infinity>();
}

// Recovers a cleaned solution by solving the KKT system on the active set.
bool polish(const QpProblem& p, const Workspace& w, QpSolution* sol) {
  std::vector<int> active;
  active.reserve(w.m_eq + w.m_in);
  for (int i = 0; i < w.m_eq; ++i) active.push_back(i);
  for (int i = w.m_eq; i < w.m_eq + w.m_in; ++i) {
    const double slack = w.hi[i] - w.a.row(i).dot(sol->z);
    if (sol->y_ineq[i - w.m_eq] > 1e-8 || slack < 1e-7) active.push_back(i);
  }
  const int ma = static_cast<int>(active.size());
  Eigen::MatrixXd act(ma, w.n);
  Eigen::VectorXd rhs(ma);
  for (int k = 0; k < ma; ++k) {
    act.row(k) = w.a.row(active[k]);
    rhs[k] = w.hi[active[k]];
  }
  Eigen::VectorXd z, nu;
  if (!kkt_solve(p.p, p.q, act, rhs, &z, &nu)) return false;

  Eigen::VectorXd y = Eigen::VectorXd::Zero(w.m_eq + w.m_in);
  bool dual_ok = true;
  for (int k = 0; k < ma; ++k) {
    if (active[k] >= w.m_eq && nu[k] < -1e-9) dual_ok = false;
    y[active[k]] = nu[k];
  }
  if (!dual_ok) return false;
  double r_prim = 0.0, r_dual = 0.0;
  compute_residuals(p, w, z, y, &r_prim, &r_dual);
  const double before = std::max(sol->primal_residual, sol->dual_residual);
  if (std::max(r_prim, r_dual) >= before) return false;
  sol->z = z;
  sol->y_eq = y.head(w.m_eq);
  sol->y_ineq = y.tail(w.m_in);
  sol->primal_residual = r_prim;
  sol->dual_residual = r_dual;
  return true;
}

QpSolution run_admm(const QpProblem& problem, const QpSettings& s, const Eigen::VectorXd& z0,
                    const Eigen::VectorXd& y0) {
  QpSolution out;
  problem.validate();
  const Workspace w = stack_constraints(problem, s);
  const int n = w.n;
  const int m = w.m_eq + w.m_in;

  if (!hessian_psd(problem.p, s.psd_tol)) {
    out.status = QpStatus::kInvalidProblem;
    return out;
  }

  Eigen::MatrixXd lhs = problem.p + s.sigma * Eigen::MatrixXd::Identity(n, n);
  if (m > 0) lhs.noalias() += w.a.transpose() * w.rho.asDiagonal() * w.a;
  const Eigen::LDLT<Eigen::MatrixXd> factor(lhs);

  Eigen::VectorXd x = z0;
  Eigen::VectorXd zc = w.a * x;  // constraint-space iterate
  for (int i = 0; i < m; ++i) zc[i] = std::clamp(zc[i], w.lo[i], w.hi[i]);
  Eigen::VectorXd y = y0;
  Eigen::VectorXd y_at_check = y;

  double r_prim = kInf, r_dual = kInf;
  int iter = 0;
  for (iter = 1; iter <= s.max_iter; ++iter) {
    Eigen::VectorXd rhs = s.sigma * x - problem.q;
    if (m > 0) rhs.noalias() += w.a.transpose() * (w.rho.asDiagonal() * zc - y);
    const Eigen::VectorXd x_tilde = factor.solve(rhs);
    const Eigen::VectorXd z_tilde = w.a * x_tilde;

    x = s.alpha * x_tilde + (1.0 - s.alpha) * x;
    Eigen::VectorXd z_relaxed = s.alpha * z_tilde + (1.0 - s.alpha) * zc;
    Eigen::VectorXd z_next(m);
    for (int i = 0; i < m; ++i) {
      const double v = z_relaxed[i] + y[i] / w.rho[i];
      z_next[i] = std::clamp(v, w.lo[i], w.hi[i]);
    }
    y += w.rho.asDiagonal() * (z_relaxed - z_next);
    zc = z_next;

    if (iter % s.check_every == 0 || iter == s.max_iter) {
      compute_residuals(problem, w, x, y, &r_prim, &r_dual);
      if (r_prim <= s.tol && r_dual <= s.tol) {
        out.status = QpStatus::kSolved;
        break;
      }
      if (infeasibility_certificate(w, y - y_at_check)) {
        out.status = QpStatus::kPrimalInfeasible;
        break;
      }
      y_at_check = y;
    }
  }
  if (out.status != QpStatus::kSolved && out.status != QpStatus::kPrimalInfeasible) {
    out.status = QpStatus::kMaxIterations;
  }

  out.z = x;
  out.y_eq = y.head(w.m_eq);
  out.y_ineq = y.tail(w.m_in);
  out.primal_residual = r_prim;
  out.dual_residual = r_dual;
  out.iterations = std::min(iter, s.max_iter);
  if (s.polish && out.status == QpStatus::kSolved) polish(problem, w, &out);
  return out;
}

}  // namespace

void QpProblem::validate() const {
  const int n = num_vars();
  if (p.rows() != n || p.cols() != n) throw std::invalid_argument("qp: P shape mismatch");
  if (!p.isApprox(p.transpose(), 1e-9)) throw std::invalid_argument("qp: P not symmetric");
  if (e.rows() != d.size() || (e.rows() > 0 && e.cols() != n)) {
    throw std::invalid_argument("qp: equality block shape mismatch");
  }
  if (g.rows() != h.size() || (g.rows() > 0 && g.cols() != n)) {
    throw std::invalid_argument("qp: inequality block shape mismatch");
  }
  if (!p.allFinite() || !q.allFinite() || !e.allFinite() || !d.allFinite() || !g.allFinite() ||
      !h.allFinite()) {
    throw std::invalid_argument("qp: non-finite problem data");
  }
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings) {
  const int n = problem.num_vars();
  const int m = static_cast<int>(problem.d.size() + problem.h.size());
  return run_admm(problem, settings, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m));
}

QpSolution solve_qp_warm(const QpProblem& problem, const QpSettings& settings,
                         const Eigen::VectorXd& z0, const Eigen::VectorXd& y_eq0,
                         const Eigen::VectorXd& y_ineq0) {
  const int n = problem.num_vars();
  const int m_eq = static_cast<int>(problem.d.size());
  const int m_in = static_cast<int>(problem.h.size());
  Eigen::VectorXd z = (z0.size() == n) ? z0 : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m_eq + m_in);
  if (y_eq0.size() == m_eq) y.head(m_eq) = y_eq0;
  if (y_ineq0.size() == m_in) y.tail(m_in) = y_ineq0.cwiseMax(0.0);
  return run_admm(problem, settings, z, y);
}

Eigen::VectorXd solve_equality_qp(const Eigen::MatrixXd& p, const Eigen::VectorXd& q,
                                  const Eigen::MatrixXd& e, const Eigen::VectorXd& d) {
  Eigen::VectorXd z, nu;
  if (!kkt_solve(p, q, e, d, &z, &nu)) {
    throw std::runtime_error("equality QP: singular KKT system");
  }
  return z;
}

}  // namespace qtrack::mpc
