#pragma once

#include <Eigen/Dense>

namespace qtrack::mpc {

// Convex quadratic program
//   minimize   0.5 z'Pz + q'z
//   subject to Ez = d,  Gz <= h.
// Either constraint block may be empty (zero rows).
struct QpProblem {
  Eigen::MatrixXd p;
  Eigen::VectorXd q;
  Eigen::MatrixXd e;
  Eigen::VectorXd d;
  Eigen::MatrixXd g;
  Eigen::VectorXd h;

  int num_vars() const { return static_cast<int>(q.size()); }
  // Throws std::invalid_argument on dimension mismatch or an asymmetric P.
  void validate() const;
};

enum class QpStatus {
  kSolved,
  kMaxIterations,
  kPrimalInfeasible,
  kInvalidProblem,
};

struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd y_eq;
  Eigen::VectorXd y_ineq;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  QpStatus status = QpStatus::kInvalidProblem;

  bool solved() const { return status == QpStatus::kSolved; }
};

struct QpSettings {
  double rho = 0.1;
  double rho_eq_scale = 100.0;
  double sigma = 1e-6;
  double alpha = 1.6;
  double tol = 1e-6;
  int max_iter = 4000;
  int check_every = 10;
  bool polish = true;
  // Rejects problems whose Hessian has an eigenvalue below -psd_tol.
  double psd_tol = 1e-8;
};

// Operator-splitting solver with a fixed penalty parameter. Deterministic:
// identical inputs produce identical iterates.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = QpSettings{});

// Same solver seeded with a primal/dual guess from a previous solve.
QpSolution solve_qp_warm(const QpProblem& problem, const QpSettings& settings,
                         const Eigen::VectorXd& z0, const Eigen::VectorXd& y_eq0,
                         const Eigen::VectorXd& y_ineq0);

// Closed-form KKT solve for the equality-constrained case (no G rows).
// Used as an agreement oracle for the iterative solver.
Eigen::VectorXd solve_equality_qp(const Eigen::MatrixXd& p, const Eigen::VectorXd& q,
                                  const Eigen::MatrixXd& e, const Eigen::VectorXd& d);

}  // namespace qtrack::mpc
