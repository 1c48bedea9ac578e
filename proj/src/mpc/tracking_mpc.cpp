#include "qtrack/mpc/tracking_mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qtrack::mpc {
namespace {

constexpr int kNx = 13;
constexpr int kNu = 4;

Eigen::VectorXd default_h1() {
  Eigen::VectorXd h(kNx);
  h << 2.5e-2, 2.5e-2, 2.5e-2, 1e-3, 1e-3, 1e-3, 2.5e-3, 2.5e-3, 2.5e-3, 2.5e-3, 1e-5, 1e-5, 1e-5;
  return h;
}

void discretize(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double ts,
                Eigen::MatrixXd* ad, Eigen::MatrixXd* bd) {
  const Eigen::MatrixXd a2 = a * a;
  *ad = Eigen::MatrixXd::Identity(kNx, kNx) + ts * a + 0.5 * ts * ts * a2;
  *bd = (ts * Eigen::MatrixXd::Identity(kNx, kNx) + 0.5 * ts * ts * a) * b;
}

Eigen::MatrixXd psd_part(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

MpcConfig::MpcConfig() : h1_diag(default_h1()), h2_diag(Eigen::Vector4d::Constant(1.25e-4)) {}

void MpcConfig::validate() const {
  if (ts <= 0.0) throw std::invalid_argument("mpc: sampling period must be positive");
  if (horizon < 2) throw std::invalid_argument("mpc: horizon must be at least 2");
  if (h1_diag.size() != kNx || h2_diag.size() != kNu) {
    throw std::invalid_argument("mpc: weight dimensions");
  }
  if (h1_diag.minCoeff() <= 0.0 || h2_diag.minCoeff() <= 0.0) {
    throw std::invalid_argument("mpc: weights must be positive definite");
  }
  if (slack_weight <= 0.0 || omega_ccm < 0.0) {
    throw std::invalid_argument("mpc: contraction weights");
  }
}

Eigen::VectorXd state_deviation(const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref) {
  Eigen::VectorXd dx = x - x_ref;
  const double dot = x.segment<4>(6).dot(x_ref.segment<4>(6));
  if (dot < 0.0) dx.segment<4>(6) = -x.segment<4>(6) - x_ref.segment<4>(6);
  return dx;
}

QpProblem build_tracking_qp(const Eigen::VectorXd& x_now,
                            const std::vector<dyn::ReferencePoint>& window,
                            const Eigen::MatrixXd& chat, const Eigen::MatrixXd& metric,
                            const MpcConfig& cfg, const dyn::ModelParams& params,
                            const std::vector<Eigen::VectorXd>* prev_dx,
                            TrackingQpLayout* layout_out,
                            const Eigen::Vector3d& accel_offset) {
  cfg.validate();
  const int n_steps = cfg.horizon;
  if (static_cast<int>(window.size()) < n_steps + 1) {
    throw std::invalid_argument("mpc: reference window shorter than horizon");
  }
  if (chat.rows() != kNx || chat.cols() != kNx) {
    throw std::invalid_argument("mpc: contraction matrix must be 13x13");
  }
  const double t_max = params.thrust_max;
  for (int k = 0; k <= n_steps; ++k) {
    const Eigen::Vector4d& u_ref = window[static_cast<size_t>(k)].u;
    if (u_ref.minCoeff() < -1e-9 || u_ref.maxCoeff() > t_max + 1e-9) {
      throw std::invalid_argument("mpc: reference input outside thrust bounds");
    }
  }

  TrackingQpLayout layout;
  layout.horizon = n_steps;
  const bool hard = cfg.mode == ContractionMode::kHardLinearized;
  layout.n_slack = hard ? n_steps : 0;
  const int nz = layout.num_vars();

  QpProblem qp;
  qp.p = Eigen::MatrixXd::Zero(nz, nz);
  qp.q = Eigen::VectorXd::Zero(nz);

  Eigen::MatrixXd state_weight = 2.0 * cfg.h1_diag.asDiagonal();
  if (cfg.mode == ContractionMode::kSoftPenalty) {
    Eigen::MatrixXd c_sym = 0.5 * (chat + chat.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c_sym);
    const double scale = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (scale > 1.0) c_sym /= scale;
    state_weight += 2.0 * cfg.omega_ccm * psd_part(c_sym);
  }
  for (int k = 1; k <= n_steps; ++k) {
    qp.p.block(layout.dx_offset(k), layout.dx_offset(k), kNx, kNx) = state_weight;
  }
  for (int k = 0; k < n_steps; ++k) {
    qp.p.block(layout.du_offset(k), layout.du_offset(k), kNu, kNu) =
        2.0 * cfg.h2_diag.asDiagonal();
  }
  for (int k = 1; k <= n_steps; ++k) {
    if (hard) qp.p(layout.slack_offset(k), layout.slack_offset(k)) = 2.0 * cfg.slack_weight;
  }

  // Dynamics rows: dx_{k+1} = Ad_k dx_k + Bd_k du_k, dx_0 fixed.
  qp.e = Eigen::MatrixXd::Zero(n_steps * kNx, nz);
  qp.d = Eigen::VectorXd::Zero(n_steps * kNx);
  const Eigen::VectorXd dx0 = state_deviation(x_now, window[0].x);
  Eigen::VectorXd w_cont = Eigen::VectorXd::Zero(kNx);
  w_cont.segment<3>(3) = accel_offset;
  for (int k = 0; k < n_steps; ++k) {
    const auto& ref = window[static_cast<size_t>(k)];
    const auto [a, b] = dyn::linearize(ref.x, ref.u, params);
    Eigen::MatrixXd ad, bd;
    discretize(a, b, cfg.ts, &ad, &bd);
    const Eigen::VectorXd wd =
        (cfg.ts * Eigen::MatrixXd::Identity(kNx, kNx) + 0.5 * cfg.ts * cfg.ts * a) * w_cont;

    const int row = k * kNx;
    qp.e.block(row, layout.dx_offset(k + 1), kNx, kNx) = Eigen::MatrixXd::Identity(kNx, kNx);
    qp.e.block(row, layout.du_offset(k), kNx, kNu) = -bd;
    qp.d.segment(row, kNx) = wd;
    if (k == 0) {
      qp.d.segment(row, kNx) += ad * dx0;
    } else {
      qp.e.block(row, layout.dx_offset(k), kNx, kNx) = -ad;
    }
  }

  // Inequalities: thrust box on u_ref + du, slack positivity, and the
  // linearized contraction surrogate dx'C dx <= s.
  const int n_box = 2 * n_steps * kNu;
  const int n_ctr = hard ? 2 * n_steps : 0;
  qp.g = Eigen::MatrixXd::Zero(n_box + n_ctr, nz);
  qp.h = Eigen::VectorXd::Zero(n_box + n_ctr);
  int row = 0;
  for (int k = 0; k < n_steps; ++k) {
    const Eigen::Vector4d& u_ref = window[static_cast<size_t>(k)].u;
    qp.g.block(row, layout.du_offset(k), kNu, kNu) = Eigen::MatrixXd::Identity(kNu, kNu);
    qp.h.segment(row, kNu) = Eigen::Vector4d::Constant(t_max) - u_ref;
    row += kNu;
    qp.g.block(row, layout.du_offset(k), kNu, kNu) = -Eigen::MatrixXd::Identity(kNu, kNu);
    qp.h.segment(row, kNu) = u_ref;
    row += kNu;
  }
  if (hard) {
    // The certificate enters scaled to unit spectral norm and the
    // linearization points norm-clamped, so the surrogate rows stay O(1)
    // regardless of how large an estimate the uncertainty path produces.
    Eigen::MatrixXd c_sym = 0.5 * (chat + chat.transpose());
    {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c_sym);
      const double scale = eig.eigenvalues().cwiseAbs().maxCoeff();
      if (scale > 1.0) c_sym /= scale;
    }
    for (int k = 1; k <= n_steps; ++k) {
      Eigen::VectorXd dx_hat = Eigen::VectorXd::Zero(kNx);
      if (prev_dx != nullptr && !prev_dx->empty()) {
        // The previous solve's stage k+1 lives at this solve's stage-k time.
        const size_t idx = std::min(static_cast<size_t>(k), prev_dx->size() - 1);
        dx_hat = (*prev_dx)[idx];
        const double norm = dx_hat.norm();
        if (norm > 1.0) dx_hat /= norm;
      }
      qp.g.block(row, layout.dx_offset(k), 1, kNx) = 2.0 * (c_sym * dx_hat).transpose();
      qp.g(row, layout.slack_offset(k)) = -1.0;
      qp.h[row] = dx_hat.dot(c_sym * dx_hat);
      ++row;
      qp.g(row, layout.slack_offset(k)) = -1.0;
      qp.h[row] = 0.0;
      ++row;
    }
  }

  (void)metric;
  if (layout_out != nullptr) *layout_out = layout;
  return qp;
}

TrackingMpc::TrackingMpc(MpcConfig cfg, dyn::ModelParams params)
    : cfg_(std::move(cfg)), params_(params) {
  cfg_.validate();
  params_.validate();
}

void TrackingMpc::set_fallback_gain(std::shared_ptr<const ccm::FeedbackGain> gain) {
  fallback_gain_ = std::move(gain);
}

void TrackingMpc::set_disturbance(const Eigen::Vector3d& accel) {
  accel_offset_ = accel;
}

void TrackingMpc::reset() {
  warm_ = false;
  has_prediction_ = false;
  pred_dx_.clear();
  prev_solution_ = QpSolution{};
}

MpcStepInfo TrackingMpc::control_step(const Eigen::VectorXd& x_now,
                                      const std::vector<dyn::ReferencePoint>& window,
                                      const Eigen::MatrixXd& chat,
                                      const Eigen::MatrixXd& metric) {
  MpcStepInfo info;
  const Eigen::VectorXd dx0 = state_deviation(x_now, window[0].x);
  info.realized_energy = dx0.dot(metric * dx0);
  info.predicted_energy = has_prediction_ ? pending_predicted_energy_ : info.realized_energy;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (chat + chat.transpose()));
    info.chat_lmax = eig.eigenvalues().maxCoeff();
  }

  const Eigen::Vector4d u_ref0 = window[0].u;
  TrackingQpLayout layout;
  QpProblem qp;
  try {
    qp = build_tracking_qp(x_now, window, chat, metric, cfg_, params_,
                           warm_ ? &pred_dx_ : nullptr, &layout, accel_offset_);
  } catch (const std::exception&) {
    info.fallback = true;
  }

  QpSolution sol;
  if (!info.fallback) {
    QpSettings settings = cfg_.solver;
    if (warm_ && prev_solution_.z.size() == layout.num_vars()) {
      sol = solve_qp_warm(qp, settings, prev_solution_.z, prev_solution_.y_eq,
                          prev_solution_.y_ineq);
    } else {
      sol = solve_qp(qp, settings);
    }
    info.status = sol.status;
    info.iterations = sol.iterations;
    const bool usable = sol.status == QpStatus::kSolved ||
                        (sol.status == QpStatus::kMaxIterations && sol.z.allFinite() &&
                         sol.primal_residual < 1e-3);
    if (!usable) info.fallback = true;
  }

  if (info.fallback) {
    Eigen::Vector4d u = u_ref0;
    if (fallback_gain_) {
      u += fallback_gain_->gain(x_now) * dx0;
    }
    info.u = u.cwiseMax(0.0).cwiseMin(params_.thrust_max);
    warm_ = false;
    has_prediction_ = false;
    pred_dx_.clear();
    return info;
  }

  const Eigen::Vector4d du0 = sol.z.segment(layout.du_offset(0), kNu);
  info.u = (u_ref0 + du0).cwiseMax(0.0).cwiseMin(params_.thrust_max);
  if (layout.n_slack > 0) {
    double s_max = 0.0;
    for (int k = 1; k <= layout.horizon; ++k) {
      s_max = std::max(s_max, sol.z[layout.slack_offset(k)]);
    }
    info.slack_max = s_max;
  }

  pred_dx_.assign(static_cast<size_t>(layout.horizon), Eigen::VectorXd::Zero(kNx));
  for (int k = 1; k <= layout.horizon; ++k) {
    pred_dx_[static_cast<size_t>(k - 1)] = sol.z.segment(layout.dx_offset(k), kNx);
  }
  const Eigen::VectorXd& dx1 = pred_dx_.front();
  pending_predicted_energy_ = dx1.dot(metric * dx1);
  has_prediction_ = true;
  prev_solution_ = sol;
  warm_ = true;
  return info;
}

}  // namespace qtrack::mpc
