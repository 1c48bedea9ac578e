#include "qtrack/quadue/agent.hpp"

#include <cmath>
#include <stdexcept>

#include "qtrack/distrl/loss.hpp"

namespace qtrack::quadue {
namespace {

std::vector<int> make_widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> widths;
  widths.reserve(hidden.size() + 2);
  widths.push_back(in);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  return widths;
}

}  // namespace

RlStateCodec::RlStateCodec() { scale = Eigen::VectorXd::Ones(dim()); }

Eigen::VectorXd RlStateCodec::encode(const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref,
                                     const Eigen::VectorXd& u_ref, const Eigen::Vector3d& n_f,
                                     const Eigen::MatrixXd& metric) const {
  if (x.size() != state_dim || x_ref.size() != state_dim || u_ref.size() != input_dim) {
    throw std::invalid_argument("codec: state or input width mismatch");
  }
  if (metric.rows() != state_dim || metric.cols() != state_dim) {
    throw std::invalid_argument("codec: metric width mismatch");
  }
  Eigen::VectorXd s(dim());
  s.head(state_dim) = x - x_ref;
  s.segment(state_dim, input_dim) = u_ref;
  s.segment(state_dim + input_dim, 3) = n_f;
  s.tail(ccm::vech_size(state_dim)) = ccm::vech_symmetric(metric);
  if (!s.allFinite()) throw std::invalid_argument("codec: non-finite feature");
  return s.cwiseQuotient(scale);
}

void AgentConfig::validate() const {
  if (n_quantiles < 1) throw std::invalid_argument("agent: need at least one quantile");
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("agent: gamma outside [0,1)");
  if (lr_actor <= 0.0 || lr_critic <= 0.0) throw std::invalid_argument("agent: learning rates");
  if (polyak <= 0.0 || polyak > 1.0) throw std::invalid_argument("agent: polyak rate");
  if (a_max <= 0.0 || noise_std < 0.0) throw std::invalid_argument("agent: action bounds");
  if (batch < 1) throw std::invalid_argument("agent: batch size");
}

UncertaintyAgent::UncertaintyAgent(const AgentConfig& cfg, int obs_dim, int plant_state_dim,
                                   int plant_input_dim)
    : cfg_(cfg),
      obs_dim_(obs_dim),
      plant_state_dim_(plant_state_dim),
      plant_input_dim_(plant_input_dim) {
  cfg_.validate();
  if (obs_dim < 1 || plant_state_dim < 1 || plant_input_dim < 0) {
    throw std::invalid_argument("agent: dimensions");
  }
  action_dim_ = (1 + plant_input_dim) * ccm::vech_size(plant_state_dim);

  actor_spec_.widths = make_widths(obs_dim_, cfg_.actor_hidden, action_dim_);
  actor_spec_.activation = nn::Activation::Relu;
  actor_spec_.output = nn::OutputTransform::ScaledTanh;
  actor_spec_.output_scale = cfg_.a_max;
  actor_spec_.validate();

  critic_spec_.widths = make_widths(obs_dim_ + action_dim_, cfg_.critic_hidden, cfg_.n_quantiles);
  critic_spec_.activation = nn::Activation::Relu;
  critic_spec_.output = nn::OutputTransform::Identity;
  critic_spec_.validate();

  actor_theta_ = nn::init_params(actor_spec_, cfg_.seed);
  critic_theta_ = nn::init_params(critic_spec_, cfg_.seed + 1);
  actor_target_ = actor_theta_;
  critic_target_ = critic_theta_;

  actor_opt_.lr = cfg_.lr_actor;
  critic_opt_.lr = cfg_.lr_critic;
}

void UncertaintyAgent::sync_targets() {
  actor_target_ = actor_theta_;
  critic_target_ = critic_theta_;
}

Eigen::VectorXd UncertaintyAgent::act(const Eigen::VectorXd& s) const {
  return nn::forward(actor_spec_, actor_theta_, s);
}

Eigen::VectorXd UncertaintyAgent::act_noisy(const Eigen::VectorXd& s, double sigma,
                                            std::mt19937_64& rng) const {
  Eigen::VectorXd a = act(s);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (int i = 0; i < a.size(); ++i) a[i] += noise(rng);
  }
  return a.cwiseMax(-cfg_.a_max).cwiseMin(cfg_.a_max);
}

Eigen::MatrixXd UncertaintyAgent::critic_input(const Eigen::MatrixXd& s,
                                               const Eigen::MatrixXd& a) const {
  Eigen::MatrixXd input(obs_dim_ + action_dim_, s.cols());
  input.topRows(obs_dim_) = s;
  input.bottomRows(action_dim_) = a;
  return input;
}

Eigen::VectorXd UncertaintyAgent::critic_quantiles(const Eigen::VectorXd& s,
                                                   const Eigen::VectorXd& a) const {
  Eigen::VectorXd input(obs_dim_ + action_dim_);
  input << s, a;
  return nn::forward(critic_spec_, critic_theta_, input);
}

double UncertaintyAgent::critic_mean(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  return critic_quantiles(s, a).mean();
}

void UncertaintyAgent::action_to_matrices(const Eigen::VectorXd& a, Eigen::MatrixXd* mu1,
                                          std::vector<Eigen::MatrixXd>* mu2) const {
  const int block = ccm::vech_size(plant_state_dim_);
  if (a.size() != action_dim_) throw std::invalid_argument("agent: action width mismatch");
  if (mu1 != nullptr) *mu1 = ccm::unvech_symmetric(a.head(block), plant_state_dim_);
  if (mu2 != nullptr) {
    mu2->resize(static_cast<size_t>(plant_input_dim_));
    for (int j = 0; j < plant_input_dim_; ++j) {
      (*mu2)[static_cast<size_t>(j)] =
          ccm::unvech_symmetric(a.segment(block * (1 + j), block), plant_state_dim_);
    }
  }
}

TrainLosses UncertaintyAgent::train_step(const ReplayBuffer& buffer, std::mt19937_64& rng) {
  TrainLosses out;
  const int b = cfg_.batch;
  if (buffer.size() < static_cast<size_t>(b)) {
    throw std::logic_error("agent: buffer smaller than one batch");
  }
  const std::vector<size_t> idx = buffer.sample_indices(static_cast<size_t>(b), rng);
  const int n = cfg_.n_quantiles;

  Eigen::MatrixXd s(obs_dim_, b), a(action_dim_, b), s_next(obs_dim_, b);
  Eigen::VectorXd r(b);
  Eigen::VectorXd not_done(b);
  for (int i = 0; i < b; ++i) {
    const Transition& t = buffer.at(idx[static_cast<size_t>(i)]);
    s.col(i) = t.s;
    a.col(i) = t.a;
    s_next.col(i) = t.s_next;
    r[i] = t.r;
    not_done[i] = t.done ? 0.0 : 1.0;
  }

  // Distributional Bellman targets through the target networks.
  const Eigen::MatrixXd a_next = nn::forward_batch(actor_spec_, actor_target_, s_next);
  const Eigen::MatrixXd q_next =
      nn::forward_batch(critic_spec_, critic_target_, critic_input(s_next, a_next));
  Eigen::MatrixXd y(n, b);
  for (int i = 0; i < b; ++i) {
    y.col(i) = Eigen::VectorXd::Constant(n, r[i]) + cfg_.gamma * not_done[i] * q_next.col(i);
  }

  nn::ForwardCache critic_cache;
  const Eigen::MatrixXd q =
      nn::forward_batch(critic_spec_, critic_theta_, critic_input(s, a), &critic_cache);
  Eigen::MatrixXd critic_cotangent(n, b);
  double critic_loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const distrl::LossResult res = distrl::quantile_huber_loss(q.col(i), y.col(i), cfg_.kappa_h);
    critic_loss += res.loss / b;
    critic_cotangent.col(i) = res.grad / b;
  }
  const nn::BackwardResult critic_back =
      nn::backward_batch(critic_spec_, critic_theta_, critic_cache, critic_cotangent);
  out.critic = critic_loss;
  out.critic_grad_sq = critic_back.dtheta.squaredNorm();
  if (!std::isfinite(critic_loss) || !critic_back.dtheta.allFinite()) {
    out.diverged = true;
    return out;
  }
  critic_opt_.step(critic_theta_, critic_back.dtheta);

  // Actor ascends the critic's quantile mean at its own action.
  nn::ForwardCache actor_cache;
  const Eigen::MatrixXd a_pi = nn::forward_batch(actor_spec_, actor_theta_, s, &actor_cache);
  nn::ForwardCache critic_pi_cache;
  const Eigen::MatrixXd q_pi =
      nn::forward_batch(critic_spec_, critic_theta_, critic_input(s, a_pi), &critic_pi_cache);
  const double actor_objective = q_pi.mean();

  const Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(n, b, -1.0 / (n * b));
  const nn::BackwardResult through_critic =
      nn::backward_batch(critic_spec_, critic_theta_, critic_pi_cache, dq);
  const Eigen::MatrixXd da = through_critic.dinput.bottomRows(action_dim_);
  const nn::BackwardResult actor_back =
      nn::backward_batch(actor_spec_, actor_theta_, actor_cache, da);
  out.actor = -actor_objective;
  if (!std::isfinite(actor_objective) || !actor_back.dtheta.allFinite()) {
    out.diverged = true;
    return out;
  }
  actor_opt_.step(actor_theta_, actor_back.dtheta);

  // Polyak target mixing.
  actor_target_ += cfg_.polyak * (actor_theta_ - actor_target_);
  critic_target_ += cfg_.polyak * (critic_theta_ - critic_target_);
  return out;
}

Eigen::VectorXd UncertaintyAgent::critic_gradient(const ReplayBuffer& buffer,
                                                  const std::vector<size_t>& idx) const {
  const int b = static_cast<int>(idx.size());
  if (b == 0) throw std::invalid_argument("agent: empty gradient batch");
  const int n = cfg_.n_quantiles;
  Eigen::MatrixXd s(obs_dim_, b), a(action_dim_, b), s_next(obs_dim_, b);
  Eigen::VectorXd r(b), not_done(b);
  for (int i = 0; i < b; ++i) {
    const Transition& t = buffer.at(idx[static_cast<size_t>(i)]);
    s.col(i) = t.s;
    a.col(i) = t.a;
    s_next.col(i) = t.s_next;
    r[i] = t.r;
    not_done[i] = t.done ? 0.0 : 1.0;
  }
  const Eigen::MatrixXd a_next = nn::forward_batch(actor_spec_, actor_target_, s_next);
  const Eigen::MatrixXd q_next =
      nn::forward_batch(critic_spec_, critic_target_, critic_input(s_next, a_next));
  nn::ForwardCache cache;
  const Eigen::MatrixXd q =
      nn::forward_batch(critic_spec_, critic_theta_, critic_input(s, a), &cache);
  Eigen::MatrixXd cotangent(n, b);
  for (int i = 0; i < b; ++i) {
    const Eigen::VectorXd y =
        Eigen::VectorXd::Constant(n, r[i]) + cfg_.gamma * not_done[i] * q_next.col(i);
    cotangent.col(i) = distrl::quantile_huber_loss(q.col(i), y, cfg_.kappa_h).grad / b;
  }
  return nn::backward_batch(critic_spec_, critic_theta_, cache, cotangent).dtheta;
}

}  // namespace qtrack::quadue
