#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "qtrack/ccm/metric_net.hpp"
#include "qtrack/nn/mlp.hpp"
#include "qtrack/nn/optim.hpp"
#include "qtrack/quadue/replay.hpp"

namespace qtrack::quadue {

// Feature layout of the estimator's observation:
//   s = [x - x_ref (13) | u_ref (4) | n_f (3) | vech(M(x)) (state vech)].
struct RlStateCodec {
  int state_dim = 13;
  int input_dim = 4;

  int dim() const { return state_dim + input_dim + 3 + ccm::vech_size(state_dim); }
  Eigen::VectorXd scale;  // elementwise normalization, sized dim()

  RlStateCodec();
  Eigen::VectorXd encode(const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref,
                         const Eigen::VectorXd& u_ref, const Eigen::Vector3d& n_f,
                         const Eigen::MatrixXd& metric) const;
};

struct AgentConfig {
  int n_quantiles = 20;
  double gamma = 0.9995;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double polyak = 0.005;     // target mixing rate
  double a_max = 5.0;        // action infinity-norm bound
  double kappa_h = 1.0;      // Huber threshold of the quantile loss
  double noise_std = 0.1;    // exploration scale
  int batch = 256;
  std::vector<int> actor_hidden{128, 128};
  std::vector<int> critic_hidden{128, 128};
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainLosses {
  double critic = 0.0;
  double actor = 0.0;  // negated quantile-mean objective
  double critic_grad_sq = 0.0;
  bool diverged = false;
};

// Deterministic-policy agent with a quantile critic. The action is the
// half-vectorized pair (mu1, mu2 per input channel); state_dim here is the
// RL feature width, action layout is fixed by the plant state/input sizes.
class UncertaintyAgent {
 public:
  UncertaintyAgent(const AgentConfig& cfg, int obs_dim, int plant_state_dim, int plant_input_dim);

  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }
  int n_quantiles() const { return cfg_.n_quantiles; }
  const AgentConfig& config() const { return cfg_; }

  Eigen::VectorXd act(const Eigen::VectorXd& s) const;
  Eigen::VectorXd act_noisy(const Eigen::VectorXd& s, double sigma, std::mt19937_64& rng) const;

  // Critic quantile atoms for one (s, a) pair.
  Eigen::VectorXd critic_quantiles(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
  double critic_mean(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;

  // Splits an action into mu1 and the per-input-channel mu2 blocks.
  void action_to_matrices(const Eigen::VectorXd& a, Eigen::MatrixXd* mu1,
                          std::vector<Eigen::MatrixXd>* mu2) const;

  // One replay-driven update of critic, actor, and targets.
  TrainLosses train_step(const ReplayBuffer& buffer, std::mt19937_64& rng);

  // Critic minibatch gradient without applying it; used by the Theorem-5
  // diagnostics probes. Indices select the transitions.
  Eigen::VectorXd critic_gradient(const ReplayBuffer& buffer, const std::vector<size_t>& idx) const;

  // Parameter access for checkpointing.
  const nn::MlpSpec& actor_spec() const { return actor_spec_; }
  const nn::MlpSpec& critic_spec() const { return critic_spec_; }
  Eigen::VectorXd& actor_theta() { return actor_theta_; }
  Eigen::VectorXd& critic_theta() { return critic_theta_; }
  const Eigen::VectorXd& actor_theta() const { return actor_theta_; }
  const Eigen::VectorXd& critic_theta() const { return critic_theta_; }
  Eigen::VectorXd& actor_target_theta() { return actor_target_; }
  Eigen::VectorXd& critic_target_theta() { return critic_target_; }
  const Eigen::VectorXd& actor_target_theta() const { return actor_target_; }
  const Eigen::VectorXd& critic_target_theta() const { return critic_target_; }
  void sync_targets();

 private:
  Eigen::MatrixXd critic_input(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) const;

  AgentConfig cfg_;
  int obs_dim_ = 0;
  int plant_state_dim_ = 0;
  int plant_input_dim_ = 0;
  int action_dim_ = 0;

  nn::MlpSpec actor_spec_;
  nn::MlpSpec critic_spec_;
  Eigen::VectorXd actor_theta_;
  Eigen::VectorXd critic_theta_;
  Eigen::VectorXd actor_target_;
  Eigen::VectorXd critic_target_;
  nn::Optimizer actor_opt_;
  nn::Optimizer critic_opt_;
};

}  // namespace qtrack::quadue
