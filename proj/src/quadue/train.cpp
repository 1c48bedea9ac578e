#include "qtrack/quadue/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "qtrack/nn/checkpoint.hpp"

namespace qtrack::quadue {

void TrainerConfig::validate() const {
  if (buffer_capacity == 0) throw std::invalid_argument("trainer: buffer_capacity must be > 0");
  if (warmup_transitions < 1) throw std::invalid_argument("trainer: warmup_transitions must be >= 1");
  if (train_every < 1) throw std::invalid_argument("trainer: train_every must be >= 1");
  if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0)
    throw std::invalid_argument("trainer: epsilon bounds must lie in [0, 1]");
  if (epsilon_anneal_episodes < 1)
    throw std::invalid_argument("trainer: epsilon_anneal_episodes must be >= 1");
  if (probe_every < 1) throw std::invalid_argument("trainer: probe_every must be >= 1");
  if (probe_draws < 1) throw std::invalid_argument("trainer: probe_draws must be >= 1");
  if (probe_full_cap < 1) throw std::invalid_argument("trainer: probe_full_cap must be >= 1");
}

void write_curves_csv(const std::string& path, const std::vector<CurveRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("trainer: cannot open " + path);
  out << "episode,return,critic_loss,actor_loss,grad_norm_sq,kappa_hat\n";
  out.precision(10);
  for (const CurveRow& r : rows) {
    out << r.episode << ',' << r.episode_return << ',' << r.critic_loss << ',' << r.actor_loss
        << ',' << r.grad_sq << ',' << r.kappa_hat << '\n';
  }
}

QuadueTrainer::QuadueTrainer(const AgentConfig& agent_cfg, const TrainerConfig& cfg, int obs_dim,
                             int plant_state_dim, int plant_input_dim)
    : cfg_(cfg),
      agent_(agent_cfg, obs_dim, plant_state_dim, plant_input_dim),
      buffer_(cfg.buffer_capacity),
      rng_(agent_cfg.seed ^ 0x9e3779b97f4a7c15ULL) {
  cfg_.validate();
}

double QuadueTrainer::epsilon(int episode) const {
  const double frac =
      std::clamp(static_cast<double>(episode) / cfg_.epsilon_anneal_episodes, 0.0, 1.0);
  return cfg_.epsilon_start + (cfg_.epsilon_end - cfg_.epsilon_start) * frac;
}

Eigen::VectorXd QuadueTrainer::select_action(const Eigen::VectorXd& s, int episode, bool eval) {
  if (eval) return agent_.act(s);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng_) < epsilon(episode)) return Eigen::VectorXd::Zero(agent_.action_dim());
  return agent_.act_noisy(s, agent_.config().noise_std, rng_);
}

std::optional<TrainLosses> QuadueTrainer::observe(const Transition& t) {
  buffer_.insert(t);
  ++env_steps_;
  if (aborted_) return std::nullopt;
  if (buffer_.size() < static_cast<std::size_t>(cfg_.warmup_transitions)) return std::nullopt;
  if (buffer_.size() < static_cast<std::size_t>(agent_.config().batch)) return std::nullopt;
  if (env_steps_ % cfg_.train_every != 0) return std::nullopt;

  const TrainLosses losses = agent_.train_step(buffer_, rng_);
  ++updates_;
  record_.push_step(losses.critic_grad_sq);
  if (losses.diverged) {
    if (!cfg_.nan_checkpoint_path.empty())
      save_checkpoint(cfg_.nan_checkpoint_path, "{\"reason\":\"non-finite loss\"}");
    aborted_ = true;
    return losses;
  }
  ep_critic_sum_ += losses.critic;
  ep_actor_sum_ += losses.actor;
  ep_grad_sq_sum_ += losses.critic_grad_sq;
  ++ep_update_count_;
  if (updates_ % cfg_.probe_every == 0) probe();
  return losses;
}

void QuadueTrainer::probe() {
  const std::size_t pool = std::min(buffer_.size(), static_cast<std::size_t>(cfg_.probe_full_cap));
  std::vector<size_t> all(pool);
  std::iota(all.begin(), all.end(), 0);
  const Eigen::VectorXd g_ref = agent_.critic_gradient(buffer_, all);

  const int batch = agent_.config().batch;
  double batch_var = 0.0;
  double single_var = 0.0;
  for (int d = 0; d < cfg_.probe_draws; ++d) {
    const std::vector<size_t> mb = buffer_.sample_indices(static_cast<std::size_t>(batch), rng_);
    batch_var += (agent_.critic_gradient(buffer_, mb) - g_ref).squaredNorm();
    const std::vector<size_t> one = buffer_.sample_indices(1, rng_);
    single_var += (agent_.critic_gradient(buffer_, one) - g_ref).squaredNorm();
  }
  batch_var /= cfg_.probe_draws;
  single_var /= cfg_.probe_draws;
  record_.push_probe(batch_var, single_var);
}

double QuadueTrainer::current_kappa_hat() const {
  if (record_.minibatch_var.empty() || record_.single_var.empty()) return 0.0;
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const double sigma_sq =
      record_.sigma_sq_configured > 0.0 ? record_.sigma_sq_configured : mean(record_.single_var);
  if (sigma_sq <= 0.0) return 0.0;
  return mean(record_.minibatch_var) / sigma_sq;
}

void QuadueTrainer::end_episode(int episode, double episode_return) {
  CurveRow row;
  row.episode = episode;
  row.episode_return = episode_return;
  if (ep_update_count_ > 0) {
    row.critic_loss = ep_critic_sum_ / ep_update_count_;
    row.actor_loss = ep_actor_sum_ / ep_update_count_;
    row.grad_sq = ep_grad_sq_sum_ / ep_update_count_;
  }
  row.kappa_hat = current_kappa_hat();
  curves_.push_back(row);
  ep_critic_sum_ = ep_actor_sum_ = ep_grad_sq_sum_ = 0.0;
  ep_update_count_ = 0;
}

void QuadueTrainer::save_checkpoint(const std::string& path,
                                    const std::string& metadata_json) const {
  nn::Checkpoint ck;
  ck.nets["actor"] = {agent_.actor_spec(), agent_.actor_theta()};
  ck.nets["critic"] = {agent_.critic_spec(), agent_.critic_theta()};
  ck.nets["actor_target"] = {agent_.actor_spec(), agent_.actor_target_theta()};
  ck.nets["critic_target"] = {agent_.critic_spec(), agent_.critic_target_theta()};
  ck.metadata_json = metadata_json;
  nn::save_checkpoint(path, ck);
}

}  // namespace qtrack::quadue
