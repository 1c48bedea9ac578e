#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qtrack/quadue/agent.hpp"
#include "qtrack/quadue/diagnostics.hpp"
#include "qtrack/quadue/replay.hpp"

namespace qtrack::quadue {

struct TrainerConfig {
  std::size_t buffer_capacity = 10000;
  int warmup_transitions = 512;  // no updates until the buffer holds this many
  int train_every = 1;           // environment steps per gradient update
  double epsilon_start = 0.5;    // probability of the zero-correction option
  double epsilon_end = 0.0;
  int epsilon_anneal_episodes = 100;
  int probe_every = 200;    // gradient-noise probe cadence, in updates
  int probe_draws = 4;      // minibatch / single-sample draws per probe
  int probe_full_cap = 2048;  // transitions in the reference gradient
  std::string nan_checkpoint_path;  // where to dump parameters on divergence

  void validate() const;
};

struct CurveRow {
  int episode = 0;
  double episode_return = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double grad_sq = 0.0;
  double kappa_hat = 0.0;
};

void write_curves_csv(const std::string& path, const std::vector<CurveRow>& rows);

/* Owns the agent, replay buffer, and diagnostics of one training run.
 * The caller drives the environment and feeds transitions; the trainer
 * decides when to update, probes gradient noise, switches between the
 * zero-correction and actor-correction options early in training, and
 * checkpoints then halts if a loss turns non-finite. */
class QuadueTrainer {
 public:
  QuadueTrainer(const AgentConfig& agent_cfg, const TrainerConfig& cfg, int obs_dim,
                int plant_state_dim, int plant_input_dim);

  // Zero correction with probability epsilon(episode); otherwise the actor
  // plus exploration noise. eval bypasses both randomizations.
  Eigen::VectorXd select_action(const Eigen::VectorXd& s, int episode, bool eval = false);

  double epsilon(int episode) const;

  // Stores the transition and runs due gradient updates. Returns the last
  // update's losses when at least one ran.
  std::optional<TrainLosses> observe(const Transition& t);

  void end_episode(int episode, double episode_return);

  bool aborted() const { return aborted_; }
  void save_checkpoint(const std::string& path, const std::string& metadata_json = "{}") const;

  UncertaintyAgent& agent() { return agent_; }
  const UncertaintyAgent& agent() const { return agent_; }
  ReplayBuffer& buffer() { return buffer_; }
  const DiagnosticsRecord& record() const { return record_; }
  const std::vector<CurveRow>& curves() const { return curves_; }
  int updates() const { return updates_; }

 private:
  void probe();
  double current_kappa_hat() const;

  TrainerConfig cfg_;
  UncertaintyAgent agent_;
  ReplayBuffer buffer_;
  DiagnosticsRecord record_;
  std::mt19937_64 rng_;
  std::vector<CurveRow> curves_;

  int env_steps_ = 0;
  int updates_ = 0;
  bool aborted_ = false;
  double ep_critic_sum_ = 0.0;
  double ep_actor_sum_ = 0.0;
  double ep_grad_sq_sum_ = 0.0;
  int ep_update_count_ = 0;
};

}  // namespace qtrack::quadue
