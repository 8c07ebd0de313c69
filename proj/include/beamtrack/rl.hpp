#pragma once

#include <functional>
#include <vector>

#include "beamtrack/channel.hpp"
#include "beamtrack/link.hpp"
#include "beamtrack/neural.hpp"
#include "beamtrack/scenario.hpp"

namespace beamtrack {

struct Observation {
  double beam_angle = 0.0;        // current beam direction, radians
  double y_re = 0.0;              // latest observed pilot/data signal
  double y_im = 0.0;
  long slots_since_tracking = 0;  // T
};

struct Action {
  double beam_direction = 0.0;  // radians in [0, pi]
  double track_intent = 0.0;    // in [0, 1]; >= 0.5 spends a tracking slot
};

struct AgentConfig {
  double gamma = 0.9;
  double lr_actor = 1e-4;
  double lr_critic = 1e-4;
  double tau_mix = 0.01;       // target-network blend per step
  int batch_size = 16;
  int memory_capacity = 5000;
  int slots_per_step = 20;
  int episodes = 300;
  int max_steps = 1000;        // safety cap per episode
  int hidden = 200;
  double noise_sigma = 0.3;    // initial exploration std, normalized units
  double noise_decay = 0.9995; // per environment step
  int warmup_batches = 10;     // updates start at warmup_batches * batch_size
  double packet_bonus = 0.0;   // optional reward per delivered packet
  bool actor_output_relu = false;  // literal ReLU+clamp output instead of sigmoid
  int eval_episodes = 5;
};

struct TransitionTuple {
  Observation state;
  Action action;
  double reward = 0.0;
  Observation next;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);
  void push(const TransitionTuple& t);
  int size() const { return int(items_.size()); }
  int capacity() const { return capacity_; }
  // Uniform with replacement. Throws when fewer than m items are stored.
  std::vector<TransitionTuple> sample(int m, Rng& rng) const;

 private:
  int capacity_;
  int cursor_ = 0;
  std::vector<TransitionTuple> items_;
};

// One agent step = slots_per_step transmission slots. When track_intent
// crosses 0.5 the first slot re-steers the beam to beam_direction and counts
// as tracking; all other slots carry data packets.
class BeamEnv {
 public:
  BeamEnv(const ScenarioConfig& scenario, ChannelSource& source, const ChannelConfig& channel,
          const AgentConfig& agent);

  Observation reset(Rng& rng);

  struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    int packets = 0;
    int failures = 0;
    int tracking = 0;
  };

  StepResult step(const Action& action, Rng& rng);

  const DelayLedger& ledger() const { return ledger_; }
  double slot_duration() const { return scenario_.slot_duration; }
  int max_env_steps() const;

 private:
  ScenarioConfig scenario_;
  ChannelSource& source_;
  ChannelConfig channel_;
  int slots_per_step_;
  double packet_bonus_;
  double phi_bar_ = 0.0;
  long slot_ = 0;
  long total_slots_ = 0;
  long slots_since_tracking_ = 0;
  double last_y_re_ = 0.0, last_y_im_ = 0.0;
  // Snapshot already drawn for the reset pilot; replayed as the first slot.
  ChannelSnapshot pending_first_;
  bool has_pending_first_ = false;
  DelayLedger ledger_;
};

// Observation/action scaling used on both actor and critic inputs.
Eigen::Vector4d normalized_observation(const Observation& obs, const AgentConfig& agent,
                                       double noise_variance);
Eigen::Vector2d normalized_action(const Action& a);
Action action_from_normalized(const Eigen::Vector2d& v, bool clamp_relu_output);

class DdpgAgent {
 public:
  DdpgAgent(const AgentConfig& cfg, double noise_variance, Rng& init_rng);

  Action act(const Observation& obs) const;
  Action act_noisy(const Observation& obs, double sigma, Rng& rng) const;

  // Minimizes the squared TD error against the target networks; returns the
  // batch loss before the optimizer step.
  double critic_update(const std::vector<TransitionTuple>& batch);
  // Ascends mean_i Q(s_i, actor(s_i)); returns the objective before the step.
  double actor_update(const std::vector<TransitionTuple>& batch);
  void soft_update_targets();

  const AgentConfig& config() const { return cfg_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  void set_actor(Mlp net);

 private:
  AgentConfig cfg_;
  double noise_variance_;
  Mlp actor_, critic_, target_actor_, target_critic_;
  AdamState opt_actor_, opt_critic_;
};

struct EpisodeLog {
  int episode = 0;
  int steps = 0;
  long ep_packet = 0;
  double ep_reward = 0.0;
  double avg_delay_ms = 0.0;
  double wall_seconds = 0.0;
};

// Full training loop: exploration noise decays geometrically per step,
// updates start once the buffer holds warmup_batches * batch_size tuples.
// wall_seconds stays 0 unless timing is requested (keeps logs reproducible).
std::vector<EpisodeLog> train(DdpgAgent& agent, ReplayBuffer& buffer, const ScenarioConfig& scenario,
                              ChannelSource& source, const ChannelConfig& channel, Rng& rng,
                              bool timing = false);

using Policy = std::function<Action(const Observation&)>;

struct EvalResult {
  DelayLedger ledger;           // summed over episodes
  double mean_delay_ms = 0.0;   // mean of per-episode average delays;
                                // +inf when an episode delivers no packet
  double mean_packets = 0.0;
};

EvalResult evaluate(const Policy& policy, const ScenarioConfig& scenario, ChannelSource& source,
                    const ChannelConfig& channel, const AgentConfig& agent, int episodes, Rng& rng);

Policy greedy_policy(const DdpgAgent& agent);

}  // namespace beamtrack
