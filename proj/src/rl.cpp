#include "beamtrack/rl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace beamtrack {

namespace {

constexpr double kPointingEps = 1e-9;
constexpr double kSnrRef = 100.0;  // 20 dB reference used for signal scaling

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

}  // namespace

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("replay buffer: capacity must be >= 1");
  items_.reserve(capacity);
}

void ReplayBuffer::push(const TransitionTuple& t) {
  if (int(items_.size()) < capacity_) {
    items_.push_back(t);
  } else {
    items_[cursor_] = t;  // overwrite oldest
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<TransitionTuple> ReplayBuffer::sample(int m, Rng& rng) const {
  if (m < 1) throw std::invalid_argument("replay buffer: sample size must be >= 1");
  if (int(items_.size()) < m) {
    throw std::runtime_error("replay buffer: " + std::to_string(items_.size()) +
                             " items stored, cannot sample " + std::to_string(m));
  }
  std::vector<TransitionTuple> batch;
  batch.reserve(m);
  for (int i = 0; i < m; ++i) {
    batch.push_back(items_[rng.index(items_.size())]);
  }
  return batch;
}

BeamEnv::BeamEnv(const ScenarioConfig& scenario, ChannelSource& source, const ChannelConfig& channel,
                 const AgentConfig& agent)
    : scenario_(scenario),
      source_(source),
      channel_(channel),
      slots_per_step_(agent.slots_per_step),
      packet_bonus_(agent.packet_bonus) {
  if (slots_per_step_ < 2) throw std::invalid_argument("env: slots_per_step must be >= 2");
}

int BeamEnv::max_env_steps() const {
  return int((source_.total_slots() + slots_per_step_ - 1) / slots_per_step_);
}

Observation BeamEnv::reset(Rng& rng) {
  source_.reset(rng);
  total_slots_ = source_.total_slots();
  slot_ = 0;
  slots_since_tracking_ = 0;
  ledger_ = DelayLedger{};
  phi_bar_ = los_angles(0.0, scenario_).phi_a;

  // Free aligned pilot so the first observation carries a signal sample.
  ChannelSnapshot first = source_.next(rng);
  const ObservationSignal y =
      observe(first, phi_bar_, M_PI - phi_bar_, channel_.n_rx, channel_.n_tx,
              channel_.effective_noise_variance(), rng, channel_.spacing);
  pending_first_ = first;
  has_pending_first_ = true;
  last_y_re_ = y.y_re;
  last_y_im_ = y.y_im;
  return {phi_bar_, last_y_re_, last_y_im_, slots_since_tracking_};
}

BeamEnv::StepResult BeamEnv::step(const Action& action, Rng& rng) {
  if (slot_ >= total_slots_) throw std::out_of_range("env: episode already complete");
  StepResult result;
  const double noise_variance = channel_.effective_noise_variance();
  const int slots_this_step = int(std::min<long>(slots_per_step_, total_slots_ - slot_));
  const bool track = action.track_intent >= 0.5;
  for (int i = 0; i < slots_this_step; ++i) {
    ChannelSnapshot snap;
    if (has_pending_first_) {
      snap = pending_first_;
      has_pending_first_ = false;
    } else {
      snap = source_.next(rng);
    }
    if (i == 0 && track) {
      phi_bar_ = clamp(action.beam_direction, kPointingEps, M_PI - kPointingEps);
      ledger_ = record(ledger_, {SlotKind::tracking, slot_, 0.0});
      result.tracking += 1;
      slots_since_tracking_ = 0;
    } else {
      const PacketResult pr =
          packet_success(snap, phi_bar_, M_PI - phi_bar_, channel_.n_rx, channel_.n_tx,
                         noise_variance, channel_.snr_threshold_db, channel_.spacing);
      ledger_ = record(ledger_, {pr.success ? SlotKind::success : SlotKind::failure, slot_, pr.snr_db});
      if (pr.success) {
        result.packets += 1;
      } else {
        result.failures += 1;
      }
      const ObservationSignal y = observe(snap, phi_bar_, M_PI - phi_bar_, channel_.n_rx,
                                          channel_.n_tx, noise_variance, rng, channel_.spacing);
      last_y_re_ = y.y_re;
      last_y_im_ = y.y_im;
      slots_since_tracking_ += 1;
    }
    slot_ += 1;
  }
  result.reward = -double(result.tracking + result.failures) + packet_bonus_ * result.packets;
  result.done = slot_ >= total_slots_;
  result.obs = {phi_bar_, last_y_re_, last_y_im_, slots_since_tracking_};
  return result;
}

Eigen::Vector4d normalized_observation(const Observation& obs, const AgentConfig& agent,
                                       double noise_variance) {
  const double y_scale = 1.0 / (3.0 * std::sqrt(noise_variance * kSnrRef));
  Eigen::Vector4d v;
  v[0] = obs.beam_angle / M_PI;
  v[1] = obs.y_re * y_scale;
  v[2] = obs.y_im * y_scale;
  v[3] = std::min(double(obs.slots_since_tracking) / double(agent.slots_per_step), 10.0);
  return v;
}

Eigen::Vector2d normalized_action(const Action& a) {
  return {a.beam_direction / M_PI, a.track_intent};
}

Action action_from_normalized(const Eigen::Vector2d& v, bool clamp_relu_output) {
  Eigen::Vector2d n = v;
  if (clamp_relu_output) {
    n[0] = clamp(n[0], 0.0, 1.0);
    n[1] = clamp(n[1], 0.0, 1.0);
  }
  return {n[0] * M_PI, n[1]};
}

DdpgAgent::DdpgAgent(const AgentConfig& cfg, double noise_variance, Rng& init_rng)
    : cfg_(cfg), noise_variance_(noise_variance) {
  const Activation out_act = cfg.actor_output_relu ? Activation::relu : Activation::sigmoid;
  const int h = cfg.hidden;
  // Penultimate width scales with the hidden size (10 at the default 200);
  // floor of 2 so shrunken configs keep a trainable path to the output.
  const int h_small = std::max(2, h / 20);
  actor_ = make_mlp({4, h, h, h_small, 2},
                    {Activation::relu, Activation::relu, Activation::relu, out_act}, init_rng);
  critic_ = make_mlp({6, h, h_small, 1}, {Activation::relu, Activation::relu, Activation::identity},
                     init_rng);
  target_actor_ = actor_;
  target_critic_ = critic_;
  opt_actor_ = make_adam(actor_);
  opt_critic_ = make_adam(critic_);
}

void DdpgAgent::set_actor(Mlp net) {
  actor_ = std::move(net);
  target_actor_ = actor_;
  opt_actor_ = make_adam(actor_);
}

Action DdpgAgent::act(const Observation& obs) const {
  const Eigen::Vector4d in = normalized_observation(obs, cfg_, noise_variance_);
  const Eigen::Vector2d out = forward(actor_, in);
  return action_from_normalized(out, cfg_.actor_output_relu);
}

Action DdpgAgent::act_noisy(const Observation& obs, double sigma, Rng& rng) const {
  const Eigen::Vector4d in = normalized_observation(obs, cfg_, noise_variance_);
  Eigen::Vector2d out = forward(actor_, in);
  out[0] = clamp(out[0] + rng.normal(0.0, sigma), 0.0, 1.0);
  out[1] = clamp(out[1] + rng.normal(0.0, sigma), 0.0, 1.0);
  return action_from_normalized(out, false);
}

namespace {

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
  Eigen::MatrixXd in(states.rows() + actions.rows(), states.cols());
  in.topRows(states.rows()) = states;
  in.bottomRows(actions.rows()) = actions;
  return in;
}

}  // namespace

double DdpgAgent::critic_update(const std::vector<TransitionTuple>& batch) {
  const int m = int(batch.size());
  if (m < 1) throw std::invalid_argument("critic_update: empty batch");
  Eigen::MatrixXd states(4, m), next_states(4, m), actions(2, m);
  Eigen::VectorXd rewards(m);
  Eigen::VectorXd not_done(m);
  for (int i = 0; i < m; ++i) {
    states.col(i) = normalized_observation(batch[i].state, cfg_, noise_variance_);
    next_states.col(i) = normalized_observation(batch[i].next, cfg_, noise_variance_);
    actions.col(i) = normalized_action(batch[i].action);
    rewards[i] = batch[i].reward;
    not_done[i] = batch[i].done ? 0.0 : 1.0;
  }
  // Bootstrap from the target networks.
  Eigen::MatrixXd next_actions = forward(target_actor_, next_states);
  if (cfg_.actor_output_relu) next_actions = next_actions.cwiseMax(0.0).cwiseMin(1.0);
  const Eigen::MatrixXd next_q = forward(target_critic_, critic_input(next_states, next_actions));
  Eigen::VectorXd targets(m);
  for (int i = 0; i < m; ++i) {
    targets[i] = rewards[i] + cfg_.gamma * not_done[i] * next_q(0, i);
  }
  ForwardCache cache;
  const Eigen::MatrixXd q = forward(critic_, critic_input(states, actions), &cache);
  Eigen::MatrixXd dout(1, m);
  double loss = 0.0;
  for (int i = 0; i < m; ++i) {
    const double err = q(0, i) - targets[i];
    loss += err * err;
    dout(0, i) = 2.0 * err / m;
  }
  loss /= m;
  const Gradients grads = backward(critic_, cache, dout);
  apply_gradients(critic_, opt_critic_, grads, cfg_.lr_critic);
  return loss;
}

double DdpgAgent::actor_update(const std::vector<TransitionTuple>& batch) {
  const int m = int(batch.size());
  if (m < 1) throw std::invalid_argument("actor_update: empty batch");
  Eigen::MatrixXd states(4, m);
  for (int i = 0; i < m; ++i) {
    states.col(i) = normalized_observation(batch[i].state, cfg_, noise_variance_);
  }
  ForwardCache actor_cache;
  Eigen::MatrixXd actions = forward(actor_, states, &actor_cache);
  ForwardCache critic_cache;
  const Eigen::MatrixXd q = forward(critic_, critic_input(states, actions), &critic_cache);
  const double objective = q.row(0).mean();
  // dQ/d(input) of the critic, action block only; critic weights stay fixed.
  Eigen::MatrixXd dout = Eigen::MatrixXd::Constant(1, m, 1.0 / m);
  Eigen::MatrixXd dinput;
  backward(critic_, critic_cache, dout, &dinput);
  const Eigen::MatrixXd daction = dinput.bottomRows(2);
  Gradients grads = backward(actor_, actor_cache, daction);
  // Ascend the objective.
  for (auto& g : grads.dw) g = -g;
  for (auto& g : grads.db) g = -g;
  apply_gradients(actor_, opt_actor_, grads, cfg_.lr_actor);
  return objective;
}

void DdpgAgent::soft_update_targets() {
  soft_update(target_actor_, actor_, cfg_.tau_mix);
  soft_update(target_critic_, critic_, cfg_.tau_mix);
}

std::vector<EpisodeLog> train(DdpgAgent& agent, ReplayBuffer& buffer, const ScenarioConfig& scenario,
                              ChannelSource& source, const ChannelConfig& channel, Rng& rng,
                              bool timing) {
  const AgentConfig& cfg = agent.config();
  BeamEnv env(scenario, source, channel, cfg);
  const int warmup = cfg.warmup_batches * cfg.batch_size;
  double sigma = cfg.noise_sigma;
  std::vector<EpisodeLog> logs;
  logs.reserve(cfg.episodes);
  for (int episode = 0; episode < cfg.episodes; ++episode) {
    const auto t0 = std::chrono::steady_clock::now();
    Observation obs = env.reset(rng);
    double ep_reward = 0.0;
    long ep_packets = 0;
    int steps = 0;
    bool done = false;
    while (!done && steps < cfg.max_steps) {
      const Action action = agent.act_noisy(obs, sigma, rng);
      const BeamEnv::StepResult sr = env.step(action, rng);
      buffer.push({obs, action, sr.reward, sr.obs, sr.done});
      obs = sr.obs;
      ep_reward += sr.reward;
      ep_packets += sr.packets;
      done = sr.done;
      ++steps;
      sigma *= cfg.noise_decay;
      if (buffer.size() >= warmup) {
        agent.critic_update(buffer.sample(cfg.batch_size, rng));
        agent.actor_update(buffer.sample(cfg.batch_size, rng));
        agent.soft_update_targets();
      }
    }
    const DelayLedger& led = env.ledger();
    EpisodeLog log;
    log.episode = episode;
    log.steps = steps;
    log.ep_packet = ep_packets;
    log.ep_reward = ep_reward;
    // One-packet floor keeps the column finite when nothing was delivered.
    log.avg_delay_ms = double(led.total_delay_slots) /
                       double(std::max<long>(1, led.successful_packets)) *
                       scenario.slot_duration * 1e3;
    if (timing) {
      log.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    logs.push_back(log);
  }
  return logs;
}

EvalResult evaluate(const Policy& policy, const ScenarioConfig& scenario, ChannelSource& source,
                    const ChannelConfig& channel, const AgentConfig& agent, int episodes, Rng& rng) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  BeamEnv env(scenario, source, channel, agent);
  EvalResult result;
  double delay_sum = 0.0;
  long packet_sum = 0;
  for (int e = 0; e < episodes; ++e) {
    Observation obs = env.reset(rng);
    bool done = false;
    int steps = 0;
    while (!done && steps < agent.max_steps) {
      const BeamEnv::StepResult sr = env.step(policy(obs), rng);
      obs = sr.obs;
      done = sr.done;
      ++steps;
    }
    const DelayLedger& led = env.ledger();
    result.ledger.total_delay_slots += led.total_delay_slots;
    result.ledger.successful_packets += led.successful_packets;
    result.ledger.tracking_slots += led.tracking_slots;
    result.ledger.failed_slots += led.failed_slots;
    // A policy that delivers nothing has unbounded per-packet delay; report
    // it as such instead of aborting the whole evaluation.
    delay_sum += led.successful_packets > 0
                     ? average_delay_ms(led, scenario.slot_duration)
                     : std::numeric_limits<double>::infinity();
    packet_sum += led.successful_packets;
  }
  result.mean_delay_ms = delay_sum / episodes;
  result.mean_packets = double(packet_sum) / episodes;
  return result;
}

Policy greedy_policy(const DdpgAgent& agent) {
  return [&agent](const Observation& obs) { return agent.act(obs); };
}

}  // namespace beamtrack
