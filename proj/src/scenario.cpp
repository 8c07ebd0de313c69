#include "beamtrack/scenario.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace beamtrack {

namespace {

constexpr double kBoundaryEps = 1e-9;

// Moves (s, v) forward by tau under constant acceleration a, holding the
// vehicle at rest instead of letting it reverse.
void integrate_segment(double& s, double& v, double a, double tau) {
  if (tau <= 0.0) return;
  if (v <= 0.0 && a <= 0.0) {
    v = 0.0;
    return;  // parked; braking acceleration has nothing to act on
  }
  if (a < 0.0) {
    double t_stop = v / -a;
    if (t_stop < tau) {
      s += v * t_stop + 0.5 * a * t_stop * t_stop;
      v = 0.0;
      return;  // remains stopped for the rest of the segment
    }
  }
  s += v * tau + 0.5 * a * tau * tau;
  v += a * tau;
}

}  // namespace

int ScenarioConfig::total_slots() const {
  return static_cast<int>(std::llround(total_time / slot_duration));
}

void ScenarioConfig::validate() const {
  if (h_c <= 0.0) throw std::invalid_argument("scenario: h_c must be positive");
  if (h_r <= 0.0) throw std::invalid_argument("scenario: h_r must be positive");
  if (slot_duration <= 0.0) throw std::invalid_argument("scenario: slot_duration must be positive");
  if (total_time <= 0.0) throw std::invalid_argument("scenario: total_time must be positive");
  if (initial_velocity < 0.0) throw std::invalid_argument("scenario: initial_velocity must be non-negative");
  if (phases.empty()) throw std::invalid_argument("scenario: mobility profile needs at least one phase");
  double sum = 0.0;
  for (const auto& p : phases) {
    if (p.duration <= 0.0) throw std::invalid_argument("scenario: phase durations must be positive");
    sum += p.duration;
  }
  if (std::abs(sum - total_time) > 1e-9) {
    throw std::invalid_argument("scenario: phase durations sum to " + std::to_string(sum) +
                                " but total_time is " + std::to_string(total_time));
  }
  double slots = total_time / slot_duration;
  if (std::abs(slots - std::llround(slots)) > 1e-6) {
    throw std::invalid_argument("scenario: total_time must be a whole number of slots");
  }
}

ScenarioConfig stationary_scenario(double speed) {
  ScenarioConfig cfg;
  cfg.initial_velocity = speed;
  cfg.initial_acceleration = 0.0;
  cfg.phases = {{cfg.total_time, 0.0}};
  return cfg;
}

KinematicState initial_state(const ScenarioConfig& cfg) {
  return {0.0, cfg.initial_velocity, cfg.initial_acceleration, 0.0};
}

KinematicState advance(const KinematicState& state, const ScenarioConfig& cfg, double dt) {
  if (dt < 0.0) throw std::invalid_argument("advance: dt must be non-negative");
  double target = state.t + dt;
  if (target > cfg.total_time + kBoundaryEps) {
    throw std::out_of_range("advance: episode complete at t=" + std::to_string(cfg.total_time));
  }
  target = std::min(target, cfg.total_time);

  KinematicState out = state;
  double t = state.t;
  double phase_start = 0.0;
  for (const auto& phase : cfg.phases) {
    double phase_end = phase_start + phase.duration;
    if (phase_end <= t + kBoundaryEps) {
      phase_start = phase_end;
      continue;  // phase already behind us
    }
    double seg_end = std::min(phase_end, target);
    if (seg_end > t) {
      integrate_segment(out.s, out.v, phase.acceleration, seg_end - t);
      t = seg_end;
    }
    if (t >= target - kBoundaryEps) break;
    phase_start = phase_end;
  }
  out.t = target;
  // Report the acceleration in effect going forward from out.t.
  out.a = cfg.phases.back().acceleration;
  phase_start = 0.0;
  for (const auto& phase : cfg.phases) {
    double phase_end = phase_start + phase.duration;
    if (out.t < phase_end - kBoundaryEps) {
      out.a = phase.acceleration;
      break;
    }
    phase_start = phase_end;
  }
  return out;
}

LosAngles los_angles(double s, const ScenarioConfig& cfg) {
  LosAngles angles;
  angles.phi_a = std::atan2(cfg.h_c, s - cfg.h_r);
  angles.phi_d = M_PI - angles.phi_a;
  return angles;
}

}  // namespace beamtrack
