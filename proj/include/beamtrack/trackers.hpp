#pragma once

#include <functional>

#include <Eigen/Dense>

#include "beamtrack/channel.hpp"
#include "beamtrack/link.hpp"
#include "beamtrack/scenario.hpp"

namespace beamtrack {

// State vector [alpha_re, alpha_im, s, v, a].
using StateVec = Eigen::Matrix<double, 5, 1>;
using StateMat = Eigen::Matrix<double, 5, 5>;
using Meas = Eigen::Vector2d;
using MeasMat = Eigen::Matrix<double, 2, 5>;

struct FilterState {
  StateVec x = StateVec::Zero();
  StateMat p = StateMat::Identity();
};

// Per-slot linear dynamics: AR(1) block for the complex gain, constant
// acceleration kinematics for (s, v, a).
struct TransitionModel {
  StateMat a = StateMat::Identity();
  StateMat q = StateMat::Zero();
  double rho = 0.995;
  double sigma_u = 0.5;  // process-noise std on acceleration, m/s^2
  double dt = 0.005;
};

TransitionModel make_transition_model(double rho, double sigma_u, double dt);

FilterState ekf_predict(const FilterState& fs, const TransitionModel& tm);

struct PointingState {
  double phi_bar = 0.0;        // current beam direction, radians in (0, pi)
  double phi_threshold = 0.0;  // correction deadband, radians
  long last_correction_slot = -1;
};

// Expected pilot (real, imag) for state x with the beams at the given
// directions: the LoS mapping s -> angles composed with the array response.
Meas measurement(const StateVec& x, const PointingState& pointing, const ScenarioConfig& scenario,
                 int n_rx, int n_tx, double spacing = 0.5);

struct MeasurementModel {
  std::function<Meas(const StateVec&)> value;
  std::function<MeasMat(const StateVec&)> jacobian;
};

// Jacobian is analytic in the gain components and central-difference in s
// (step 1e-6 m); v and a do not enter the pilot directly.
MeasurementModel beam_measurement(const PointingState& pointing, const ScenarioConfig& scenario,
                                  int n_rx, int n_tx, double spacing = 0.5);

FilterState ekf_update(const FilterState& fs, const Meas& z, const MeasurementModel& model,
                       const Eigen::Matrix2d& r);

struct ParticleSet {
  Eigen::MatrixXd particles;  // count x 5
  Eigen::VectorXd weights;    // normalized
  long degeneracy_resets = 0;
};

ParticleSet make_particle_set(int count, const StateVec& mean, const StateVec& cov_diag, Rng& rng);

// Propagates every particle through the transition model with sampled noise.
void pf_predict(ParticleSet& ps, const TransitionModel& tm, Rng& rng);

// One pass of low-variance (systematic) resampling; weights become uniform.
void systematic_resample(ParticleSet& ps, Rng& rng);

// Propagate + reweight by the Gaussian pilot likelihood + systematic
// resampling when effective sample size < count/2. Weight underflow across
// the whole set resets weights to uniform and bumps degeneracy_resets.
ParticleSet pf_step(ParticleSet ps, const TransitionModel& tm, const Meas& z,
                    const MeasurementModel& model, const Eigen::Matrix2d& r, Rng& rng);

StateVec estimate(const ParticleSet& ps);

// Re-steers the beam only when the predicted direction drifts strictly
// beyond the deadband.
PointingState maybe_correct(PointingState pointing, double predicted_phi, long slot);

enum class TrackerKind { ekf, pf };

struct TrackerOptions {
  double sigma_u = 0.5;        // m/s^2
  int particle_count = 1000;
  double phi_threshold = 0.0;  // <= 0 selects the default 2/n_rx
  double tracking_interval = 0.1;  // seconds between pilot slots
};

FilterState initial_filter_state(const ScenarioConfig& scenario);

double default_phi_threshold(int antennas);

// Runs one episode: every tracking_interval one slot carries a pilot
// (filter predict + update); every other slot carries a data packet. The
// filter runs predict-only between pilots and the beam follows the predicted
// angle through the deadband rule each slot.
DelayLedger run_tracked_episode(TrackerKind kind, const ScenarioConfig& scenario,
                                ChannelSource& source, const ChannelConfig& channel,
                                const TrackerOptions& options, Rng& rng);

}  // namespace beamtrack
