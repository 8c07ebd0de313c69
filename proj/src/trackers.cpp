#include "beamtrack/trackers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace beamtrack {

TransitionModel make_transition_model(double rho, double sigma_u, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("transition model: dt must be positive");
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("transition model: rho must be in [0, 1]");
  TransitionModel tm;
  tm.rho = rho;
  tm.sigma_u = sigma_u;
  tm.dt = dt;
  tm.a.setZero();
  tm.a(0, 0) = rho;
  tm.a(1, 1) = rho;
  tm.a(2, 2) = 1.0;
  tm.a(2, 3) = dt;
  tm.a(2, 4) = 0.5 * dt * dt;
  tm.a(3, 3) = 1.0;
  tm.a(3, 4) = dt;
  tm.a(4, 4) = 1.0;
  const double su2 = sigma_u * sigma_u;
  tm.q.setZero();
  tm.q(0, 0) = 1.0 - rho * rho;
  tm.q(1, 1) = 1.0 - rho * rho;
  tm.q(2, 2) = su2 * dt * dt / 2.0;
  tm.q(3, 3) = su2 * dt;
  tm.q(4, 4) = su2;
  return tm;
}

FilterState ekf_predict(const FilterState& fs, const TransitionModel& tm) {
  FilterState out;
  out.x = tm.a * fs.x;
  out.p = tm.a * fs.p * tm.a.transpose() + tm.q;
  return out;
}

Meas measurement(const StateVec& x, const PointingState& pointing, const ScenarioConfig& scenario,
                 int n_rx, int n_tx, double spacing) {
  const LosAngles ang = los_angles(x[2], scenario);
  const cplx alpha(x[0], x[1]);
  const cplx h = alpha * beam_gain(ang.phi_a, pointing.phi_bar, n_rx, spacing) *
                 std::conj(beam_gain(ang.phi_d, M_PI - pointing.phi_bar, n_tx, spacing));
  return {h.real(), h.imag()};
}

MeasurementModel beam_measurement(const PointingState& pointing, const ScenarioConfig& scenario,
                                  int n_rx, int n_tx, double spacing) {
  MeasurementModel model;
  model.value = [=](const StateVec& x) {
    return measurement(x, pointing, scenario, n_rx, n_tx, spacing);
  };
  model.jacobian = [=](const StateVec& x) {
    MeasMat h = MeasMat::Zero();
    const LosAngles ang = los_angles(x[2], scenario);
    const cplx g = beam_gain(ang.phi_a, pointing.phi_bar, n_rx, spacing) *
                   std::conj(beam_gain(ang.phi_d, M_PI - pointing.phi_bar, n_tx, spacing));
    // h = (alpha_re + i alpha_im) * g: linear in the gain components.
    h(0, 0) = g.real();
    h(1, 0) = g.imag();
    h(0, 1) = -g.imag();
    h(1, 1) = g.real();
    const double step = 1e-6;
    StateVec hi = x, lo = x;
    hi[2] += step;
    lo[2] -= step;
    const Meas dh = (measurement(hi, pointing, scenario, n_rx, n_tx, spacing) -
                     measurement(lo, pointing, scenario, n_rx, n_tx, spacing)) /
                    (2.0 * step);
    h(0, 2) = dh[0];
    h(1, 2) = dh[1];
    return h;
  };
  return model;
}

FilterState ekf_update(const FilterState& fs, const Meas& z, const MeasurementModel& model,
                       const Eigen::Matrix2d& r) {
  const MeasMat h = model.jacobian(fs.x);
  const Eigen::Matrix2d s = h * fs.p * h.transpose() + r;
  const double det = s.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-300) {
    throw std::runtime_error("ekf_update: innovation covariance is singular");
  }
  const Eigen::Matrix<double, 5, 2> k = fs.p * h.transpose() * s.inverse();
  FilterState out;
  out.x = fs.x + k * (z - model.value(fs.x));
  out.p = (StateMat::Identity() - k * h) * fs.p;
  out.p = 0.5 * (out.p + out.p.transpose()).eval();
  return out;
}

ParticleSet make_particle_set(int count, const StateVec& mean, const StateVec& cov_diag, Rng& rng) {
  if (count < 1) throw std::invalid_argument("particle set: count must be >= 1");
  ParticleSet ps;
  ps.particles.resize(count, 5);
  ps.weights = Eigen::VectorXd::Constant(count, 1.0 / count);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < 5; ++j) {
      ps.particles(i, j) = mean[j] + rng.normal(0.0, std::sqrt(cov_diag[j]));
    }
  }
  return ps;
}

void pf_predict(ParticleSet& ps, const TransitionModel& tm, Rng& rng) {
  const int count = static_cast<int>(ps.particles.rows());
  Eigen::Matrix<double, 5, 1> noise_std;
  for (int j = 0; j < 5; ++j) noise_std[j] = std::sqrt(tm.q(j, j));
  for (int i = 0; i < count; ++i) {
    StateVec x = ps.particles.row(i).transpose();
    x = tm.a * x;
    for (int j = 0; j < 5; ++j) x[j] += rng.normal(0.0, noise_std[j]);
    ps.particles.row(i) = x.transpose();
  }
}

void systematic_resample(ParticleSet& ps, Rng& rng) {
  const int count = static_cast<int>(ps.particles.rows());
  Eigen::MatrixXd resampled(count, 5);
  const double start = rng.uniform(0.0, 1.0) / count;
  double cumulative = ps.weights[0];
  int j = 0;
  for (int i = 0; i < count; ++i) {
    const double target = start + double(i) / count;
    while (cumulative < target && j + 1 < count) {
      ++j;
      cumulative += ps.weights[j];
    }
    resampled.row(i) = ps.particles.row(j);
  }
  ps.particles = std::move(resampled);
  ps.weights.setConstant(1.0 / count);
}

ParticleSet pf_step(ParticleSet ps, const TransitionModel& tm, const Meas& z,
                    const MeasurementModel& model, const Eigen::Matrix2d& r, Rng& rng) {
  pf_predict(ps, tm, rng);
  const int count = static_cast<int>(ps.particles.rows());
  const Eigen::Matrix2d r_inv = r.inverse();
  for (int i = 0; i < count; ++i) {
    const StateVec x = ps.particles.row(i).transpose();
    const Meas residual = z - model.value(x);
    const double quad = residual.dot(r_inv * residual);
    ps.weights[i] *= std::exp(-0.5 * quad);
  }
  const double total = ps.weights.sum();
  if (total <= 0.0 || !std::isfinite(total)) {
    ps.weights.setConstant(1.0 / count);
    ps.degeneracy_resets += 1;
  } else {
    ps.weights /= total;
  }
  const double ess = 1.0 / ps.weights.squaredNorm();
  if (ess < count / 2.0) systematic_resample(ps, rng);
  return ps;
}

StateVec estimate(const ParticleSet& ps) {
  return ps.particles.transpose() * ps.weights;
}

PointingState maybe_correct(PointingState pointing, double predicted_phi, long slot) {
  if (std::abs(predicted_phi - pointing.phi_bar) > pointing.phi_threshold) {
    pointing.phi_bar = predicted_phi;
    pointing.last_correction_slot = slot;
  }
  return pointing;
}

FilterState initial_filter_state(const ScenarioConfig& scenario) {
  FilterState fs;
  fs.x << 1.0, 0.0, 0.0, scenario.initial_velocity, scenario.initial_acceleration;
  fs.p = StateVec(0.1, 0.1, 1.0, 1.0, 1.0).asDiagonal();
  return fs;
}

double default_phi_threshold(int antennas) {
  return 2.0 / double(antennas);
}

DelayLedger run_tracked_episode(TrackerKind kind, const ScenarioConfig& scenario,
                                ChannelSource& source, const ChannelConfig& channel,
                                const TrackerOptions& options, Rng& rng) {
  const double dt = scenario.slot_duration;
  const double ratio = options.tracking_interval / dt;
  const long interval_slots = std::llround(ratio);
  if (interval_slots < 1 || std::abs(ratio - double(interval_slots)) > 1e-6) {
    throw std::invalid_argument("tracking_interval must be a positive multiple of slot_duration");
  }

  const TransitionModel tm = make_transition_model(channel.rho, options.sigma_u, dt);
  const double noise_variance = channel.effective_noise_variance();
  const Eigen::Matrix2d r_v = (noise_variance / 2.0) * Eigen::Matrix2d::Identity();

  PointingState pointing;
  pointing.phi_bar = los_angles(0.0, scenario).phi_a;
  pointing.phi_threshold =
      options.phi_threshold > 0.0 ? options.phi_threshold : default_phi_threshold(channel.n_rx);

  FilterState fs = initial_filter_state(scenario);
  ParticleSet ps;
  if (kind == TrackerKind::pf) {
    ps = make_particle_set(options.particle_count, fs.x, fs.p.diagonal(), rng);
  }

  source.reset(rng);
  const long slots = source.total_slots();
  DelayLedger ledger;
  for (long k = 0; k < slots; ++k) {
    const ChannelSnapshot snap = source.next(rng);
    const bool tracking_slot = (k % interval_slots) == 0;
    double predicted_s;
    if (tracking_slot) {
      const MeasurementModel model =
          beam_measurement(pointing, scenario, channel.n_rx, channel.n_tx, channel.spacing);
      const ObservationSignal y = observe(snap, pointing.phi_bar, M_PI - pointing.phi_bar,
                                          channel.n_rx, channel.n_tx, noise_variance, rng,
                                          channel.spacing);
      const Meas z(y.y_re, y.y_im);
      if (kind == TrackerKind::ekf) {
        fs = ekf_predict(fs, tm);
        fs = ekf_update(fs, z, model, r_v);
        predicted_s = fs.x[2];
      } else {
        ps = pf_step(ps, tm, z, model, r_v, rng);
        predicted_s = estimate(ps)[2];
      }
      pointing = maybe_correct(pointing, los_angles(predicted_s, scenario).phi_a, k);
      ledger = record(ledger, {SlotKind::tracking, k, 0.0});
    } else {
      if (kind == TrackerKind::ekf) {
        fs = ekf_predict(fs, tm);
        predicted_s = fs.x[2];
      } else {
        pf_predict(ps, tm, rng);
        predicted_s = estimate(ps)[2];
      }
      pointing = maybe_correct(pointing, los_angles(predicted_s, scenario).phi_a, k);
      const PacketResult pr =
          packet_success(snap, pointing.phi_bar, M_PI - pointing.phi_bar, channel.n_rx,
                         channel.n_tx, noise_variance, channel.snr_threshold_db, channel.spacing);
      ledger = record(ledger, {pr.success ? SlotKind::success : SlotKind::failure, k, pr.snr_db});
    }
  }
  return ledger;
}

}  // namespace beamtrack
