#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beamtrack/rng.hpp"
#include "beamtrack/scenario.hpp"

namespace beamtrack {

using cplx = std::complex<double>;

struct SteeringVector {
  Eigen::VectorXcd elements;  // unit-norm, element m carries phase 2*pi*spacing*m*cos(phi)
  double pointing = 0.0;
  double spacing = 0.5;  // element pitch in wavelengths
};

SteeringVector steering(double phi, int antennas, double spacing = 0.5);

// Inner product a(phi_bar)^H a(phi) of two unit-norm steering vectors.
// Equals 1 exactly when cos(phi) and cos(phi_bar) coincide modulo the array's
// grating periodicity; magnitude never exceeds 1.
cplx beam_gain(double phi, double phi_bar, int antennas, double spacing = 0.5);

struct PathComponent {
  cplx gain;
  double aoa = 0.0;  // radians at the BS
  double aod = 0.0;  // radians at the MS
};

struct ChannelSnapshot {
  std::vector<PathComponent> paths;
  long slot = 0;
};

// First-order autoregressive complex gain with unit stationary variance per
// component: alpha' = rho*alpha + u, u ~ CN(0, 2*(1-rho^2)).
struct GainProcessState {
  cplx alpha{1.0, 0.0};
  double rho = 0.995;
};

GainProcessState evolve_gain(const GainProcessState& state, Rng& rng);

// Draws alpha from the stationary distribution (components N(0,1)).
GainProcessState stationary_gain(double rho, Rng& rng);

struct ObservationSignal {
  double y_re = 0.0;
  double y_im = 0.0;
};

// Beamformed pilot the receiver actually sees: sum over paths of
// gain * beam_gain(aoa, phi_bar_a, n_rx) * conj(beam_gain(aod, phi_bar_d, n_tx))
// plus circular Gaussian noise of total variance noise_variance.
ObservationSignal observe(const ChannelSnapshot& snapshot, double phi_bar_a, double phi_bar_d,
                          int n_rx, int n_tx, double noise_variance, Rng& rng,
                          double spacing = 0.5);

enum class ChannelSourceKind { los, multipath, trace };

struct ChannelConfig {
  int n_tx = 16;
  int n_rx = 16;
  double spacing = 0.5;
  double rho = 0.995;
  // sigma_v^2; <= 0 means "auto": 2.56/(n_rx*n_tx), i.e. 20 dB reference SNR
  // at |alpha| = 1 for the default 16x16 array, scaling with array gain.
  double noise_variance = 0.0;
  double snr_threshold_db = 5.0;
  ChannelSourceKind source = ChannelSourceKind::los;
  std::string trace_path;
  int multipath_paths = 3;
  double reflection_coeff = 0.4;

  double effective_noise_variance() const {
    return noise_variance > 0.0 ? noise_variance : 2.56 / (double(n_rx) * double(n_tx));
  }
};

// Per-episode stream of channel snapshots, one per slot.
class ChannelSource {
 public:
  virtual ~ChannelSource() = default;
  virtual int total_slots() const = 0;
  // Starts a new episode; gains are redrawn from the given stream.
  virtual void reset(Rng& rng) = 0;
  // Snapshot for the current slot; advances internal state by one slot.
  virtual ChannelSnapshot next(Rng& rng) = 0;
};

std::unique_ptr<ChannelSource> make_channel_source(const ChannelConfig& channel,
                                                   const ScenarioConfig& scenario);

struct TraceRecord {
  long step = 0;
  double position = 0.0;  // meters along the road, informational
  ChannelSnapshot snapshot;
};

// CSV trace: step_index, position_m, n_paths, then per path
// gain_re, gain_im, aoa_rad, aod_rad. '#' starts a comment line.
std::vector<TraceRecord> load_trace(const std::string& path);
void save_trace(const std::string& path, const std::vector<TraceRecord>& records);

// Synthesizes a multipath trace for the given scenario: LoS plus extra
// reflected paths at fixed angular offsets, reflection_coeff^l amplitude.
std::vector<TraceRecord> generate_trace(const ScenarioConfig& scenario, const ChannelConfig& channel,
                                        Rng& rng);

}  // namespace beamtrack
