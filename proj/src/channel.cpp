#include "beamtrack/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace beamtrack {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SteeringVector steering(double phi, int antennas, double spacing) {
  if (antennas < 1) throw std::invalid_argument("steering: antennas must be >= 1");
  if (spacing <= 0.0) throw std::invalid_argument("steering: spacing must be positive");
  SteeringVector sv;
  sv.pointing = phi;
  sv.spacing = spacing;
  sv.elements.resize(antennas);
  const double step = 2.0 * M_PI * spacing * std::cos(phi);
  const double norm = 1.0 / std::sqrt(double(antennas));
  for (int m = 0; m < antennas; ++m) {
    sv.elements[m] = std::polar(norm, step * m);
  }
  return sv;
}

cplx beam_gain(double phi, double phi_bar, int antennas, double spacing) {
  if (antennas < 1) throw std::invalid_argument("beam_gain: antennas must be >= 1");
  const double psi = 2.0 * M_PI * spacing * (std::cos(phi) - std::cos(phi_bar));
  const double half = 0.5 * psi;
  const double denom = std::sin(half);
  if (std::abs(denom) < 1e-12) return {1.0, 0.0};  // aligned modulo grating period
  const double ratio = std::sin(antennas * half) / (antennas * denom);
  return std::polar(ratio, (antennas - 1) * half);
}

GainProcessState evolve_gain(const GainProcessState& state, Rng& rng) {
  GainProcessState out = state;
  const double std_dev = std::sqrt(std::max(0.0, 1.0 - state.rho * state.rho));
  out.alpha = state.rho * state.alpha + cplx(rng.normal(0.0, std_dev), rng.normal(0.0, std_dev));
  return out;
}

GainProcessState stationary_gain(double rho, Rng& rng) {
  GainProcessState g;
  g.rho = rho;
  g.alpha = cplx(rng.normal(), rng.normal());
  return g;
}

ObservationSignal observe(const ChannelSnapshot& snapshot, double phi_bar_a, double phi_bar_d,
                          int n_rx, int n_tx, double noise_variance, Rng& rng, double spacing) {
  if (noise_variance < 0.0) throw std::invalid_argument("observe: noise_variance must be >= 0");
  cplx y{0.0, 0.0};
  for (const auto& p : snapshot.paths) {
    y += p.gain * beam_gain(p.aoa, phi_bar_a, n_rx, spacing) *
         std::conj(beam_gain(p.aod, phi_bar_d, n_tx, spacing));
  }
  if (noise_variance > 0.0) {
    const double comp = std::sqrt(noise_variance / 2.0);
    y += cplx(rng.normal(0.0, comp), rng.normal(0.0, comp));
  }
  return {y.real(), y.imag()};
}

namespace {

class LosChannelSource final : public ChannelSource {
 public:
  LosChannelSource(const ChannelConfig& channel, const ScenarioConfig& scenario)
      : channel_(channel), scenario_(scenario) {}

  int total_slots() const override { return scenario_.total_slots(); }

  void reset(Rng& rng) override {
    state_ = initial_state(scenario_);
    gain_ = stationary_gain(channel_.rho, rng);
    slot_ = 0;
  }

  ChannelSnapshot next(Rng& rng) override {
    ChannelSnapshot snap;
    snap.slot = slot_;
    const LosAngles ang = los_angles(state_.s, scenario_);
    snap.paths.push_back({gain_.alpha, ang.phi_a, ang.phi_d});
    ++slot_;
    if (slot_ < total_slots()) state_ = advance(state_, scenario_, scenario_.slot_duration);
    gain_ = evolve_gain(gain_, rng);
    return snap;
  }

 private:
  ChannelConfig channel_;
  ScenarioConfig scenario_;
  KinematicState state_;
  GainProcessState gain_;
  long slot_ = 0;
};

// Angular offset of reflected path l (1-based) from the LoS direction.
double reflection_offset(int l) {
  const double magnitude = 0.3 * ((l + 1) / 2);
  return (l % 2 == 1) ? magnitude : -magnitude;
}

class MultipathChannelSource final : public ChannelSource {
 public:
  MultipathChannelSource(const ChannelConfig& channel, const ScenarioConfig& scenario)
      : channel_(channel), scenario_(scenario) {
    if (channel_.multipath_paths < 1) {
      throw std::invalid_argument("channel: multipath_paths must be >= 1");
    }
  }

  int total_slots() const override { return scenario_.total_slots(); }

  void reset(Rng& rng) override {
    state_ = initial_state(scenario_);
    gains_.clear();
    for (int l = 0; l < channel_.multipath_paths; ++l) {
      gains_.push_back(stationary_gain(channel_.rho, rng));
    }
    slot_ = 0;
  }

  ChannelSnapshot next(Rng& rng) override {
    ChannelSnapshot snap;
    snap.slot = slot_;
    const LosAngles ang = los_angles(state_.s, scenario_);
    for (int l = 0; l < channel_.multipath_paths; ++l) {
      const double scale = std::pow(channel_.reflection_coeff, l);
      const double aoa = ang.phi_a + (l == 0 ? 0.0 : reflection_offset(l));
      snap.paths.push_back({scale * gains_[l].alpha, aoa, M_PI - aoa});
    }
    ++slot_;
    if (slot_ < total_slots()) state_ = advance(state_, scenario_, scenario_.slot_duration);
    for (auto& g : gains_) g = evolve_gain(g, rng);
    return snap;
  }

 private:
  ChannelConfig channel_;
  ScenarioConfig scenario_;
  KinematicState state_;
  std::vector<GainProcessState> gains_;
  long slot_ = 0;
};

class TraceChannelSource final : public ChannelSource {
 public:
  explicit TraceChannelSource(std::vector<TraceRecord> records) : records_(std::move(records)) {
    if (records_.empty()) throw std::invalid_argument("channel: trace has no records");
  }

  int total_slots() const override { return static_cast<int>(records_.size()); }

  void reset(Rng&) override { slot_ = 0; }

  ChannelSnapshot next(Rng&) override {
    if (slot_ >= static_cast<long>(records_.size())) {
      throw std::out_of_range("trace source: past last record");
    }
    ChannelSnapshot snap = records_[slot_].snapshot;
    snap.slot = slot_;
    ++slot_;
    return snap;
  }

 private:
  std::vector<TraceRecord> records_;
  long slot_ = 0;
};

}  // namespace

std::unique_ptr<ChannelSource> make_channel_source(const ChannelConfig& channel,
                                                   const ScenarioConfig& scenario) {
  switch (channel.source) {
    case ChannelSourceKind::los:
      return std::make_unique<LosChannelSource>(channel, scenario);
    case ChannelSourceKind::multipath:
      return std::make_unique<MultipathChannelSource>(channel, scenario);
    case ChannelSourceKind::trace:
      return std::make_unique<TraceChannelSource>(load_trace(channel.trace_path));
  }
  throw std::logic_error("make_channel_source: unknown source kind");
}

std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_trace: cannot open " + path);
  std::vector<TraceRecord> records;
  std::string line;
  long line_no = 0;
  long expected_step = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = line;
    if (auto hash = body.find('#'); hash != std::string::npos) body.resize(hash);
    bool blank = body.find_first_not_of(" \t\r") == std::string::npos;
    if (blank) continue;
    std::replace(body.begin(), body.end(), ',', ' ');
    std::istringstream fields(body);
    TraceRecord rec;
    long n_paths = 0;
    if (!(fields >> rec.step >> rec.position >> n_paths)) fail("expected step, position, n_paths");
    if (rec.step != expected_step) {
      fail("step index " + std::to_string(rec.step) + " out of order (expected " +
           std::to_string(expected_step) + ")");
    }
    if (n_paths < 1) fail("n_paths must be >= 1");
    rec.snapshot.slot = rec.step;
    for (long l = 0; l < n_paths; ++l) {
      double re, im, aoa, aod;
      if (!(fields >> re >> im >> aoa >> aod)) {
        fail("path " + std::to_string(l) + ": expected gain_re, gain_im, aoa_rad, aod_rad");
      }
      rec.snapshot.paths.push_back({cplx(re, im), aoa, aod});
    }
    double extra;
    if (fields >> extra) fail("trailing fields after last path");
    records.push_back(std::move(rec));
    ++expected_step;
  }
  if (records.empty()) throw std::runtime_error(path + ": trace file has no records");
  return records;
}

void save_trace(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_trace: cannot open " + path + " for writing");
  out << "# step_index, position_m, n_paths, {gain_re, gain_im, aoa_rad, aod_rad} x n_paths\n";
  for (const auto& rec : records) {
    out << rec.step << ", " << format_double(rec.position) << ", " << rec.snapshot.paths.size();
    for (const auto& p : rec.snapshot.paths) {
      out << ", " << format_double(p.gain.real()) << ", " << format_double(p.gain.imag()) << ", "
          << format_double(p.aoa) << ", " << format_double(p.aod);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_trace: write failed for " + path);
}

std::vector<TraceRecord> generate_trace(const ScenarioConfig& scenario, const ChannelConfig& channel,
                                        Rng& rng) {
  ChannelConfig chan = channel;
  chan.source = ChannelSourceKind::multipath;
  MultipathChannelSource source(chan, scenario);
  source.reset(rng);
  std::vector<TraceRecord> records;
  KinematicState state = initial_state(scenario);
  const int slots = scenario.total_slots();
  records.reserve(slots);
  for (int k = 0; k < slots; ++k) {
    TraceRecord rec;
    rec.step = k;
    rec.position = state.s;
    rec.snapshot = source.next(rng);
    records.push_back(std::move(rec));
    if (k + 1 < slots) state = advance(state, scenario, scenario.slot_duration);
  }
  return records;
}

}  // namespace beamtrack
