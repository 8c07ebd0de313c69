#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "beamtrack/channel.hpp"
#include "beamtrack/scenario.hpp"

using namespace beamtrack;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("steering vectors are unit norm with linear phase progression") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const int m = 2 + int(rng.index(63));
    const double phi = rng.uniform(0.05, M_PI - 0.05);
    const SteeringVector sv = steering(phi, m);
    REQUIRE(sv.elements.size() == m);
    CHECK(sv.elements.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const double step = 2.0 * M_PI * sv.spacing * std::cos(phi);
    for (int k = 0; k + 1 < m; ++k) {
      const cplx ratio = sv.elements[k + 1] / sv.elements[k];
      CHECK(std::arg(ratio * std::polar(1.0, -step)) == doctest::Approx(0.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("closed-form beam gain equals the explicit element sum") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const int m = 2 + int(rng.index(63));  // 2..64
    const double phi = rng.uniform(0.01, M_PI - 0.01);
    const double phi_bar = rng.uniform(0.01, M_PI - 0.01);
    const cplx g = beam_gain(phi, phi_bar, m);
    const cplx dot = (steering(phi_bar, m).elements.adjoint() * steering(phi, m).elements)(0);
    CHECK(std::abs(g - dot) < 1e-12);
    CHECK(std::abs(g) <= 1.0 + 1e-12);
  }
}

TEST_CASE("aligned beams have unit gain") {
  for (int m : {2, 7, 16, 64}) {
    for (double phi : {0.3, 1.2, M_PI / 2, 2.9}) {
      const cplx g = beam_gain(phi, phi, m);
      CHECK(std::abs(g - cplx(1.0, 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("beamformed observation matches brute-force matrix assembly") {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const int n_rx = 4 << rng.index(4);  // 4..32
    const int n_tx = 4 << rng.index(4);
    ChannelSnapshot snap;
    const int paths = 1 + int(rng.index(4));
    for (int l = 0; l < paths; ++l) {
      PathComponent p;
      p.gain = cplx(rng.normal(0.0, 1.0), rng.normal(0.0, 1.0));
      p.aoa = rng.uniform(0.1, M_PI - 0.1);
      p.aod = rng.uniform(0.1, M_PI - 0.1);
      snap.paths.push_back(p);
    }
    const double phi_bar_a = rng.uniform(0.1, M_PI - 0.1);
    const double phi_bar_d = rng.uniform(0.1, M_PI - 0.1);

    Rng noise_rng(1);
    const ObservationSignal y =
        observe(snap, phi_bar_a, phi_bar_d, n_rx, n_tx, 0.0, noise_rng);

    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n_rx, n_tx);
    for (const auto& p : snap.paths) {
      h += p.gain * steering(p.aoa, n_rx).elements * steering(p.aod, n_tx).elements.adjoint();
    }
    const cplx expected =
        (steering(phi_bar_a, n_rx).elements.adjoint() * h * steering(phi_bar_d, n_tx).elements)(0);
    CHECK(std::abs(cplx(y.y_re, y.y_im) - expected) < 1e-10);
  }
}

TEST_CASE("gain process has the configured one-step moments") {
  Rng rng(17);
  GainProcessState base;
  base.alpha = cplx(0.8, -0.5);
  base.rho = 0.95;
  const int n = 20000;
  double sum_re = 0.0, sum_im = 0.0, var_re = 0.0, var_im = 0.0;
  for (int i = 0; i < n; ++i) {
    GainProcessState st = base;
    st = evolve_gain(st, rng);
    sum_re += st.alpha.real();
    sum_im += st.alpha.imag();
    const double dr = st.alpha.real() - base.rho * base.alpha.real();
    const double di = st.alpha.imag() - base.rho * base.alpha.imag();
    var_re += dr * dr;
    var_im += di * di;
  }
  const double innovation_var = 1.0 - base.rho * base.rho;
  CHECK(sum_re / n == doctest::Approx(base.rho * 0.8).epsilon(0.02));
  CHECK(sum_im / n == doctest::Approx(base.rho * -0.5).epsilon(0.02));
  CHECK(var_re / n == doctest::Approx(innovation_var).epsilon(0.05));
  CHECK(var_im / n == doctest::Approx(innovation_var).epsilon(0.05));
}

TEST_CASE("gain process converges to unit variance per component") {
  Rng rng(19);
  GainProcessState st;
  st.rho = 0.9;
  double var = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    st = evolve_gain(st, rng);
    var += st.alpha.real() * st.alpha.real() + st.alpha.imag() * st.alpha.imag();
  }
  CHECK(var / (2.0 * n) == doctest::Approx(1.0).epsilon(0.06));
}

TEST_CASE("stationary draws have unit variance per component") {
  Rng rng(23);
  double var = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const cplx a = stationary_gain(0.995, rng).alpha;
    var += a.real() * a.real() + a.imag() * a.imag();
  }
  CHECK(var / (2.0 * n) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("noise variance auto mode scales with the array sizes") {
  ChannelConfig ch;
  CHECK(ch.effective_noise_variance() == doctest::Approx(0.01));
  ch.n_rx = 8;
  ch.n_tx = 8;
  CHECK(ch.effective_noise_variance() == doctest::Approx(0.04));
  ch.noise_variance = 0.5;
  CHECK(ch.effective_noise_variance() == doctest::Approx(0.5));
}

TEST_CASE("line-of-sight source follows the drive geometry") {
  ScenarioConfig sc;
  ChannelConfig ch;
  auto source = make_channel_source(ch, sc);
  Rng rng(3);
  source->reset(rng);
  REQUIRE(source->total_slots() == 2000);
  KinematicState truth = initial_state(sc);
  for (int k = 0; k < 100; ++k) {
    const ChannelSnapshot snap = source->next(rng);
    REQUIRE(snap.paths.size() == 1);
    CHECK(snap.slot == k);
    const LosAngles ang = los_angles(truth.s, sc);
    CHECK(snap.paths[0].aoa == doctest::Approx(ang.phi_a).epsilon(1e-12));
    CHECK(snap.paths[0].aod == doctest::Approx(ang.phi_d).epsilon(1e-12));
    truth = advance(truth, sc, sc.slot_duration);
  }
}

TEST_CASE("multipath source adds mirrored offset reflections") {
  ScenarioConfig sc;
  ChannelConfig ch;
  ch.source = ChannelSourceKind::multipath;
  ch.multipath_paths = 3;
  auto source = make_channel_source(ch, sc);
  Rng rng(5);
  source->reset(rng);
  double main_power = 0.0, echo_power = 0.0;
  long n = 0;
  for (int k = 0; k < 500; ++k) {
    const ChannelSnapshot snap = source->next(rng);
    REQUIRE(snap.paths.size() == 3);
    CHECK(snap.paths[1].aoa == doctest::Approx(snap.paths[0].aoa + 0.3).epsilon(1e-12));
    CHECK(snap.paths[2].aoa == doctest::Approx(snap.paths[0].aoa - 0.3).epsilon(1e-12));
    for (const auto& p : snap.paths) CHECK(p.aod == doctest::Approx(M_PI - p.aoa).epsilon(1e-12));
    main_power += std::norm(snap.paths[0].gain);
    echo_power += std::norm(snap.paths[1].gain);
    ++n;
  }
  // Echo power is scaled by the squared reflection coefficient.
  CHECK(echo_power / main_power ==
        doctest::Approx(ch.reflection_coeff * ch.reflection_coeff).epsilon(0.25));
}

TEST_CASE("traces round-trip bit-exactly through save and load") {
  ScenarioConfig sc;
  sc.total_time = 0.5;
  ChannelConfig ch;
  ch.multipath_paths = 2;
  Rng rng(29);
  const std::vector<TraceRecord> records = generate_trace(sc, ch, rng);
  REQUIRE(records.size() == 100);
  const auto path = temp_file("beamtrack_trace_roundtrip.csv");
  save_trace(path.string(), records);
  const std::vector<TraceRecord> loaded = load_trace(path.string());
  REQUIRE(loaded.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].step == records[i].step);
    CHECK(loaded[i].position == records[i].position);  // exact: round-trip formatting
    REQUIRE(loaded[i].snapshot.paths.size() == records[i].snapshot.paths.size());
    for (size_t l = 0; l < records[i].snapshot.paths.size(); ++l) {
      CHECK(loaded[i].snapshot.paths[l].gain == records[i].snapshot.paths[l].gain);
      CHECK(loaded[i].snapshot.paths[l].aoa == records[i].snapshot.paths[l].aoa);
      CHECK(loaded[i].snapshot.paths[l].aod == records[i].snapshot.paths[l].aod);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("trace parser reports the offending line") {
  const auto path = temp_file("beamtrack_trace_bad.csv");

  auto write_and_expect = [&](const char* body, const char* needle) {
    {
      std::ofstream out(path);
      out << body;
    }
    try {
      load_trace(path.string());
      FAIL_CHECK("expected parse failure for: " << body);
    } catch (const std::runtime_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find(path.string()) != std::string::npos);
      CHECK(msg.find(needle) != std::string::npos);
    }
  };

  // step indices must be contiguous from zero
  write_and_expect("# header\n1, 0.0, 1, 0.1, 0.2, 1.0, 2.0\n", ":2");
  // a record must carry at least one path
  write_and_expect("0, 0.0, 0\n", ":1");
  // trailing fields are rejected
  write_and_expect("0, 0.0, 1, 0.1, 0.2, 1.0, 2.0, 9.9\n", ":1");
  // non-numeric fields are rejected
  write_and_expect("0, 0.0, 1, 0.1, oops, 1.0, 2.0\n", ":1");
  std::filesystem::remove(path);
}

TEST_CASE("trace-backed source replays records and validates slot counts") {
  ScenarioConfig sc;
  sc.total_time = 0.25;  // 50 slots
  ChannelConfig ch;
  Rng rng(31);
  const std::vector<TraceRecord> records = generate_trace(sc, ch, rng);
  const auto path = temp_file("beamtrack_trace_replay.csv");
  save_trace(path.string(), records);

  ChannelConfig replay = ch;
  replay.source = ChannelSourceKind::trace;
  replay.trace_path = path.string();
  auto source = make_channel_source(replay, sc);
  REQUIRE(source->total_slots() == 50);
  source->reset(rng);
  for (int k = 0; k < 50; ++k) {
    const ChannelSnapshot snap = source->next(rng);
    CHECK(snap.slot == k);
    CHECK(snap.paths[0].gain == records[size_t(k)].snapshot.paths[0].gain);
  }
  // two replays yield identical snapshots
  source->reset(rng);
  const ChannelSnapshot again = source->next(rng);
  CHECK(again.paths[0].gain == records[0].snapshot.paths[0].gain);
  std::filesystem::remove(path);
}
