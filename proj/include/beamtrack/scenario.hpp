#pragma once

#include <vector>

namespace beamtrack {

// One constant-acceleration segment of the mobility profile.
struct MobilityPhase {
  double duration = 0.0;      // seconds
  double acceleration = 0.0;  // m/s^2
};

struct ScenarioConfig {
  double h_c = 200.0;  // perpendicular distance BS -> road, meters
  double h_r = 200.0;  // initial distance MS -> foot of perpendicular, meters
  double slot_duration = 0.005;  // seconds per transmission slot
  double total_time = 10.0;      // episode length, seconds
  double initial_velocity = 16.0;      // m/s
  double initial_acceleration = -4.0;  // m/s^2
  std::vector<MobilityPhase> phases = {{4.0, -4.0}, {2.0, 0.0}, {4.0, 4.0}};

  int total_slots() const;
  // Throws std::invalid_argument on inconsistent values.
  void validate() const;
};

// Constant 8 m/s drive used for the stationary-channel experiments.
ScenarioConfig stationary_scenario(double speed = 8.0);

struct KinematicState {
  double s = 0.0;  // distance traveled along the road, meters
  double v = 0.0;  // m/s, never negative (vehicle does not reverse)
  double a = 0.0;  // m/s^2 in effect going forward from t
  double t = 0.0;  // seconds since episode start
};

KinematicState initial_state(const ScenarioConfig& cfg);

// Advances the vehicle by dt, splitting analytically at phase boundaries and
// at velocity-zero crossings (the vehicle holds position while braking at
// rest). Throws std::out_of_range past total_time.
KinematicState advance(const KinematicState& state, const ScenarioConfig& cfg, double dt);

struct LosAngles {
  double phi_a = 0.0;  // angle of arrival at the BS array, radians in (0, pi)
  double phi_d = 0.0;  // angle of departure at the MS array, radians in (0, pi)
};

// Line-of-sight geometry for a vehicle at distance s along the road.
LosAngles los_angles(double s, const ScenarioConfig& cfg);

}  // namespace beamtrack
