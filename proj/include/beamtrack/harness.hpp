#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "beamtrack/channel.hpp"
#include "beamtrack/rl.hpp"
#include "beamtrack/scenario.hpp"
#include "beamtrack/trackers.hpp"

namespace beamtrack {

inline constexpr int kResultSchemaVersion = 1;

enum class RunMode { ekf, pf, ddpg_train, ddpg_eval };

enum class SweepAxis { none, tracking_interval, antennas, gamma, learning_rate };

struct ExperimentSpec {
  ScenarioConfig scenario;
  ChannelConfig channel;
  TrackerOptions tracker;
  AgentConfig agent;
  RunMode mode = RunMode::ekf;
  SweepAxis axis = SweepAxis::none;
  std::vector<double> sweep_values;                   // interval / antennas / gamma axes
  std::vector<std::pair<double, double>> lr_values;   // (lr_actor, lr_critic) axis
  std::vector<std::uint64_t> seeds = {1};
  std::string out = "results.csv";
  std::string checkpoint_dir = ".";
  std::string plot_out;
  bool timing = false;
};

std::string run_mode_name(RunMode mode);
std::string sweep_axis_name(SweepAxis axis);
std::string channel_source_name(ChannelSourceKind kind);

// Line-oriented "key = value" text with [section] headers and '#' comments.
// Unknown keys, type mismatches and out-of-range values are reported with
// the offending key and line number. An empty file yields the defaults.
ExperimentSpec parse_config_text(const std::string& text, const std::string& origin = "<config>");
ExperimentSpec parse_config(const std::string& path);

// Canonical config text for the built-in defaults (or any spec): parses back
// to an identical spec and re-emits byte-identically.
std::string emit_config(const ExperimentSpec& spec);
std::string emit_defaults();

// Applies BEAMTRACK_<SECTION>_<KEY>=value environment overrides.
void apply_env_overrides(ExperimentSpec& spec);

struct ResultRow {
  int schema_version = kResultSchemaVersion;
  std::string mode;
  std::string source;
  std::string sweep_axis;
  std::string sweep_value;
  std::uint64_t seed = 0;
  long total_slots = 0;
  long tracking_slots = 0;
  long successful_packets = 0;
  long failed_slots = 0;
  double avg_delay_ms = 0.0;
  std::string error;  // empty on success; failed jobs keep the sweep alive
};

std::string csv_header();
std::string csv_line(const ResultRow& row);

// Expands the sweep into (value, seed) jobs, runs them on `jobs` workers
// (each with its own RNG stream), and returns rows in deterministic order.
std::vector<ResultRow> run_sweep(const ExperimentSpec& spec, int jobs = 1);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);

// Per-sweep-value mean and standard error of avg_delay_ms, TSV columns
// x, mean_delay_ms, stderr_delay_ms, n. Error rows are skipped.
std::string emit_plot_data(const std::vector<ResultRow>& rows);

struct TrainArtifacts {
  std::vector<EpisodeLog> log;
  double eval_delay_ms = 0.0;
};

// Trains one agent; writes <dir>/actor.bin, <dir>/critic.bin and
// <dir>/training_log.csv; returns the log plus a greedy evaluation.
TrainArtifacts train_command(const ExperimentSpec& spec, std::uint64_t seed, const std::string& dir);

// Loads <checkpoint> and evaluates the greedy policy.
ResultRow eval_command(const ExperimentSpec& spec, std::uint64_t seed, const std::string& checkpoint);

// Writes a synthetic multipath trace for the spec's scenario.
void gen_trace_command(const ExperimentSpec& spec, std::uint64_t seed, const std::string& path);

std::string training_log_csv(const std::vector<EpisodeLog>& log);

}  // namespace beamtrack
