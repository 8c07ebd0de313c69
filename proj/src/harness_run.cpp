#include "beamtrack/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "beamtrack/link.hpp"
#include "beamtrack/neural.hpp"
#include "beamtrack/rng.hpp"

namespace beamtrack {

namespace {

// Stream ids for per-job RNG substreams. Jobs with the same seed share the
// same streams regardless of sweep value, so sweep curves are compared under
// common random numbers.
constexpr std::uint64_t kStreamTracker = 0;
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamTrain = 2;
constexpr std::uint64_t kStreamEval = 3;
constexpr std::uint64_t kStreamTrace = 4;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

struct SweepJob {
  ExperimentSpec spec;
  std::string value_label;
  std::uint64_t seed = 0;
};

std::vector<SweepJob> expand_jobs(const ExperimentSpec& spec) {
  struct Point {
    ExperimentSpec spec;
    std::string label;
  };
  std::vector<Point> points;
  switch (spec.axis) {
    case SweepAxis::none:
      points.push_back({spec, ""});
      break;
    case SweepAxis::tracking_interval:
      for (double v : spec.sweep_values) {
        if (v <= 0) throw std::runtime_error("run.sweep_values: tracking intervals must be positive");
        Point p{spec, format_double(v)};
        p.spec.tracker.tracking_interval = v;
        points.push_back(std::move(p));
      }
      break;
    case SweepAxis::antennas:
      for (double v : spec.sweep_values) {
        if (v < 1 || v != std::floor(v)) {
          throw std::runtime_error("run.sweep_values: antenna counts must be positive integers");
        }
        Point p{spec, format_double(v)};
        p.spec.channel.n_tx = int(v);
        p.spec.channel.n_rx = int(v);
        points.push_back(std::move(p));
      }
      break;
    case SweepAxis::gamma:
      for (double v : spec.sweep_values) {
        if (v < 0 || v >= 1) throw std::runtime_error("run.sweep_values: gamma must be in [0, 1)");
        Point p{spec, format_double(v)};
        p.spec.agent.gamma = v;
        points.push_back(std::move(p));
      }
      break;
    case SweepAxis::learning_rate:
      for (double v : spec.sweep_values) {
        if (v <= 0) throw std::runtime_error("run.sweep_values: learning rates must be positive");
        Point p{spec, format_double(v)};
        p.spec.agent.lr_actor = v;
        p.spec.agent.lr_critic = v;
        points.push_back(std::move(p));
      }
      for (auto [lr_a, lr_c] : spec.lr_values) {
        if (lr_a <= 0 || lr_c <= 0) {
          throw std::runtime_error("run.sweep_values: learning rates must be positive");
        }
        Point p{spec, format_double(lr_a) + ":" + format_double(lr_c)};
        p.spec.agent.lr_actor = lr_a;
        p.spec.agent.lr_critic = lr_c;
        points.push_back(std::move(p));
      }
      break;
  }
  if (points.empty()) {
    throw std::runtime_error("run.sweep_values: at least one value required for sweep = " +
                             sweep_axis_name(spec.axis));
  }
  std::vector<SweepJob> jobs;
  for (const auto& point : points) {
    for (std::uint64_t seed : spec.seeds) {
      jobs.push_back({point.spec, point.label, seed});
    }
  }
  return jobs;
}

// checkpoint_dir may name the directory holding actor.bin or the file itself.
std::string actor_checkpoint_path(const ExperimentSpec& spec) {
  const std::filesystem::path p(spec.checkpoint_dir);
  if (std::filesystem::is_regular_file(p)) return p.string();
  return (p / "actor.bin").string();
}

ResultRow row_skeleton(const SweepJob& job) {
  ResultRow row;
  row.mode = run_mode_name(job.spec.mode);
  row.source = channel_source_name(job.spec.channel.source);
  row.sweep_axis = sweep_axis_name(job.spec.axis);
  row.sweep_value = job.value_label;
  row.seed = job.seed;
  return row;
}

void fill_from_ledger(ResultRow& row, const DelayLedger& ledger, double slot_duration) {
  row.total_slots = ledger.tracking_slots + ledger.successful_packets + ledger.failed_slots;
  row.tracking_slots = ledger.tracking_slots;
  row.successful_packets = ledger.successful_packets;
  row.failed_slots = ledger.failed_slots;
  // Zero deliveries is a reportable outcome (unbounded per-packet delay),
  // not a failed job.
  row.avg_delay_ms = ledger.successful_packets > 0
                         ? average_delay_ms(ledger, slot_duration)
                         : std::numeric_limits<double>::infinity();
}

ResultRow run_job(const SweepJob& job) {
  ResultRow row = row_skeleton(job);
  try {
    const ExperimentSpec& spec = job.spec;
    auto source = make_channel_source(spec.channel, spec.scenario);
    switch (spec.mode) {
      case RunMode::ekf:
      case RunMode::pf: {
        Rng rng(derive_seed(job.seed, kStreamTracker));
        const TrackerKind kind = spec.mode == RunMode::ekf ? TrackerKind::ekf : TrackerKind::pf;
        const DelayLedger ledger =
            run_tracked_episode(kind, spec.scenario, *source, spec.channel, spec.tracker, rng);
        fill_from_ledger(row, ledger, spec.scenario.slot_duration);
        break;
      }
      case RunMode::ddpg_train: {
        Rng init_rng(derive_seed(job.seed, kStreamInit));
        DdpgAgent agent(spec.agent, spec.channel.effective_noise_variance(), init_rng);
        ReplayBuffer buffer(spec.agent.memory_capacity);
        Rng train_rng(derive_seed(job.seed, kStreamTrain));
        train(agent, buffer, spec.scenario, *source, spec.channel, train_rng, spec.timing);
        Rng eval_rng(derive_seed(job.seed, kStreamEval));
        const EvalResult eval = evaluate(greedy_policy(agent), spec.scenario, *source, spec.channel,
                                         spec.agent, spec.agent.eval_episodes, eval_rng);
        fill_from_ledger(row, eval.ledger, spec.scenario.slot_duration);
        row.avg_delay_ms = eval.mean_delay_ms;
        break;
      }
      case RunMode::ddpg_eval: {
        Rng init_rng(derive_seed(job.seed, kStreamInit));
        DdpgAgent agent(spec.agent, spec.channel.effective_noise_variance(), init_rng);
        agent.set_actor(load_mlp(actor_checkpoint_path(spec)));
        Rng eval_rng(derive_seed(job.seed, kStreamEval));
        const EvalResult eval = evaluate(greedy_policy(agent), spec.scenario, *source, spec.channel,
                                         spec.agent, spec.agent.eval_episodes, eval_rng);
        fill_from_ledger(row, eval.ledger, spec.scenario.slot_duration);
        row.avg_delay_ms = eval.mean_delay_ms;
        break;
      }
    }
  } catch (const std::exception& e) {
    row.error = e.what();
    row.avg_delay_ms = 0.0;
  }
  return row;
}

}  // namespace

std::string csv_header() {
  return "schema_version,mode,source,sweep_axis,sweep_value,seed,total_slots,tracking_slots,"
         "successful_packets,failed_slots,avg_delay_ms,error";
}

std::string csv_line(const ResultRow& row) {
  std::ostringstream out;
  out << row.schema_version << ',' << row.mode << ',' << row.source << ',' << row.sweep_axis << ','
      << csv_escape(row.sweep_value) << ',' << row.seed << ',' << row.total_slots << ','
      << row.tracking_slots << ',' << row.successful_packets << ',' << row.failed_slots << ','
      << format_double(row.avg_delay_ms) << ',' << csv_escape(row.error);
  return out.str();
}

std::vector<ResultRow> run_sweep(const ExperimentSpec& spec, int jobs) {
  const std::vector<SweepJob> work = expand_jobs(spec);
  std::vector<ResultRow> rows(work.size());
  const int workers = std::max(1, std::min<int>(jobs, int(work.size())));
  if (workers == 1) {
    for (size_t i = 0; i < work.size(); ++i) rows[i] = run_job(work[i]);
    return rows;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= work.size()) return;
        rows[i] = run_job(work[i]);
      }
    });
  }
  for (auto& t : pool) t.join();
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << csv_header() << '\n';
  for (const auto& row : rows) out << csv_line(row) << '\n';
}

std::string emit_plot_data(const std::vector<ResultRow>& rows) {
  struct Group {
    std::string label;
    std::vector<double> delays;
  };
  std::vector<Group> groups;
  for (const auto& row : rows) {
    if (!row.error.empty()) continue;
    Group* g = nullptr;
    for (auto& existing : groups) {
      if (existing.label == row.sweep_value) { g = &existing; break; }
    }
    if (!g) {
      groups.push_back({row.sweep_value, {}});
      g = &groups.back();
    }
    g->delays.push_back(row.avg_delay_ms);
  }
  std::ostringstream out;
  out << "x\tmean_delay_ms\tstderr_delay_ms\tn\n";
  for (const auto& g : groups) {
    const size_t n = g.delays.size();
    double mean = 0.0;
    for (double d : g.delays) mean += d;
    mean /= double(n);
    double se = 0.0;
    if (n > 1) {
      double ss = 0.0;
      for (double d : g.delays) ss += (d - mean) * (d - mean);
      se = std::sqrt(ss / double(n - 1)) / std::sqrt(double(n));
    }
    // The label doubles as the x coordinate; lr pairs plot at the actor rate.
    std::string x = g.label.empty() ? std::string("0") : g.label;
    const size_t colon = x.find(':');
    if (colon != std::string::npos) x = x.substr(0, colon);
    out << x << '\t' << format_double(mean) << '\t' << format_double(se) << '\t' << n << '\n';
  }
  return out.str();
}

std::string training_log_csv(const std::vector<EpisodeLog>& log) {
  std::ostringstream out;
  out << "episode,steps,ep_packet,ep_reward,avg_delay_ms,wall_seconds\n";
  for (const auto& e : log) {
    out << e.episode << ',' << e.steps << ',' << e.ep_packet << ',' << format_double(e.ep_reward)
        << ',' << format_double(e.avg_delay_ms) << ',' << format_double(e.wall_seconds) << '\n';
  }
  return out.str();
}

TrainArtifacts train_command(const ExperimentSpec& spec, std::uint64_t seed, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto source = make_channel_source(spec.channel, spec.scenario);
  Rng init_rng(derive_seed(seed, kStreamInit));
  DdpgAgent agent(spec.agent, spec.channel.effective_noise_variance(), init_rng);
  ReplayBuffer buffer(spec.agent.memory_capacity);
  Rng train_rng(derive_seed(seed, kStreamTrain));
  TrainArtifacts artifacts;
  artifacts.log = train(agent, buffer, spec.scenario, *source, spec.channel, train_rng, spec.timing);
  save_mlp(dir + "/actor.bin", agent.actor());
  save_mlp(dir + "/critic.bin", agent.critic());
  std::ofstream log_out(dir + "/training_log.csv", std::ios::binary);
  if (!log_out) throw std::runtime_error("train: cannot write " + dir + "/training_log.csv");
  log_out << training_log_csv(artifacts.log);
  Rng eval_rng(derive_seed(seed, kStreamEval));
  const EvalResult eval = evaluate(greedy_policy(agent), spec.scenario, *source, spec.channel,
                                   spec.agent, spec.agent.eval_episodes, eval_rng);
  artifacts.eval_delay_ms = eval.mean_delay_ms;
  return artifacts;
}

ResultRow eval_command(const ExperimentSpec& spec, std::uint64_t seed, const std::string& checkpoint) {
  SweepJob job;
  job.spec = spec;
  job.spec.mode = RunMode::ddpg_eval;
  if (!checkpoint.empty()) job.spec.checkpoint_dir = checkpoint;
  job.seed = seed;
  return run_job(job);
}

void gen_trace_command(const ExperimentSpec& spec, std::uint64_t seed, const std::string& path) {
  Rng rng(derive_seed(seed, kStreamTrace));
  const std::vector<TraceRecord> records = generate_trace(spec.scenario, spec.channel, rng);
  save_trace(path, records);
}

}  // namespace beamtrack
