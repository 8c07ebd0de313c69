#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "beamtrack/harness.hpp"

namespace {

beamtrack::ExperimentSpec load_spec(const std::string& config_path) {
  beamtrack::ExperimentSpec spec;
  if (!config_path.empty()) spec = beamtrack::parse_config(config_path);
  beamtrack::apply_env_overrides(spec);
  return spec;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

int run_rows(beamtrack::ExperimentSpec spec, const std::vector<std::uint64_t>& seeds,
             const std::string& out_override, const std::string& plot_override, int jobs) {
  if (!seeds.empty()) spec.seeds = seeds;
  if (!out_override.empty()) spec.out = out_override;
  if (!plot_override.empty()) spec.plot_out = plot_override;
  const std::vector<beamtrack::ResultRow> rows = beamtrack::run_sweep(spec, jobs);
  std::ostringstream csv;
  beamtrack::write_results_csv(csv, rows);
  write_file(spec.out, csv.str());
  if (!spec.plot_out.empty()) write_file(spec.plot_out, beamtrack::emit_plot_data(rows));
  long failures = 0;
  for (const auto& row : rows) {
    if (!row.error.empty()) {
      ++failures;
      std::cerr << "job failed (mode=" << row.mode << " value=" << row.sweep_value
                << " seed=" << row.seed << "): " << row.error << "\n";
    }
  }
  std::cout << "wrote " << rows.size() << " rows to " << spec.out;
  if (!spec.plot_out.empty()) std::cout << " and plot data to " << spec.plot_out;
  std::cout << "\n";
  return failures == long(rows.size()) && !rows.empty() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmWave beam tracking experiments: Kalman/particle trackers and a DDPG scheduler"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config,-c", config_path, "experiment config file")->envname("BEAMTRACK_CONFIG");

  std::vector<std::uint64_t> seeds;
  std::string out_path;
  std::string plot_path;
  std::string checkpoint;
  int jobs = 1;
  bool timing = false;

  auto add_common = [&](CLI::App* cmd, bool with_jobs) {
    cmd->fallthrough();
    cmd->add_option("--seed,-s", seeds, "override the seed list");
    cmd->add_option("--out,-o", out_path, "output path override");
    if (with_jobs) {
      cmd->add_option("--jobs,-j", jobs, "worker threads")->check(CLI::PositiveNumber);
      cmd->add_option("--plot", plot_path, "also write per-sweep-value plot data (TSV)");
    }
    cmd->add_flag("--timing", timing, "record wall-clock timings (breaks byte-identical logs)");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "run the configured mode once per seed");
  add_common(cmd_run, true);
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "run the configured parameter sweep");
  add_common(cmd_sweep, true);
  CLI::App* cmd_train = app.add_subcommand("train", "train a DDPG agent and save checkpoints");
  add_common(cmd_train, false);
  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a saved actor checkpoint");
  add_common(cmd_eval, false);
  cmd_eval->add_option("--checkpoint", checkpoint, "actor.bin file or its directory");
  CLI::App* cmd_trace = app.add_subcommand("gen-trace", "write a synthetic channel trace");
  add_common(cmd_trace, false);
  CLI::App* cmd_defaults = app.add_subcommand("emit-defaults", "print the default config");
  cmd_defaults->fallthrough();
  cmd_defaults->add_option("--out,-o", out_path, "write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_defaults->parsed()) {
      const std::string text = beamtrack::emit_defaults();
      if (out_path.empty()) {
        std::cout << text;
      } else {
        write_file(out_path, text);
      }
      return 0;
    }

    beamtrack::ExperimentSpec spec = load_spec(config_path);
    if (timing) spec.timing = true;

    if (cmd_run->parsed()) {
      spec.axis = beamtrack::SweepAxis::none;
      return run_rows(std::move(spec), seeds, out_path, plot_path, jobs);
    }
    if (cmd_sweep->parsed()) {
      return run_rows(std::move(spec), seeds, out_path, plot_path, jobs);
    }

    const std::uint64_t seed = seeds.empty() ? spec.seeds.front() : seeds.front();

    if (cmd_train->parsed()) {
      const std::string dir = out_path.empty() ? spec.checkpoint_dir : out_path;
      const beamtrack::TrainArtifacts artifacts = beamtrack::train_command(spec, seed, dir);
      std::cout << "trained " << artifacts.log.size() << " episodes; checkpoints in " << dir
                << "\ngreedy evaluation: " << artifacts.eval_delay_ms << " ms average delay\n";
      return 0;
    }
    if (cmd_eval->parsed()) {
      const beamtrack::ResultRow row = beamtrack::eval_command(spec, seed, checkpoint);
      std::cout << beamtrack::csv_header() << "\n" << beamtrack::csv_line(row) << "\n";
      if (!out_path.empty()) {
        write_file(out_path, beamtrack::csv_header() + "\n" + beamtrack::csv_line(row) + "\n");
      }
      return row.error.empty() ? 0 : 1;
    }
    if (cmd_trace->parsed()) {
      if (out_path.empty()) throw std::runtime_error("gen-trace requires --out");
      beamtrack::gen_trace_command(spec, seed, out_path);
      std::cout << "wrote trace to " << out_path << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
