#include "beamtrack/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
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

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_spaces(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  }
  return out;
}

struct KeyContext {
  std::string origin;
  long line = 0;
  std::string key;  // section.key

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + key + ": " + msg);
  }
};

double parse_double(const std::string& v, const KeyContext& ctx) {
  char* end = nullptr;
  const std::string s = trim(v);
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) ctx.fail("expected a number, got '" + v + "'");
  return out;
}

long parse_int(const std::string& v, const KeyContext& ctx) {
  const double d = parse_double(v, ctx);
  if (d != std::floor(d)) ctx.fail("expected an integer, got '" + v + "'");
  return static_cast<long>(d);
}

bool parse_bool(const std::string& v, const KeyContext& ctx) {
  const std::string s = trim(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  ctx.fail("expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(strip_spaces(v));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

struct KeyDef {
  const char* section;
  const char* key;
  std::function<void(ExperimentSpec&, const std::string&, const KeyContext&)> set;
  std::function<std::string(const ExperimentSpec&)> get;
};

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      {"scenario", "h_c",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.scenario.h_c = parse_double(v, c);
         if (s.scenario.h_c <= 0) c.fail("must be positive");
       },
       [](const ExperimentSpec& s) { return format_double(s.scenario.h_c); }},
      {"scenario", "h_r",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.scenario.h_r = parse_double(v, c);
         if (s.scenario.h_r <= 0) c.fail("must be positive");
       },
       [](const ExperimentSpec& s) { return format_double(s.scenario.h_r); }},
      {"scenario", "slot_duration",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.scenario.slot_duration = parse_double(v, c);
         if (s.scenario.slot_duration <= 0) c.fail("must be positive");
       },
       [](const ExperimentSpec& s) { return format_double(s.scenario.slot_duration); }},
      {"scenario", "total_time",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.scenario.total_time = parse_double(v, c);
         if (s.scenario.total_time <= 0) c.fail("must be positive");
       },
       [](const ExperimentSpec& s) { return format_double(s.scenario.total_time); }},
      {"scenario", "initial_velocity",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.scenario.initial_velocity = parse_double(v, c);
         if (s.scenario.initial_velocity < 0) c.fail("must be non-negative");
       },
       [](const ExperimentSpec& s) { return format_double(s.scenario.initial_velocity); }},
      {"scenario", "initial_acceleration",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.scenario.initial_acceleration = parse_double(v, c);
       },
       [](const ExperimentSpec& s) { return format_double(s.scenario.initial_acceleration); }},
      {"scenario", "phases",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         std::vector<MobilityPhase> phases;
         for (const auto& part : split_list(v)) {
           const size_t colon = part.find(':');
           if (colon == std::string::npos) c.fail("expected duration:acceleration pairs");
           MobilityPhase p;
           p.duration = parse_double(part.substr(0, colon), c);
           p.acceleration = parse_double(part.substr(colon + 1), c);
           if (p.duration <= 0) c.fail("phase durations must be positive");
           phases.push_back(p);
         }
         if (phases.empty()) c.fail("at least one phase required");
         s.scenario.phases = std::move(phases);
       },
       [](const ExperimentSpec& s) {
         std::string out;
         for (size_t i = 0; i < s.scenario.phases.size(); ++i) {
           if (i) out += ",";
           out += format_double(s.scenario.phases[i].duration) + ":" +
                  format_double(s.scenario.phases[i].acceleration);
         }
         return out;
       }},
      {"channel", "n_tx",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.channel.n_tx = int(parse_int(v, c));
         if (s.channel.n_tx < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.channel.n_tx); }},
      {"channel", "n_rx",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.channel.n_rx = int(parse_int(v, c));
         if (s.channel.n_rx < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.channel.n_rx); }},
      {"channel", "spacing",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.channel.spacing = parse_double(v, c);
         if (s.channel.spacing <= 0) c.fail("must be positive");
       },
       [](const ExperimentSpec& s) { return format_double(s.channel.spacing); }},
      {"channel", "rho",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.channel.rho = parse_double(v, c);
         if (s.channel.rho < 0 || s.channel.rho > 1) c.fail("must be in [0, 1]");
       },
       [](const ExperimentSpec& s) { return format_double(s.channel.rho); }},
      {"channel", "noise_variance",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         if (trim(v) == "auto") {
           s.channel.noise_variance = 0.0;
         } else {
           s.channel.noise_variance = parse_double(v, c);
           if (s.channel.noise_variance <= 0) c.fail("must be positive or 'auto'");
         }
       },
       [](const ExperimentSpec& s) {
         return s.channel.noise_variance > 0 ? format_double(s.channel.noise_variance)
                                             : std::string("auto");
       }},
      {"channel", "snr_threshold_db",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.channel.snr_threshold_db = parse_double(v, c);
       },
       [](const ExperimentSpec& s) { return format_double(s.channel.snr_threshold_db); }},
      {"channel", "source",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         const std::string t = trim(v);
         if (t == "los") s.channel.source = ChannelSourceKind::los;
         else if (t == "multipath") s.channel.source = ChannelSourceKind::multipath;
         else if (t == "trace") s.channel.source = ChannelSourceKind::trace;
         else c.fail("expected los, multipath or trace");
       },
       [](const ExperimentSpec& s) { return channel_source_name(s.channel.source); }},
      {"channel", "trace_path",
       [](ExperimentSpec& s, const std::string& v, const KeyContext&) {
         s.channel.trace_path = trim(v);
       },
       [](const ExperimentSpec& s) { return s.channel.trace_path; }},
      {"channel", "multipath_paths",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.channel.multipath_paths = int(parse_int(v, c));
         if (s.channel.multipath_paths < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.channel.multipath_paths); }},
      {"channel", "reflection_coeff",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.channel.reflection_coeff = parse_double(v, c);
         if (s.channel.reflection_coeff < 0 || s.channel.reflection_coeff > 1) {
           c.fail("must be in [0, 1]");
         }
       },
       [](const ExperimentSpec& s) { return format_double(s.channel.reflection_coeff); }},
      {"tracker", "sigma_u",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.tracker.sigma_u = parse_double(v, c);
         if (s.tracker.sigma_u <= 0) c.fail("must be positive");
       },
       [](const ExperimentSpec& s) { return format_double(s.tracker.sigma_u); }},
      {"tracker", "particles",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.tracker.particle_count = int(parse_int(v, c));
         if (s.tracker.particle_count < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.tracker.particle_count); }},
      {"tracker", "phi_threshold",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         if (trim(v) == "auto") {
           s.tracker.phi_threshold = 0.0;
         } else {
           s.tracker.phi_threshold = parse_double(v, c);
           if (s.tracker.phi_threshold <= 0) c.fail("must be positive or 'auto'");
         }
       },
       [](const ExperimentSpec& s) {
         return s.tracker.phi_threshold > 0 ? format_double(s.tracker.phi_threshold)
                                            : std::string("auto");
       }},
      {"tracker", "tracking_interval",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.tracker.tracking_interval = parse_double(v, c);
         if (s.tracker.tracking_interval <= 0) c.fail("must be positive");
       },
       [](const ExperimentSpec& s) { return format_double(s.tracker.tracking_interval); }},
      {"agent", "gamma",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.gamma = parse_double(v, c);
         if (s.agent.gamma < 0 || s.agent.gamma >= 1) c.fail("must be in [0, 1)");
       },
       [](const ExperimentSpec& s) { return format_double(s.agent.gamma); }},
      {"agent", "lr_actor",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.lr_actor = parse_double(v, c);
         if (s.agent.lr_actor <= 0) c.fail("must be positive");
       },
       [](const ExperimentSpec& s) { return format_double(s.agent.lr_actor); }},
      {"agent", "lr_critic",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.lr_critic = parse_double(v, c);
         if (s.agent.lr_critic <= 0) c.fail("must be positive");
       },
       [](const ExperimentSpec& s) { return format_double(s.agent.lr_critic); }},
      {"agent", "tau_mix",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.tau_mix = parse_double(v, c);
         if (s.agent.tau_mix <= 0 || s.agent.tau_mix > 1) c.fail("must be in (0, 1]");
       },
       [](const ExperimentSpec& s) { return format_double(s.agent.tau_mix); }},
      {"agent", "batch_size",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.batch_size = int(parse_int(v, c));
         if (s.agent.batch_size < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.agent.batch_size); }},
      {"agent", "memory_capacity",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.memory_capacity = int(parse_int(v, c));
         if (s.agent.memory_capacity < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.agent.memory_capacity); }},
      {"agent", "slots_per_step",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.slots_per_step = int(parse_int(v, c));
         if (s.agent.slots_per_step < 2) c.fail("must be >= 2");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.agent.slots_per_step); }},
      {"agent", "episodes",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.episodes = int(parse_int(v, c));
         if (s.agent.episodes < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.agent.episodes); }},
      {"agent", "max_steps",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.max_steps = int(parse_int(v, c));
         if (s.agent.max_steps < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.agent.max_steps); }},
      {"agent", "hidden",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.hidden = int(parse_int(v, c));
         if (s.agent.hidden < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.agent.hidden); }},
      {"agent", "noise_sigma",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.noise_sigma = parse_double(v, c);
         if (s.agent.noise_sigma < 0) c.fail("must be non-negative");
       },
       [](const ExperimentSpec& s) { return format_double(s.agent.noise_sigma); }},
      {"agent", "noise_decay",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.noise_decay = parse_double(v, c);
         if (s.agent.noise_decay <= 0 || s.agent.noise_decay > 1) c.fail("must be in (0, 1]");
       },
       [](const ExperimentSpec& s) { return format_double(s.agent.noise_decay); }},
      {"agent", "warmup_batches",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.warmup_batches = int(parse_int(v, c));
         if (s.agent.warmup_batches < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.agent.warmup_batches); }},
      {"agent", "packet_bonus",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.packet_bonus = parse_double(v, c);
       },
       [](const ExperimentSpec& s) { return format_double(s.agent.packet_bonus); }},
      {"agent", "actor_output_relu",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.actor_output_relu = parse_bool(v, c);
       },
       [](const ExperimentSpec& s) { return std::string(s.agent.actor_output_relu ? "true" : "false"); }},
      {"agent", "eval_episodes",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.agent.eval_episodes = int(parse_int(v, c));
         if (s.agent.eval_episodes < 1) c.fail("must be >= 1");
       },
       [](const ExperimentSpec& s) { return std::to_string(s.agent.eval_episodes); }},
      {"run", "mode",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         const std::string t = trim(v);
         if (t == "ekf") s.mode = RunMode::ekf;
         else if (t == "pf") s.mode = RunMode::pf;
         else if (t == "ddpg-train") s.mode = RunMode::ddpg_train;
         else if (t == "ddpg-eval") s.mode = RunMode::ddpg_eval;
         else c.fail("expected ekf, pf, ddpg-train or ddpg-eval");
       },
       [](const ExperimentSpec& s) { return run_mode_name(s.mode); }},
      {"run", "sweep",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         const std::string t = trim(v);
         if (t == "none") s.axis = SweepAxis::none;
         else if (t == "tracking_interval") s.axis = SweepAxis::tracking_interval;
         else if (t == "antennas") s.axis = SweepAxis::antennas;
         else if (t == "gamma") s.axis = SweepAxis::gamma;
         else if (t == "lr") s.axis = SweepAxis::learning_rate;
         else c.fail("expected none, tracking_interval, antennas, gamma or lr");
       },
       [](const ExperimentSpec& s) { return sweep_axis_name(s.axis); }},
      {"run", "sweep_values",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.sweep_values.clear();
         s.lr_values.clear();
         for (const auto& part : split_list(v)) {
           const size_t colon = part.find(':');
           if (colon == std::string::npos) {
             s.sweep_values.push_back(parse_double(part, c));
           } else {
             s.lr_values.emplace_back(parse_double(part.substr(0, colon), c),
                                      parse_double(part.substr(colon + 1), c));
           }
         }
       },
       [](const ExperimentSpec& s) {
         std::string out;
         for (size_t i = 0; i < s.sweep_values.size(); ++i) {
           if (i) out += ",";
           out += format_double(s.sweep_values[i]);
         }
         for (size_t i = 0; i < s.lr_values.size(); ++i) {
           if (!out.empty()) out += ",";
           out += format_double(s.lr_values[i].first) + ":" + format_double(s.lr_values[i].second);
         }
         return out;
       }},
      {"run", "seeds",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.seeds.clear();
         for (const auto& part : split_list(v)) {
           const long n = parse_int(part, c);
           if (n < 0) c.fail("seeds must be non-negative");
           s.seeds.push_back(std::uint64_t(n));
         }
         if (s.seeds.empty()) c.fail("at least one seed required");
       },
       [](const ExperimentSpec& s) {
         std::string out;
         for (size_t i = 0; i < s.seeds.size(); ++i) {
           if (i) out += ",";
           out += std::to_string(s.seeds[i]);
         }
         return out;
       }},
      {"run", "out",
       [](ExperimentSpec& s, const std::string& v, const KeyContext&) { s.out = trim(v); },
       [](const ExperimentSpec& s) { return s.out; }},
      {"run", "checkpoint_dir",
       [](ExperimentSpec& s, const std::string& v, const KeyContext&) { s.checkpoint_dir = trim(v); },
       [](const ExperimentSpec& s) { return s.checkpoint_dir; }},
      {"run", "plot_out",
       [](ExperimentSpec& s, const std::string& v, const KeyContext&) { s.plot_out = trim(v); },
       [](const ExperimentSpec& s) { return s.plot_out; }},
      {"run", "timing",
       [](ExperimentSpec& s, const std::string& v, const KeyContext& c) {
         s.timing = parse_bool(v, c);
       },
       [](const ExperimentSpec& s) { return std::string(s.timing ? "true" : "false"); }},
  };
  return table;
}

const KeyDef* find_key(const std::string& section, const std::string& key) {
  for (const auto& def : key_table()) {
    if (section == def.section && key == def.key) return &def;
  }
  return nullptr;
}

void validate_spec(const ExperimentSpec& spec, const std::string& origin) {
  try {
    spec.scenario.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  if (spec.channel.source == ChannelSourceKind::trace && spec.channel.trace_path.empty()) {
    throw std::runtime_error(origin + ": channel.trace_path: required when source = trace");
  }
}

}  // namespace

std::string run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::ekf: return "ekf";
    case RunMode::pf: return "pf";
    case RunMode::ddpg_train: return "ddpg-train";
    case RunMode::ddpg_eval: return "ddpg-eval";
  }
  return "?";
}

std::string sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::none: return "none";
    case SweepAxis::tracking_interval: return "tracking_interval";
    case SweepAxis::antennas: return "antennas";
    case SweepAxis::gamma: return "gamma";
    case SweepAxis::learning_rate: return "lr";
  }
  return "?";
}

std::string channel_source_name(ChannelSourceKind kind) {
  switch (kind) {
    case ChannelSourceKind::los: return "los";
    case ChannelSourceKind::multipath: return "multipath";
    case ChannelSourceKind::trace: return "trace";
  }
  return "?";
}

ExperimentSpec parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentSpec spec;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  std::string section;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": unterminated section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const auto& def : key_table()) {
        if (section == def.section) { known = true; break; }
      }
      if (!known) {
        throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": unknown section [" +
                                 section + "]");
      }
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": expected 'key = value', got '" + t + "'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty()) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": key '" + key +
                               "' appears before any [section]");
    }
    const KeyDef* def = find_key(section, key);
    if (!def) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": unknown key '" + section +
                               "." + key + "'");
    }
    def->set(spec, value, KeyContext{origin, line_no, section + "." + key});
  }
  validate_spec(spec, origin);
  return spec;
}

ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string emit_config(const ExperimentSpec& spec) {
  std::string out;
  std::string section;
  for (const auto& def : key_table()) {
    if (section != def.section) {
      if (!section.empty()) out += "\n";
      section = def.section;
      out += "[" + section + "]\n";
    }
    out += std::string(def.key) + " = " + def.get(spec) + "\n";
  }
  return out;
}

std::string emit_defaults() { return emit_config(ExperimentSpec{}); }

void apply_env_overrides(ExperimentSpec& spec) {
  for (const auto& def : key_table()) {
    std::string name = "BEAMTRACK_";
    for (const char* p = def.section; *p; ++p) name.push_back(char(std::toupper(*p)));
    name.push_back('_');
    for (const char* p = def.key; *p; ++p) name.push_back(char(std::toupper(*p)));
    if (const char* value = std::getenv(name.c_str())) {
      def.set(spec, value, KeyContext{"$" + name, 0, std::string(def.section) + "." + def.key});
    }
  }
}

}  // namespace beamtrack
