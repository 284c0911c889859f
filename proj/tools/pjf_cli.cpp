// pjf: command-line front end over the C interface.
#include "pjf/pjf.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

struct Common {
  std::string config;
  std::string out;
  long long seed = -1;
  int threads = 1;
};

int report(pjf_status st) {
  if (st != PJF_OK && st != PJF_CHECK_FAILED) std::fprintf(stderr, "pjf: %s\n", pjf_last_error());
  return pjf_exit_code(st);
}

// "preset:<name>" selects a built-in scenario, anything else is a file.
pjf_status open_scenario(const std::string& spec, pjf_scenario** out) {
  const std::string prefix = "preset:";
  if (spec.rfind(prefix, 0) == 0) return pjf_scenario_preset(spec.substr(prefix.size()).c_str(), out);
  return pjf_scenario_load(spec.c_str(), out);
}

void fill(pjf_run_options& o, const Common& c, const std::string& command_line) {
  pjf_run_options_init(&o);
  o.out_dir = c.out.empty() ? nullptr : c.out.c_str();
  o.command_line = command_line.c_str();
  o.scenario_path = c.config.c_str();
  if (c.seed >= 0) {
    o.seed = static_cast<uint64_t>(c.seed);
    o.has_seed = 1;
  }
  o.threads = c.threads;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("config", c.config, "scenario file, or preset:<name>")->required();
  sub->add_option("--out", c.out, "output directory (default $PJF_OUTPUT_ROOT/<command>)");
  sub->add_option("--seed", c.seed, "override the scenario seed")->check(CLI::NonNegativeNumber);
  sub->add_option("--threads", c.threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filtering with predictable jumps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pjf_version()));

  std::string command_line;
  for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

  Common sim_c;
  std::size_t sim_paths = 1;
  auto* sim = app.add_subcommand("simulate", "simulate signal paths and observation records");
  add_common(sim, sim_c);
  sim->add_option("--paths", sim_paths, "number of paths")->check(CLI::PositiveNumber);

  Common fil_c;
  std::string method = "all", events;
  std::size_t fil_particles = 0;
  bool simulate_flag = false, snapshots = false;
  auto* fil = app.add_subcommand("filter", "run a filter on an observation record");
  add_common(fil, fil_c);
  fil->add_option("--method", method, "kalman, ks-particle, zakai-particle, grid or all")
      ->check(CLI::IsMember({"kalman", "ks-particle", "zakai-particle", "grid", "all"}));
  auto* ev_opt = fil->add_option("--events", events, "events CSV (first path_id is used)");
  fil->add_flag("--simulate", simulate_flag, "simulate the record from the scenario seed")->excludes(ev_opt);
  fil->add_option("--particles", fil_particles, "particle count override");
  fil->add_flag("--snapshots", snapshots, "write particle ensembles at every report time");

  Common dia_c;
  std::string checks;
  std::size_t dia_paths = 0, dia_runs = 0, dia_particles = 0;
  bool negative = false;
  auto* dia = app.add_subcommand("diagnose", "run structural checks");
  add_common(dia, dia_c);
  dia->add_option("--checks", checks, "comma list of compensator, martingale, ks-residual, zakai");
  dia->add_option("--paths", dia_paths, "Monte Carlo paths");
  dia->add_option("--runs", dia_runs, "grid or particle runs");
  dia->add_option("--particles", dia_particles, "particles for the unnormalized check");
  dia->add_flag("--negative-control", negative, "run the deliberately corrupted variants");

  std::string val_config;
  auto* val = app.add_subcommand("validate", "validate a scenario file");
  val->add_option("config", val_config, "scenario file")->required();

  std::string preset_name, preset_out;
  auto* pre = app.add_subcommand("preset", "print a built-in scenario");
  pre->add_option("name", preset_name, "ou_kalman, medical, credit_risk or njode_style")->required();
  pre->add_option("--out", preset_out, "write to a file instead of standard output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*val) {
    std::FILE* f = std::fopen(val_config.c_str(), "rb");
    if (!f) {
      std::fprintf(stderr, "pjf: cannot open %s\n", val_config.c_str());
      return 2;
    }
    std::string text;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, f)) > 0;) text.append(buf, n);
    std::fclose(f);
    char* rep = nullptr;
    const pjf_status st = pjf_validate_json(text.c_str(), &rep);
    if (st == PJF_OK) std::printf("valid\n");
    else if (rep) std::fputs(rep, stderr);
    else std::fprintf(stderr, "pjf: %s\n", pjf_last_error());
    pjf_string_free(rep);
    return pjf_exit_code(st);
  }

  if (*pre) {
    char* text = nullptr;
    const pjf_status st = pjf_preset_json(preset_name.c_str(), &text);
    if (st != PJF_OK) return report(st);
    int rc = 0;
    if (preset_out.empty()) {
      std::fputs(text, stdout);
    } else if (std::FILE* f = std::fopen(preset_out.c_str(), "wb")) {
      std::fputs(text, f);
      std::fclose(f);
    } else {
      std::fprintf(stderr, "pjf: cannot write %s\n", preset_out.c_str());
      rc = 2;
    }
    pjf_string_free(text);
    return rc;
  }

  const Common& c = *sim ? sim_c : *fil ? fil_c : dia_c;
  pjf_scenario* scenario = nullptr;
  if (pjf_status st = open_scenario(c.config, &scenario); st != PJF_OK) return report(st);
  pjf_run_options o;
  fill(o, c, command_line);
  pjf_status st = PJF_OK;
  if (*sim) {
    o.paths = sim_paths;
    st = pjf_run_simulate(scenario, &o);
  } else if (*fil) {
    o.particles = fil_particles;
    o.events_path = events.empty() ? nullptr : events.c_str();
    o.snapshots = snapshots;
    st = pjf_run_filter(scenario, method.c_str(), &o);
  } else {
    o.checks = checks.empty() ? nullptr : checks.c_str();
    o.paths = dia_paths;
    o.runs = dia_runs;
    o.particles = dia_particles;
    o.negative_control = negative;
    char* table = nullptr;
    st = pjf_run_diagnose(scenario, &o, &table);
    if (table) std::fputs(table, stdout);
    pjf_string_free(table);
  }
  pjf_scenario_free(scenario);
  return report(st);
}
