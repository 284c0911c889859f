#include "pjf/runner.hpp"

#include "pjf/kalman_jump.hpp"
#include "pjf/oracle_grid.hpp"
#include "pjf/parallel.hpp"
#include "pjf/particle.hpp"
#include "pjf/scenario_io.hpp"
#include "pjf/version.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

namespace pjf {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << content;
  if (!out) fail(ErrorCode::Io, "failed writing " + path.string());
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorCode::Io, "cannot create output directory " + dir.string());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Reproducible timestamp: SOURCE_DATE_EPOCH when set, the epoch otherwise.
std::string build_timestamp() {
  std::time_t t = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t seed_of(const ValidatedScenario& s, const RunOptions& o) { return o.seed.value_or(s.config().seed); }

// The manifest lists every output up front and is written before any of them.
void write_manifest(const ValidatedScenario& scenario, const RunOptions& options, const std::string& command,
                    std::vector<std::string> outputs) {
  prepare_dir(options.out_dir);
  const std::string canonical = scenario_to_json(scenario.config());
  outputs.insert(outputs.begin(), "scenario.json");
  nlohmann::ordered_json j;
  j["tool"] = "pjf";
  j["version"] = kVersion;
  j["command"] = command;
  j["command_line"] = options.command_line;
  j["scenario"] = {{"path", options.scenario_path},
                   {"preset", std::string(preset_name(scenario.config().preset))},
                   {"fnv1a", hex64(fnv1a(canonical))}};
  j["seed"] = seed_of(scenario, options);
  j["threads"] = options.threads;
  j["timestamp"] = build_timestamp();
  j["outputs"] = outputs;
  write_file(options.out_dir / "manifest.json", j.dump(2) + "\n");
  write_file(options.out_dir / "scenario.json", canonical);
}

std::string indexed(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu%s", stem, i, ext);
  return buf;
}

int event_label(int idx) { return idx < 0 ? -1 : idx + 1; }

std::string path_csv(const SimulatedRun& run, std::size_t id) {
  const auto& p = run.path;
  std::ostringstream os;
  os << "path_id,t";
  for (std::size_t i = 1; i <= p.m; ++i) os << ",x_" << i;
  for (std::size_t i = 1; i <= p.n; ++i) os << ",y_" << i;
  os << ",is_jump_time,event_index\n";
  for (std::size_t r = 0; r < p.rows(); ++r) {
    os << id << ',' << csv_number(p.t[r]);
    for (std::size_t i = 0; i < p.m; ++i) os << ',' << csv_number(p.x_at(r)[i]);
    for (std::size_t i = 0; i < p.n; ++i) os << ',' << csv_number(p.y_at(r)[i]);
    os << ',' << static_cast<int>(p.is_jump_time[r]) << ',' << event_label(p.event_index[r]) << '\n';
  }
  return os.str();
}

std::string events_csv(const std::vector<ObservationEvent>& events, std::size_t n, std::size_t id) {
  std::ostringstream os;
  os << "path_id,i,T_i";
  for (std::size_t k = 1; k <= n; ++k) os << ",dY_" << k;
  os << '\n';
  for (const auto& e : events) {
    os << id << ',' << e.index + 1 << ',' << csv_number(e.time);
    for (double v : e.dy) os << ',' << csv_number(v);
    os << '\n';
  }
  return os.str();
}

std::string matrix_header(const char* stem, std::size_t rows, std::size_t cols) {
  std::string h;
  for (std::size_t i = 1; i <= rows; ++i)
    for (std::size_t j = 1; j <= cols; ++j) h += "," + std::string(stem) + std::to_string(i) + std::to_string(j);
  return h;
}

std::string vector_header(const char* stem, std::size_t n) {
  std::string h;
  for (std::size_t i = 1; i <= n; ++i) h += "," + std::string(stem) + std::to_string(i);
  return h;
}

void put_matrix(std::ostringstream& os, const EMat& mtx, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      os << ',' << (mtx.size() ? csv_number(mtx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) : "");
}

std::string kalman_csv(const FilterTrajectory& traj, std::size_t m, std::size_t n) {
  std::ostringstream os;
  os << "t,side" << vector_header("m_", m) << matrix_header("P_", m, m) << ",event_index" << vector_header("v_", n)
     << matrix_header("S_", n, n) << matrix_header("K_", m, n) << '\n';
  for (const auto& r : traj.rows) {
    os << csv_number(r.at.t) << ',' << side_name(r.at.side);
    for (std::size_t i = 0; i < m; ++i) os << ',' << csv_number(r.m(static_cast<Eigen::Index>(i)));
    put_matrix(os, r.p, m, m);
    os << ',' << event_label(r.at.event_index);
    for (std::size_t i = 0; i < n; ++i) os << ',' << (r.v.size() ? csv_number(r.v(static_cast<Eigen::Index>(i))) : "");
    put_matrix(os, r.s, n, n);
    put_matrix(os, r.k, m, n);
    os << '\n';
  }
  return os.str();
}

std::string jump_comparison_csv(const FilterTrajectory& with, const FilterTrajectory& without, std::size_t m) {
  std::ostringstream os;
  os << "t,side,event_index" << vector_header("m_jump_", m) << matrix_header("P_jump_", m, m)
     << vector_header("m_nojump_", m) << matrix_header("P_nojump_", m, m) << '\n';
  for (std::size_t k = 0; k < with.rows.size(); ++k) {
    const auto& a = with.rows[k];
    const auto& b = without.rows[k];
    os << csv_number(a.at.t) << ',' << side_name(a.at.side) << ',' << event_label(a.at.event_index);
    for (std::size_t i = 0; i < m; ++i) os << ',' << csv_number(a.m(static_cast<Eigen::Index>(i)));
    put_matrix(os, a.p, m, m);
    for (std::size_t i = 0; i < m; ++i) os << ',' << csv_number(b.m(static_cast<Eigen::Index>(i)));
    put_matrix(os, b.p, m, m);
    os << '\n';
  }
  return os.str();
}

std::string summary_csv(const ParticleRun& run) {
  std::ostringstream os;
  os << "t,side,event_index,phi_name,estimate,bootstrap_se,ess,log_rho1\n";
  for (const auto& r : run.rows)
    os << csv_number(r.at.t) << ',' << side_name(r.at.side) << ',' << event_label(r.at.event_index) << ',' << r.phi
       << ',' << csv_number(r.estimate) << ',' << csv_number(r.se) << ',' << csv_number(r.ess) << ','
       << csv_number(r.log_rho1) << '\n';
  return os.str();
}

std::string trace_csv(const ParticleRun& run) {
  std::ostringstream os;
  os << "event_index,ess,threshold,resampled\n";
  for (const auto& r : run.trace)
    os << event_label(r.event_index) << ',' << csv_number(r.ess) << ',' << csv_number(r.threshold) << ','
       << (r.resampled ? 1 : 0) << '\n';
  return os.str();
}

std::string grid_summary_csv(const GridRun& run) {
  std::ostringstream os;
  os << "t,side,event_index,mean,var,mass\n";
  for (const auto& r : run.rows)
    os << csv_number(r.at.t) << ',' << side_name(r.at.side) << ',' << event_label(r.at.event_index) << ','
       << csv_number(r.mean) << ',' << csv_number(r.var) << ',' << csv_number(r.mass) << '\n';
  return os.str();
}

std::string grid_density_csv(const GridRun& run) {
  std::ostringstream os;
  os << "t,side,node_x,p\n";
  auto dump = [&](const GridDensity& d, const char* side) {
    for (std::size_t i = 0; i < d.nodes(); ++i)
      os << csv_number(d.t) << ',' << side << ',' << csv_number(d.node(i)) << ',' << csv_number(d.p[i]) << '\n';
  };
  for (std::size_t i = 0; i < run.pre.size(); ++i) {
    dump(run.pre[i], "pre");
    dump(run.post[i], "post");
  }
  return os.str();
}

std::vector<ObservationEvent> events_for(const ValidatedScenario& scenario, const RunOptions& options) {
  if (options.events_path) return read_events_csv(*options.events_path, scenario.model().n);
  SimulationOptions so;
  so.record_path = false;
  return simulate_path(scenario, seed_of(scenario, options), 0, so).events;
}

ParticleRun particle_run(const ValidatedScenario& scenario, const std::vector<ObservationEvent>& events,
                         WeightMode mode, const RunOptions& options, std::string* snapshots) {
  const auto& cfg = scenario.config();
  ParticleRunOptions po;
  po.particles = options.particles ? options.particles : cfg.filter.particles;
  po.threshold = cfg.filter.resample_threshold;
  po.seed = seed_of(scenario, options);
  po.threads = options.threads;
  std::ostringstream snap;
  if (snapshots) {
    snap << "t,side,particle_id" << vector_header("x_", cfg.model.m) << ",log_w\n";
    po.snapshot = [&](const ReportPoint& at, const ParticleEnsemble& e) {
      for (std::size_t j = 0; j < e.size; ++j) {
        snap << csv_number(at.t) << ',' << side_name(at.side) << ',' << j;
        for (std::size_t i = 0; i < e.m; ++i) snap << ',' << csv_number(e.at(j)[i]);
        snap << ',' << csv_number(e.log_w[j]) << '\n';
      }
    };
  }
  ParticleRun run = run_particle_filter(scenario, events, mode, default_battery(cfg.model.m), po);
  if (snapshots) *snapshots = snap.str();
  return run;
}

bool zakai_applicable(const ModelSpec& model) { return !model.jump_law.eta_is_discrete(); }

FilterTrajectory no_jump_kalman(const ValidatedScenario& scenario, const std::vector<ObservationEvent>& events) {
  ScenarioConfig cfg = scenario.config();
  cfg.model.jump.kind = JumpMap::Kind::None;
  return run_kalman(validate_or_throw(cfg), events);
}

}  // namespace

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path default_out_dir(const std::string& command) {
  const char* root = std::getenv("PJF_OUTPUT_ROOT");
  return fs::path(root && *root ? root : "pjf_out") / command;
}

void run_simulate(const ValidatedScenario& scenario, const RunOptions& options) {
  const std::size_t paths = options.paths ? options.paths : 1;
  std::vector<std::string> outputs;
  for (std::size_t p = 0; p < paths; ++p) {
    outputs.push_back(indexed("path", p, ".csv"));
    outputs.push_back(indexed("events", p, ".csv"));
  }
  write_manifest(scenario, options, "simulate", outputs);
  const std::uint64_t seed = seed_of(scenario, options);
  const std::size_t n = scenario.model().n;
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < paths; start += kBatch) {
    const std::size_t count = std::min(kBatch, paths - start);
    std::vector<std::pair<std::string, std::string>> text(count);
    parallel_for(count, options.threads, [&](std::size_t k) {
      const std::size_t p = start + k;
      const SimulatedRun run = simulate_path(scenario, seed, p);
      text[k] = {path_csv(run, p), events_csv(run.events, n, p)};
    });
    for (std::size_t k = 0; k < count; ++k) {
      write_file(options.out_dir / indexed("path", start + k, ".csv"), text[k].first);
      write_file(options.out_dir / indexed("events", start + k, ".csv"), text[k].second);
    }
  }
}

void run_filter(const ValidatedScenario& scenario, const std::string& method, const RunOptions& options) {
  const auto& model = scenario.model();
  const bool all = method == "all";
  bool do_kalman = method == "kalman", do_ks = method == "ks-particle", do_zakai = method == "zakai-particle",
       do_grid = method == "grid";
  if (!all && !do_kalman && !do_ks && !do_zakai && !do_grid)
    fail(ErrorCode::InvalidConfig, "unknown filter method '" + method + "'");
  if (all) {
    do_kalman = try_linear_params(scenario).has_value();
    do_ks = true;
    do_zakai = zakai_applicable(model);
    do_grid = is_one_dimensional(model);
  }
  // Fail on incompatibility before anything is written.
  if (do_kalman && !all) linear_params(scenario);
  if (do_zakai && !all) require_zakai_support(model);
  if (do_grid && !is_one_dimensional(model))
    fail(ErrorCode::IncompatibleMethod, "the grid filter needs a scalar signal and observation");

  const auto events = events_for(scenario, options);
  std::vector<std::string> outputs{"events.csv"};
  if (do_kalman) outputs.insert(outputs.end(), {"kalman_trajectory.csv", "kalman_no_jump_comparison.csv"});
  for (auto [on, stem] : {std::pair{do_ks, "ks_particle"}, std::pair{do_zakai, "zakai_particle"}}) {
    if (!on) continue;
    outputs.push_back(std::string(stem) + "_summary.csv");
    outputs.push_back(std::string(stem) + "_resampling.csv");
    if (options.snapshots) outputs.push_back(std::string(stem) + "_snapshots.csv");
  }
  if (do_grid) outputs.insert(outputs.end(), {"grid_summary.csv", "grid_density.csv"});
  if (all) outputs.push_back("comparison.csv");
  write_manifest(scenario, options, "filter " + method, outputs);
  write_file(options.out_dir / "events.csv", events_csv(events, model.n, 0));

  std::optional<FilterTrajectory> kf;
  std::optional<ParticleRun> ks, zk;
  std::optional<GridRun> gr;
  if (do_kalman) {
    kf = run_kalman(scenario, events);
    write_file(options.out_dir / "kalman_trajectory.csv", kalman_csv(*kf, model.m, model.n));
    write_file(options.out_dir / "kalman_no_jump_comparison.csv",
               jump_comparison_csv(*kf, no_jump_kalman(scenario, events), model.m));
  }
  for (auto [on, mode, stem, slot] : {std::tuple{do_ks, WeightMode::Normalized, "ks_particle", &ks},
                                      std::tuple{do_zakai, WeightMode::Unnormalized, "zakai_particle", &zk}}) {
    if (!on) continue;
    std::string snaps;
    *slot = particle_run(scenario, events, mode, options, options.snapshots ? &snaps : nullptr);
    write_file(options.out_dir / (std::string(stem) + "_summary.csv"), summary_csv(**slot));
    write_file(options.out_dir / (std::string(stem) + "_resampling.csv"), trace_csv(**slot));
    if (options.snapshots) write_file(options.out_dir / (std::string(stem) + "_snapshots.csv"), snaps);
  }
  if (do_grid) {
    gr = run_grid(scenario, events);
    write_file(options.out_dir / "grid_summary.csv", grid_summary_csv(*gr));
    write_file(options.out_dir / "grid_density.csv", grid_density_csv(*gr));
  }
  if (!all) return;

  const auto schedule = report_schedule(scenario.config().horizon, scenario.config().filter.report_every, events);
  auto identity_of = [](const ParticleRun& run) {
    Vec v;
    for (const auto& r : run.rows)
      if (r.phi == "identity") v.push_back(r.estimate);
    return v;
  };
  const Vec ks_m = ks ? identity_of(*ks) : Vec{}, zk_m = zk ? identity_of(*zk) : Vec{};
  std::ostringstream os;
  os << "t,side,event_index,kalman_m,ks_m,zakai_m,grid_m\n";
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    os << csv_number(schedule[k].t) << ',' << side_name(schedule[k].side) << ',' << event_label(schedule[k].event_index)
       << ',' << (kf ? csv_number(kf->rows[k].m(0)) : "") << ',' << (ks ? csv_number(ks_m[k]) : "") << ','
       << (zk ? csv_number(zk_m[k]) : "") << ',' << (gr ? csv_number(gr->rows[k].mean) : "") << '\n';
  }
  write_file(options.out_dir / "comparison.csv", os.str());
}

std::vector<CheckReport> run_diagnose(const ValidatedScenario& scenario, const RunOptions& options) {
  const auto& model = scenario.model();
  const bool linear = try_linear_params(scenario).has_value();
  const bool scalar_linear = linear && is_one_dimensional(model);
  std::vector<std::string> checks = options.checks;
  if (checks.empty()) {
    if (linear) checks.push_back("compensator");
    checks.push_back("martingale");
    if (is_one_dimensional(model)) checks.push_back("ks-residual");
    if (scalar_linear && scenario.schedule().kind == Schedule::Kind::Deterministic) checks.push_back("zakai");
  }
  for (const auto& c : checks) {
    if (c == "compensator" && !linear)
      fail(ErrorCode::UnsupportedScenario, "the compensator check needs a linear-Gaussian scenario");
    if (c == "ks-residual" && !is_one_dimensional(model))
      fail(ErrorCode::UnsupportedScenario, "the filter-equation residual check needs a scalar scenario");
    if (c == "zakai" && !scalar_linear)
      fail(ErrorCode::UnsupportedScenario, "the unnormalized-filter check needs a scalar linear-Gaussian scenario");
    if (c != "compensator" && c != "martingale" && c != "ks-residual" && c != "zakai")
      fail(ErrorCode::InvalidConfig, "unknown check '" + c + "'");
  }
  write_manifest(scenario, options, "diagnose", {"diagnostics.json"});

  const std::uint64_t seed = seed_of(scenario, options);
  const bool nc = options.negative_control;
  std::vector<CheckReport> reports;
  auto append = [&](std::vector<CheckReport> more) { reports.insert(reports.end(), more.begin(), more.end()); };
  for (const auto& c : checks) {
    if (c == "compensator") {
      CompensatorOptions o;
      o.n_paths = options.paths ? options.paths : o.n_paths;
      o.seed = seed;
      o.threads = options.threads;
      o.variance_scale = nc ? 2.0 : 1.0;
      append(check_compensator(scenario, o));
    } else if (c == "martingale") {
      for (const char* name : {"tanh", "bump"}) {
        MartingaleOptions o;
        o.n_paths = options.paths ? options.paths : o.n_paths;
        o.seed = seed;
        o.threads = options.threads;
        o.drop_jump_term = nc;
        Vec cps;
        for (double t : o.checkpoints)
          if (t <= scenario.config().horizon + 1e-12) cps.push_back(t);
        if (cps.empty()) cps.push_back(scenario.config().horizon);
        o.checkpoints = cps;
        append(check_martingale(scenario, *battery_function(name, model.m), o));
      }
    } else if (c == "ks-residual") {
      KsResidualOptions o;
      o.n_runs = options.runs ? options.runs : o.n_runs;
      o.seed = seed;
      o.drop_jump_term = nc;
      append(check_ks_residual(scenario, *battery_function("tanh", 1), o));
    } else if (c == "zakai") {
      ZakaiOptions o;
      o.ratio_runs = options.runs ? options.runs : o.ratio_runs;
      o.particles = options.particles ? options.particles : o.particles;
      o.reference_paths = options.paths ? options.paths : o.reference_paths;
      o.seed = seed;
      o.threads = options.threads;
      o.variance_scale = nc ? 2.0 : 1.0;
      append(check_zakai(scenario, *battery_function("tanh", 1), o));
    }
  }
  write_file(options.out_dir / "diagnostics.json", reports_to_json(reports));
  return reports;
}

std::vector<ObservationEvent> read_events_csv(const fs::path& path, std::size_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open events file " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::InvalidConfig, "events file " + path.string() + " is empty");
  std::vector<ObservationEvent> events;
  std::optional<long long> first_id;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 3 + n)
      fail(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                         std::to_string(3 + n) + " columns");
    try {
      const long long id = std::stoll(cells[0]);
      if (!first_id) first_id = id;
      if (id != *first_id) continue;
      ObservationEvent e;
      e.index = events.size();
      e.time = std::stod(cells[2]);
      for (std::size_t k = 0; k < n; ++k) e.dy.push_back(std::stod(cells[3 + k]));
      events.push_back(std::move(e));
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  for (std::size_t i = 1; i < events.size(); ++i)
    if (!(events[i].time > events[i - 1].time))
      fail(ErrorCode::NonIncreasingTimes, "event times in " + path.string() + " must increase");
  fill_pre_event_values(events, n);
  return events;
}

}  // namespace pjf
