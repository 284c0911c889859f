#include "pjf/pjf.h"

#include "pjf/kalman_jump.hpp"
#include "pjf/oracle_grid.hpp"
#include "pjf/particle.hpp"
#include "pjf/presets.hpp"
#include "pjf/runner.hpp"
#include "pjf/scenario_io.hpp"
#include "pjf/version.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

struct pjf_scenario {
  pjf::ValidatedScenario scenario;
};

struct pjf_events {
  std::vector<pjf::ObservationEvent> events;
};

struct pjf_table {
  std::vector<std::string> columns;
  std::vector<double> values;  // row-major
};

namespace {

thread_local std::string last_error;

pjf_status status_of(pjf::ErrorCode code) { return static_cast<pjf_status>(static_cast<int>(code) + 1); }

template <class Fn>
pjf_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    return fn();
  } catch (const pjf::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return PJF_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

pjf::Preset preset_or_throw(const char* name) {
  const auto p = pjf::preset_from_name(name ? name : "");
  if (!p || *p == pjf::Preset::Custom) pjf::fail(pjf::ErrorCode::InvalidConfig, std::string("unknown preset '") + (name ? name : "") + "'");
  return *p;
}

pjf::RunOptions to_run_options(const pjf_run_options* o, const char* command) {
  pjf::RunOptions r;
  r.out_dir = o->out_dir ? std::filesystem::path(o->out_dir) : pjf::default_out_dir(command);
  r.command_line = o->command_line ? o->command_line : "";
  r.scenario_path = o->scenario_path ? o->scenario_path : "";
  if (o->has_seed) r.seed = o->seed;
  r.paths = o->paths;
  r.particles = o->particles;
  r.runs = o->runs;
  r.threads = o->threads < 1 ? 1 : o->threads;
  if (o->events_path) r.events_path = o->events_path;
  if (o->checks) {
    std::stringstream ss(o->checks);
    for (std::string c; std::getline(ss, c, ',');)
      if (!c.empty()) r.checks.push_back(c);
  }
  r.negative_control = o->negative_control != 0;
  r.snapshots = o->snapshots != 0;
  return r;
}

double side_code(pjf::Side s) { return static_cast<double>(static_cast<int>(s)); }

}  // namespace

extern "C" {

const char* pjf_version(void) { return pjf::kVersion; }

const char* pjf_status_name(pjf_status status) {
  switch (status) {
    case PJF_OK: return "Ok";
    case PJF_CHECK_FAILED: return "CheckFailed";
    case PJF_INTERNAL: return "Internal";
    default: break;
  }
  if (status > PJF_OK && status <= PJF_IO)
    return pjf::to_string(static_cast<pjf::ErrorCode>(static_cast<int>(status) - 1)).data();
  return "Unknown";
}

const char* pjf_last_error(void) { return last_error.c_str(); }

int pjf_exit_code(pjf_status status) {
  switch (status) {
    case PJF_OK: return 0;
    case PJF_INVALID_CONFIG:
    case PJF_NON_PSD_COVARIANCE:
    case PJF_NON_INCREASING_TIMES:
    case PJF_INVALID_SCHEDULE:
    case PJF_HORIZON_TOO_SHORT:
    case PJF_UNKNOWN_FUNCTION_DESCRIPTOR:
    case PJF_NON_FINITE_FUNCTION:
    case PJF_NONPOSITIVE_R:
    case PJF_IO: return 2;
    case PJF_UNSUPPORTED_SCENARIO:
    case PJF_INCOMPATIBLE_METHOD: return 3;
    default: return 1;
  }
}

void pjf_string_free(char* s) { std::free(s); }

pjf_status pjf_scenario_load(const char* path, pjf_scenario** out) {
  return guarded([&] {
    if (!path || !out) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    *out = new pjf_scenario{pjf::validate_or_throw(pjf::load_scenario(path))};
    return PJF_OK;
  });
}

pjf_status pjf_scenario_parse(const char* json, pjf_scenario** out) {
  return guarded([&] {
    if (!json || !out) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    *out = new pjf_scenario{pjf::validate_or_throw(pjf::scenario_from_json(json))};
    return PJF_OK;
  });
}

pjf_status pjf_scenario_preset(const char* name, pjf_scenario** out) {
  return guarded([&] {
    if (!out) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    *out = new pjf_scenario{pjf::validate_or_throw(pjf::make_preset(preset_or_throw(name)))};
    return PJF_OK;
  });
}

void pjf_scenario_free(pjf_scenario* scenario) { delete scenario; }

pjf_status pjf_scenario_to_json(const pjf_scenario* scenario, char** out) {
  return guarded([&] {
    if (!scenario || !out) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    *out = dup(pjf::scenario_to_json(scenario->scenario.config()));
    return PJF_OK;
  });
}

pjf_status pjf_validate_json(const char* json, char** report) {
  return guarded([&] {
    if (!json) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    const auto outcome = pjf::validate(pjf::scenario_from_json(json));
    std::string text;
    for (const auto& v : outcome.violations) text += std::string(pjf::to_string(v.code)) + ": " + v.message + "\n";
    if (report) *report = dup(text);
    if (!outcome.ok()) {
      last_error = text;
      return status_of(outcome.violations.front().code);
    }
    return PJF_OK;
  });
}

pjf_status pjf_preset_json(const char* name, char** out) {
  return guarded([&] {
    if (!out) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    *out = dup(pjf::scenario_to_json(pjf::make_preset(preset_or_throw(name))));
    return PJF_OK;
  });
}

pjf_status pjf_simulate(const pjf_scenario* scenario, uint64_t seed, uint64_t path_index, pjf_events** out) {
  return guarded([&] {
    if (!scenario || !out) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    pjf::SimulationOptions so;
    so.record_path = false;
    *out = new pjf_events{pjf::simulate_path(scenario->scenario, seed, path_index, so).events};
    return PJF_OK;
  });
}

pjf_status pjf_events_load(const pjf_scenario* scenario, const char* csv_path, pjf_events** out) {
  return guarded([&] {
    if (!scenario || !csv_path || !out) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    *out = new pjf_events{pjf::read_events_csv(csv_path, scenario->scenario.model().n)};
    return PJF_OK;
  });
}

size_t pjf_events_count(const pjf_events* events) { return events ? events->events.size() : 0; }

double pjf_events_time(const pjf_events* events, size_t i) {
  if (!events || i >= events->events.size()) return std::numeric_limits<double>::quiet_NaN();
  return events->events[i].time;
}

double pjf_events_dy(const pjf_events* events, size_t i, size_t component) {
  if (!events || i >= events->events.size() || component >= events->events[i].dy.size())
    return std::numeric_limits<double>::quiet_NaN();
  return events->events[i].dy[component];
}

void pjf_events_free(pjf_events* events) { delete events; }

void pjf_filter_options_init(pjf_filter_options* options) {
  if (!options) return;
  options->particles = 0;
  options->seed = 0;
  options->threads = 1;
}

pjf_status pjf_filter(const pjf_scenario* scenario, const pjf_events* events, pjf_method method,
                      const pjf_filter_options* options, pjf_table** out) {
  return guarded([&] {
    if (!scenario || !events || !out) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    pjf_filter_options defaults;
    pjf_filter_options_init(&defaults);
    const pjf_filter_options& o = options ? *options : defaults;
    const auto& sc = scenario->scenario;
    const std::size_t m = sc.model().m;
    auto table = std::make_unique<pjf_table>();
    table->columns = {"t", "side", "event_index"};
    auto head = [&](const pjf::ReportPoint& at) {
      table->values.insert(table->values.end(),
                           {at.t, side_code(at.side), static_cast<double>(at.event_index < 0 ? -1 : at.event_index + 1)});
    };
    switch (method) {
      case PJF_METHOD_KALMAN: {
        const auto traj = pjf::run_kalman(sc, events->events);
        for (std::size_t i = 1; i <= m; ++i) table->columns.push_back("m_" + std::to_string(i));
        for (std::size_t i = 1; i <= m; ++i)
          for (std::size_t j = 1; j <= m; ++j) table->columns.push_back("P_" + std::to_string(i) + std::to_string(j));
        for (const auto& r : traj.rows) {
          head(r.at);
          for (Eigen::Index i = 0; i < r.m.size(); ++i) table->values.push_back(r.m(i));
          for (Eigen::Index i = 0; i < r.p.rows(); ++i)
            for (Eigen::Index j = 0; j < r.p.cols(); ++j) table->values.push_back(r.p(i, j));
        }
        break;
      }
      case PJF_METHOD_KS_PARTICLE:
      case PJF_METHOD_ZAKAI_PARTICLE: {
        pjf::ParticleRunOptions po;
        po.particles = o.particles ? o.particles : sc.config().filter.particles;
        po.threshold = sc.config().filter.resample_threshold;
        po.seed = o.seed;
        po.threads = o.threads < 1 ? 1 : o.threads;
        const auto battery = pjf::default_battery(m);
        const auto run = pjf::run_particle_filter(
            sc, events->events,
            method == PJF_METHOD_KS_PARTICLE ? pjf::WeightMode::Normalized : pjf::WeightMode::Unnormalized, battery, po);
        for (const auto& f : battery) table->columns.push_back(f->name());
        for (std::size_t k = 0; k < run.rows.size(); k += battery.size()) {
          head(run.rows[k].at);
          for (std::size_t b = 0; b < battery.size(); ++b) table->values.push_back(run.rows[k + b].estimate);
        }
        break;
      }
      case PJF_METHOD_GRID: {
        if (!pjf::is_one_dimensional(sc.model()))
          pjf::fail(pjf::ErrorCode::IncompatibleMethod, "the grid filter needs a scalar signal and observation");
        const auto run = pjf::run_grid(sc, events->events, std::nullopt, false);
        table->columns.insert(table->columns.end(), {"mean", "var"});
        for (const auto& r : run.rows) {
          head(r.at);
          table->values.insert(table->values.end(), {r.mean, r.var});
        }
        break;
      }
      default: pjf::fail(pjf::ErrorCode::InvalidConfig, "unknown method");
    }
    *out = table.release();
    return PJF_OK;
  });
}

size_t pjf_table_rows(const pjf_table* table) {
  return table && !table->columns.empty() ? table->values.size() / table->columns.size() : 0;
}

size_t pjf_table_cols(const pjf_table* table) { return table ? table->columns.size() : 0; }

const char* pjf_table_column(const pjf_table* table, size_t col) {
  return table && col < table->columns.size() ? table->columns[col].c_str() : nullptr;
}

double pjf_table_value(const pjf_table* table, size_t row, size_t col) {
  if (!table || col >= table->columns.size() || row >= pjf_table_rows(table))
    return std::numeric_limits<double>::quiet_NaN();
  return table->values[row * table->columns.size() + col];
}

void pjf_table_free(pjf_table* table) { delete table; }

void pjf_run_options_init(pjf_run_options* options) {
  if (!options) return;
  *options = pjf_run_options{};
  options->threads = 1;
}

pjf_status pjf_run_simulate(const pjf_scenario* scenario, const pjf_run_options* options) {
  return guarded([&] {
    if (!scenario || !options) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    pjf::run_simulate(scenario->scenario, to_run_options(options, "simulate"));
    return PJF_OK;
  });
}

pjf_status pjf_run_filter(const pjf_scenario* scenario, const char* method, const pjf_run_options* options) {
  return guarded([&] {
    if (!scenario || !method || !options) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    pjf::run_filter(scenario->scenario, method, to_run_options(options, "filter"));
    return PJF_OK;
  });
}

pjf_status pjf_run_diagnose(const pjf_scenario* scenario, const pjf_run_options* options, char** table) {
  return guarded([&] {
    if (!scenario || !options) pjf::fail(pjf::ErrorCode::InvalidConfig, "null argument");
    const auto reports = pjf::run_diagnose(scenario->scenario, to_run_options(options, "diagnose"));
    if (table) *table = dup(pjf::reports_to_table(reports));
    for (const auto& r : reports)
      if (!r.pass) {
        last_error = "check failed: " + r.name;
        return PJF_CHECK_FAILED;
      }
    return PJF_OK;
  });
}

}  // extern "C"
