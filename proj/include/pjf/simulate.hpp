#pragma once

#include "pjf/model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pjf {

/// One observation instant. For deterministic schedules every event carries
/// exactly one signal jump; for threshold schedules `jumps` counts the
/// thresholds first crossed by Y at this instant (possibly zero).
struct ObservationEvent {
  std::size_t index = 0;
  double time = 0.0;
  Vec dy;
  Vec y_pre;
  Vec eta;  // realized observation noise (simulation only)
  std::size_t jumps = 0;
};

/// Simulated path on the merged time grid. Each event time appears twice:
/// a pre-event row (state X_{T-}, Y_{T-}) followed by a post-event row.
struct SignalPath {
  std::size_t m = 1;
  std::size_t n = 1;
  Vec t;
  Vec x;  // rows * m
  Vec y;  // rows * n
  std::vector<int> event_index;  // -1 off events
  std::vector<char> is_jump_time;  // 1 on post-event rows
  std::vector<Vec> xi;             // realized jump marks, in order
  std::vector<std::size_t> xi_event;

  std::size_t rows() const { return t.size(); }
  const double* x_at(std::size_t row) const { return x.data() + row * m; }
  const double* y_at(std::size_t row) const { return y.data() + row * n; }
};

struct SimulationOptions {
  /// Draw every observation increment i.i.d. from the noise law, independent
  /// of the signal (the reference measure of the unnormalized filter).
  bool reference_measure = false;
  bool record_path = true;
};

struct SimulatedRun {
  SignalPath path;
  std::vector<ObservationEvent> events;
  Vec x_final;
  std::vector<std::string> warnings;
};

/// Uniform grid k*dt on [0, horizon] (horizon appended when off-grid) merged
/// with the given event times.
Vec time_grid(double horizon, double dt, const Vec& event_times);

/// Euler-Maruyama between events, exact observation-then-jump handling at
/// events. Streams are keyed by (seed, path_index) so runs are reproducible
/// and independent of how paths are distributed over workers.
SimulatedRun simulate_path(const ValidatedScenario& scenario, std::uint64_t seed, std::uint64_t path_index = 0,
                           const SimulationOptions& options = {});

/// Number of thresholds newly crossed by an observed value, given how many
/// have already fired. Thresholds are decreasing so fired ones form a prefix.
std::size_t newly_triggered(const Schedule& schedule, double y, std::size_t already);

/// Causal first-passage times for a threshold schedule from the observed
/// values of Y (first component) at the leading grid points. Entry i-1 holds
/// T_i for threshold theta_i (theta_K is listed first in the schedule);
/// untriggered thresholds give +infinity.
Vec resolve_threshold_times(const Schedule& schedule, const Vec& y_at_grid);

/// Signal jumps per event, recomputed from the observations alone.
std::vector<std::size_t> jump_counts(const Schedule& schedule, const std::vector<ObservationEvent>& events);

/// Rebuilds y_pre for events read back from an events file (Y starts at 0).
void fill_pre_event_values(std::vector<ObservationEvent>& events, std::size_t n);

/// Predictable test integrand W(event index, time, y).
using CompensatorIntegrand = std::function<double(std::size_t, double, const double*)>;

struct CompensatorSample {
  double against_mu = 0.0;  // (W * mu)_inf
  double against_nu = 0.0;  // (W * nu)_inf
};

/// Paired per-path samples of (W * mu) and (W * nu) on a linear-Gaussian
/// scenario, with the predictive observation law taken from the exact filter.
/// `variance_scale` != 1 corrupts that law (negative control).
std::vector<CompensatorSample> empirical_compensator_check_data(const ValidatedScenario& scenario,
                                                                const CompensatorIntegrand& w, std::size_t n_paths,
                                                                std::uint64_t seed, int threads = 1,
                                                                std::size_t order = 40, double variance_scale = 1.0);

}  // namespace pjf
