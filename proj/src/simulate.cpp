#include "pjf/simulate.hpp"

#include "pjf/kalman_jump.hpp"
#include "pjf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pjf {

namespace {

bool close_times(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

Vec event_times_of(const Schedule& s, double horizon, std::vector<std::string>* warnings) {
  Vec out;
  const Vec& src = s.kind == Schedule::Kind::Deterministic ? s.times : s.grid;
  for (double t : src) {
    if (t <= 0.0) continue;  // an observation at time zero has no pre-event value
    if (t > horizon) {
      if (warnings) warnings->push_back("event at t=" + std::to_string(t) + " lies beyond the horizon; dropped");
      continue;
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace

Vec time_grid(double horizon, double dt, const Vec& event_times) {
  const auto steps = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
  Vec grid;
  grid.reserve(steps + 2 + event_times.size());
  for (std::size_t k = 0; k <= steps; ++k) grid.push_back(std::min(horizon, static_cast<double>(k) * dt));
  if (!close_times(grid.back(), horizon)) grid.push_back(horizon);
  else grid.back() = horizon;
  for (double te : event_times) {
    auto it = std::lower_bound(grid.begin(), grid.end(), te);
    if (it != grid.end() && close_times(*it, te)) *it = te;
    else if (it != grid.begin() && close_times(*(it - 1), te)) *(it - 1) = te;
    else grid.insert(it, te);
  }
  return grid;
}

std::size_t newly_triggered(const Schedule& schedule, double y, std::size_t already) {
  std::size_t k = already;
  while (k < schedule.thresholds.size() && y <= schedule.thresholds[k]) ++k;
  return k - already;
}

Vec resolve_threshold_times(const Schedule& schedule, const Vec& y_at_grid) {
  const std::size_t big_k = schedule.thresholds.size();
  Vec times(big_k, std::numeric_limits<double>::infinity());
  std::size_t fired = 0;
  for (std::size_t j = 0; j < y_at_grid.size() && j < schedule.grid.size(); ++j) {
    const std::size_t fresh = newly_triggered(schedule, y_at_grid[j], fired);
    // thresholds[k] is theta_{K-k}
    for (std::size_t k = fired; k < fired + fresh; ++k) times[big_k - 1 - k] = schedule.grid[j];
    fired += fresh;
  }
  return times;
}

std::vector<std::size_t> jump_counts(const Schedule& schedule, const std::vector<ObservationEvent>& events) {
  std::vector<std::size_t> out(events.size(), 1);
  if (schedule.kind == Schedule::Kind::Deterministic) return out;
  std::size_t fired = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double y_post = events[i].y_pre[0] + events[i].dy[0];
    out[i] = newly_triggered(schedule, y_post, fired);
    fired += out[i];
  }
  return out;
}

void fill_pre_event_values(std::vector<ObservationEvent>& events, std::size_t n) {
  Vec y(n, 0.0);
  for (auto& e : events) {
    e.y_pre = y;
    for (std::size_t k = 0; k < n; ++k) y[k] += e.dy[k];
  }
}

SimulatedRun simulate_path(const ValidatedScenario& scenario, std::uint64_t seed, std::uint64_t path_index,
                           const SimulationOptions& options) {
  const auto& cfg = scenario.config();
  const auto& s = cfg.model;
  const std::size_t m = s.m, n = s.n;
  SimulatedRun run;
  const Vec events = event_times_of(cfg.schedule, cfg.horizon, &run.warnings);
  const Vec grid = time_grid(cfg.horizon, cfg.dt, events);

  Rng noise(seed, StreamTag::Diffusion, path_index);
  Rng marks(seed, StreamTag::Marks, path_index);
  const MarkSampler mark_sampler(s.jump_law, m, n);
  const ConditionalSampler cond_sampler(s.jump_law, m, n);

  Vec x = s.x0, y(n, 0.0), a(m), b(m * m), f(n), xi(m), eta(n), extra_xi(m), extra_eta(n);
  auto& path = run.path;
  path.m = m;
  path.n = n;
  auto record = [&](double t, int ev, bool jump_row) {
    if (!options.record_path) return;
    path.t.push_back(t);
    path.x.insert(path.x.end(), x.begin(), x.end());
    path.y.insert(path.y.end(), y.begin(), y.end());
    path.event_index.push_back(ev);
    path.is_jump_time.push_back(jump_row ? 1 : 0);
  };
  auto guard = [&](double t) {
    for (double v : x)
      if (!std::isfinite(v)) fail(ErrorCode::NumericalBlowup, "signal became non-finite at t=" + std::to_string(t));
  };

  std::size_t next_event = 0, fired = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k];
    if (k > 0) {
      const double h = t - grid[k - 1];
      const double sq = std::sqrt(h);
      if (m == 1) {
        const double drift = s.drift.eval1(x[0]);
        const double vol = s.diffusion.eval1(x[0]);
        x[0] += drift * h + vol * sq * noise.normal();
      } else {
        s.drift.eval(x.data(), a.data());
        s.diffusion.eval(x.data(), b.data());
        Vec z(m);
        for (auto& v : z) v = noise.normal();
        for (std::size_t i = 0; i < m; ++i) {
          double acc = a[i] * h;
          for (std::size_t j = 0; j < m; ++j) acc += b[i * m + j] * sq * z[j];
          x[i] += acc;
        }
      }
      guard(t);
    }
    if (next_event < events.size() && events[next_event] == t) {
      const int ev = static_cast<int>(next_event);
      record(t, ev, false);
      ObservationEvent e;
      e.index = next_event;
      e.time = t;
      e.y_pre = y;
      mark_sampler.sample(marks, xi.data(), eta.data());
      e.eta = eta;
      e.dy.resize(n);
      if (options.reference_measure) {
        e.dy = eta;
      } else {
        s.observation.eval(x.data(), y.data(), f.data());
        for (std::size_t i = 0; i < n; ++i) e.dy[i] = f[i] + eta[i];
      }
      const Vec y_pre = y;
      for (std::size_t i = 0; i < n; ++i) y[i] += e.dy[i];
      e.jumps = cfg.schedule.kind == Schedule::Kind::Deterministic ? 1 : newly_triggered(cfg.schedule, y[0], fired);
      fired += e.jumps;
      for (std::size_t j = 0; j < e.jumps; ++j) {
        const double* use = xi.data();
        if (j > 0) {
          if (options.reference_measure || !cond_sampler.depends_on_eta()) {
            mark_sampler.sample(marks, extra_xi.data(), extra_eta.data());
          } else if (!cond_sampler.sample(eta.data(), marks, extra_xi.data())) {
            fail(ErrorCode::ZeroConditionalMass, "no jump mark compatible with the realized noise");
          }
          use = extra_xi.data();
        }
        s.jump.apply(x.data(), y_pre.data(), use, m);
        if (options.record_path) {
          path.xi.emplace_back(use, use + m);
          path.xi_event.push_back(next_event);
        }
      }
      guard(t);
      record(t, ev, true);
      run.events.push_back(std::move(e));
      ++next_event;
    } else {
      record(t, -1, false);
    }
  }
  run.x_final = x;
  return run;
}

std::vector<CompensatorSample> empirical_compensator_check_data(const ValidatedScenario& scenario,
                                                                const CompensatorIntegrand& w, std::size_t n_paths,
                                                                std::uint64_t seed, int threads, std::size_t order,
                                                                double variance_scale) {
  if (!try_linear_params(scenario))
    fail(ErrorCode::UnsupportedScenario, "the predictive observation law has no closed form for this scenario");
  std::vector<CompensatorSample> out(n_paths);
  SimulationOptions opts;
  opts.record_path = false;
  parallel_for(n_paths, threads, [&](std::size_t p) {
    const auto run = simulate_path(scenario, seed, p, opts);
    const auto traj = run_kalman(scenario, run.events);
    CompensatorSample cs;
    for (std::size_t i = 0; i < run.events.size(); ++i) {
      const auto& e = run.events[i];
      cs.against_mu += w(i, e.time, e.dy.data());
      JumpDistribution law;
      law.kind = JumpDistribution::Kind::Gaussian;
      law.mean = from_eigen(traj.predictive[i].mean);
      law.cov = variance_scale * traj.predictive[i].cov;
      law.factor = psd_factor(law.cov);
      cs.against_nu += law.expect([&](const double* yv) { return w(i, e.time, yv); }, order);
    }
    out[p] = cs;
  });
  return out;
}

}  // namespace pjf
