#include "pjf/diagnostics.hpp"

#include "pjf/kalman_jump.hpp"
#include "pjf/oracle_grid.hpp"
#include "pjf/parallel.hpp"
#include "pjf/particle.hpp"
#include "pjf/quadrature.hpp"
#include "pjf/simulate.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace pjf {

namespace {

constexpr double kChi2Dof3At999 = 16.266236196238129;

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments sample_moments(const Vec& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// E[phi(x after `jumps` jumps)] - phi(x), xi from `law` each time.
double jump_average(const TestFunction& phi, const ModelSpec& model, const JumpDistribution& law, const double* x,
                    const double* y_pre, std::size_t jumps) {
  if (jumps == 0 || model.jump.kind == JumpMap::Kind::None) return 0.0;
  if (jumps == 1) return generator_jump(phi, model, law, x, y_pre);
  const std::size_t m = model.m;
  Vec moved(m);
  return law.expect(
             [&](const double* xi) {
               std::copy(x, x + m, moved.begin());
               model.jump.apply(moved.data(), y_pre, xi, m);
               Vec keep = moved;
               return jump_average(phi, model, law, keep.data(), y_pre, jumps - 1) + phi.value(keep.data());
             },
             12) -
         phi.value(x);
}

// Scalar Gaussian linear-model pieces used by the unnormalized checks.
struct ScalarLinear {
  LinearModelParams p;
  double r = 0.0;
};

ScalarLinear scalar_linear(const ValidatedScenario& scenario) {
  const auto lp = try_linear_params(scenario);
  if (!lp || lp->m != 1 || lp->n != 1)
    fail(ErrorCode::UnsupportedScenario, "this check needs a scalar linear-Gaussian scenario");
  return {*lp, lp->r(0, 0)};
}

// Wald statistic for beta = 0 in dm ~ features, heteroskedasticity-robust.
double wald_zero(const EMat& features, const EVec& dm) {
  const EMat xtx = features.transpose() * features;
  const Eigen::LDLT<EMat> solver(xtx);
  const EVec beta = solver.solve(features.transpose() * dm);
  const EVec resid = dm - features * beta;
  EMat meat = EMat::Zero(features.cols(), features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    meat += resid(i) * resid(i) * features.row(i).transpose() * features.row(i);
  const EMat inv = solver.solve(EMat::Identity(features.cols(), features.cols()));
  const EMat cov = inv * meat * inv;
  return beta.dot(cov.ldlt().solve(beta));
}

}  // namespace

std::string_view rule_name(CheckRule r) {
  switch (r) {
    case CheckRule::WithinSE: return "abs_le_k_se";
    case CheckRule::AbsTolerance: return "abs_le_tol";
    case CheckRule::Range: return "in_range";
  }
  return "abs_le_tol";
}

bool evaluate(const CheckReport& r) {
  if (!std::isfinite(r.statistic)) return false;
  switch (r.rule) {
    case CheckRule::WithinSE: return std::isfinite(r.se) && std::abs(r.statistic) <= r.bound * r.se;
    case CheckRule::AbsTolerance: return std::abs(r.statistic) <= r.bound;
    case CheckRule::Range: return r.statistic >= r.lower && r.statistic <= r.upper;
  }
  return false;
}

CheckReport finalize(CheckReport r) {
  r.pass = evaluate(r);
  return r;
}

std::vector<CheckReport> check_martingale(const ValidatedScenario& scenario, const TestFunction& phi,
                                          const MartingaleOptions& options) {
  const auto& model = scenario.model();
  const std::size_t m = model.m;
  const std::size_t nc = options.checkpoints.size();
  const JumpDistribution law = xi_marginal(model.jump_law, m, model.n);
  // Per path: M at each checkpoint and the first signal component there.
  std::vector<Vec> mvals(options.n_paths, Vec(nc, 0.0)), xvals(options.n_paths, Vec(nc, 0.0)),
      fvals(options.n_paths, Vec(nc, 0.0));
  parallel_for(options.n_paths, options.threads, [&](std::size_t p) {
    const SimulatedRun run = simulate_path(scenario, options.seed, p);
    const SignalPath& path = run.path;
    const std::size_t rows = path.rows();
    std::vector<std::size_t> jumps_at(run.events.size(), 0);
    for (std::size_t k = 0; k < path.xi_event.size(); ++k) ++jumps_at[path.xi_event[k]];
    const double phi0 = phi.value(path.x_at(0));
    double integral = 0.0, jump_sum = 0.0;
    double prev_l = generator_continuous(phi, model, path.x_at(0));
    std::size_t c = 0;
    auto record = [&](std::size_t row) {
      while (c < nc && (row + 1 == rows || path.t[row + 1] > options.checkpoints[c] + 1e-12) &&
             path.t[row] >= options.checkpoints[c] - 1e-12) {
        const double* x = path.x_at(row);
        mvals[p][c] = phi.value(x) - phi0 - integral - (options.drop_jump_term ? 0.0 : jump_sum);
        xvals[p][c] = x[0];
        fvals[p][c] = phi.value(x);
        ++c;
      }
    };
    record(0);
    for (std::size_t r = 1; r < rows; ++r) {
      const double h = path.t[r] - path.t[r - 1];
      if (path.is_jump_time[r]) {
        const auto ev = static_cast<std::size_t>(path.event_index[r]);
        jump_sum += jump_average(phi, model, law, path.x_at(r - 1), path.y_at(r - 1), jumps_at[ev]);
        prev_l = generator_continuous(phi, model, path.x_at(r));
      } else if (h > 0.0) {
        const double l = generator_continuous(phi, model, path.x_at(r));
        integral += 0.5 * h * (prev_l + l);
        prev_l = l;
      }
      record(r);
    }
  });

  std::vector<CheckReport> out;
  const std::string tag = options.drop_jump_term ? "martingale_no_jump_term" : "martingale";
  for (std::size_t c = 0; c < nc; ++c) {
    Vec v(options.n_paths);
    for (std::size_t p = 0; p < options.n_paths; ++p) v[p] = mvals[p][c];
    const Moments mo = sample_moments(v);
    CheckReport r;
    r.name = tag + "[" + phi.name() + "] mean M at t=" + fmt(options.checkpoints[c]);
    r.statistic = mo.mean;
    r.se = mo.se;
    r.rule = CheckRule::WithinSE;
    r.bound = 3.0;
    r.n_paths = options.n_paths;
    r.seed = options.seed;
    r.negative_control = options.drop_jump_term;
    out.push_back(finalize(r));
  }
  for (std::size_t c = 1; c < nc; ++c) {
    EMat feats(options.n_paths, 3);
    EVec dm(options.n_paths);
    for (std::size_t p = 0; p < options.n_paths; ++p) {
      const auto i = static_cast<Eigen::Index>(p);
      feats(i, 0) = 1.0;
      feats(i, 1) = xvals[p][c - 1];
      feats(i, 2) = fvals[p][c - 1];
      dm(i) = mvals[p][c] - mvals[p][c - 1];
    }
    CheckReport r;
    r.name = tag + "[" + phi.name() + "] increment regression " + fmt(options.checkpoints[c - 1]) + "->" +
             fmt(options.checkpoints[c]);
    r.statistic = wald_zero(feats, dm);
    r.se = 0.0;
    r.rule = CheckRule::Range;
    r.lower = 0.0;
    r.upper = kChi2Dof3At999;
    r.n_paths = options.n_paths;
    r.seed = options.seed;
    r.negative_control = options.drop_jump_term;
    out.push_back(finalize(r));
  }
  return out;
}

std::vector<CheckReport> check_ks_residual(const ValidatedScenario& scenario, const TestFunction& phi,
                                           const KsResidualOptions& options) {
  const auto& cfg = scenario.config();
  const auto& model = cfg.model;
  if (!is_one_dimensional(model))
    fail(ErrorCode::UnsupportedScenario, "the filter-equation residual needs a scalar scenario");
  const auto domain = choose_domain(scenario);
  const std::size_t g = cfg.filter.grid.nodes;
  const double dx = (domain.second - domain.first) / static_cast<double>(g - 1);
  std::vector<CheckReport> out;

  // Interior: residual of the first-order expansion on a jump-free stretch.
  const double first = cfg.schedule.kind == Schedule::Kind::Deterministic ? cfg.schedule.times.front()
                                                                          : cfg.schedule.grid.front();
  const double t0 = 0.4 * first, h = first / 20.0;
  const double fine = cfg.dt / 10.0;
  GridDensity start = gaussian_density(domain.first, domain.second, g, model.x0[0], 2.0 * dx);
  start = grid_propagate(start, model, t0, fine);
  const double base = grid_expectation(start, phi);
  const double drift = grid_integral(start, [&](double x) { return generator_continuous(phi, model, &x); }) /
                       grid_mass(start);
  auto residual = [&](double step) {
    const GridDensity later = grid_propagate(start, model, step, fine);
    return std::abs(grid_expectation(later, phi) - base - step * drift);
  };
  const double r1 = residual(h), r2 = residual(h / 2.0);
  CheckReport ir;
  ir.name = "ks_residual[" + phi.name() + "] interior h^2 ratio";
  ir.statistic = r1 / r2;
  ir.rule = CheckRule::Range;
  ir.lower = 3.2;
  ir.upper = 4.8;
  ir.n_paths = 1;
  ir.seed = options.seed;
  ir.negative_control = options.drop_jump_term;
  out.push_back(finalize(ir));

  // Jumps: every event of every run, all terms from the grid.
  double worst = 0.0;
  std::size_t count = 0;
  for (std::size_t run = 0; run < options.n_runs; ++run) {
    SimulationOptions so;
    so.record_path = false;
    const SimulatedRun sim = simulate_path(scenario, options.seed, run, so);
    const GridRun gr = run_grid(scenario, sim.events, domain, true);
    for (std::size_t i = 0; i < sim.events.size(); ++i) {
      const auto& ev = sim.events[i];
      const std::size_t jumps = gr.jumps[i];
      const GridDensity& pre = gr.pre[i];
      const double delta = grid_expectation(gr.post[i], phi) - grid_expectation(pre, phi);
      double jump_term = 0.0;
      if (jumps > 0 && model.jump.kind != JumpMap::Kind::None && !options.drop_jump_term) {
        const JumpDistribution law = xi_marginal(model.jump_law, 1, 1);
        jump_term = grid_integral(pre, [&](double x) {
                      return jump_average(phi, model, law, &x, ev.y_pre.data(), jumps);
                    }) /
                    grid_mass(pre);
      }
      const double s = grid_S_phi(pre, ev.y_pre, jumps, model, phi, ev.dy[0]);
      const double s_nu = grid_S_nu_integral(pre, ev.y_pre, jumps, model, phi, options.order);
      worst = std::max(worst, std::abs(delta - jump_term - s + s_nu));
      ++count;
    }
  }
  CheckReport jr;
  jr.name = std::string(options.drop_jump_term ? "ks_residual_no_jump_term[" : "ks_residual[") + phi.name() +
            "] max jump residual over " + std::to_string(count) + " events";
  jr.statistic = worst;
  jr.rule = CheckRule::AbsTolerance;
  jr.bound = options.tolerance;
  jr.n_paths = options.n_runs;
  jr.order = options.order;
  jr.seed = options.seed;
  jr.negative_control = options.drop_jump_term;
  out.push_back(finalize(jr));
  return out;
}

std::vector<CheckReport> check_zakai(const ValidatedScenario& scenario, const TestFunction& phi,
                                     const ZakaiOptions& options) {
  const auto& cfg = scenario.config();
  const auto& model = cfg.model;
  const ScalarLinear lin = scalar_linear(scenario);
  const double r = lin.r;
  const double vs = options.variance_scale;
  const bool nc = vs != 1.0;
  const std::string tag = nc ? "zakai_corrupted" : "zakai";
  // Gamma from the (possibly corrupted) predictive law of dY.
  auto gamma = [&](const PredictiveLaw& pl, double y) {
    return gamma_gaussian(pl.mean(0), vs * pl.cov(0, 0) - r, r, y);
  };
  std::vector<CheckReport> out;
  SimulationOptions so;
  so.record_path = false;

  // (a) quadrature of (e^Gamma - 1) against the predictive law.
  double worst = 0.0;
  std::vector<SimulatedRun> runs(std::max(options.n_runs, options.ratio_runs));
  parallel_for(runs.size(), options.threads, [&](std::size_t k) { runs[k] = simulate_path(scenario, options.seed, k, so); });
  for (std::size_t k = 0; k < options.n_runs; ++k) {
    const auto traj = run_kalman(scenario, runs[k].events);
    for (const auto& pl : traj.predictive) {
      const double mean = pl.mean(0), var = pl.cov(0, 0);
      const double total = laplace_gauss_hermite(
          [&](double y) { return gamma(pl, y) + normal_log_pdf(y, mean, var); }, mean, std::sqrt(var), 40);
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  CheckReport qa;
  qa.name = tag + " (a) max |int (e^Gamma - 1) dF^i|";
  qa.statistic = worst;
  qa.rule = CheckRule::AbsTolerance;
  qa.bound = 1e-10;
  qa.n_paths = options.n_runs;
  qa.order = 40;
  qa.seed = options.seed;
  qa.negative_control = nc;
  out.push_back(finalize(qa));

  // (b) rho(1) jump ratio against e^-Gamma, pooled per event index.
  const std::size_t events = cfg.schedule.kind == Schedule::Kind::Deterministic ? cfg.schedule.times.size() : 0;
  if (events == 0) fail(ErrorCode::UnsupportedScenario, "the mass-ratio check needs a deterministic schedule");
  std::vector<Vec> dev(events, Vec(options.ratio_runs, 0.0)), dev_se(events, Vec(options.ratio_runs, 0.0));
  for (std::size_t k = 0; k < options.ratio_runs; ++k) {
    const auto traj = run_kalman(scenario, runs[k].events);
    ParticleRunOptions po;
    po.particles = options.particles;
    po.threshold = cfg.filter.resample_threshold;
    po.seed = options.seed;
    po.run = k;
    po.threads = options.threads;
    const ParticleRun pr = run_particle_filter(scenario, runs[k].events, WeightMode::Unnormalized, {}, po);
    for (std::size_t i = 0; i < events; ++i) {
      const double ratio = std::exp(pr.masses[i].log_rho_post - pr.masses[i].log_rho_pre);
      const double expected = std::exp(-gamma(traj.predictive[i], runs[k].events[i].dy[0]));
      dev[i][k] = ratio / expected - 1.0;
      dev_se[i][k] = pr.masses[i].ratio_se / expected;
    }
  }
  for (std::size_t i = 0; i < events; ++i) {
    // Runs are independent, so the particle standard errors pool in quadrature.
    double mean = 0.0, var = 0.0;
    for (std::size_t k = 0; k < options.ratio_runs; ++k) {
      mean += dev[i][k];
      var += dev_se[i][k] * dev_se[i][k];
    }
    const double runs_d = static_cast<double>(options.ratio_runs);
    const Moments mo{mean / runs_d, std::sqrt(var) / runs_d};
    CheckReport rb;
    rb.name = tag + " (b) rho(1) ratio / e^-Gamma - 1 at event " + std::to_string(i + 1);
    rb.statistic = mo.mean;
    rb.se = mo.se;
    rb.rule = CheckRule::WithinSE;
    rb.bound = 3.0;
    rb.n_paths = options.ratio_runs;
    rb.particles = options.particles;
    rb.seed = options.seed;
    rb.negative_control = nc;
    out.push_back(finalize(rb));
  }

  // (c) E'[M_t(phi)] = 0. Observations are drawn under the signal measure and
  // reweighted by 1 / rho_t(1), which equals dP'/dP on the observations.
  const LinearModelParams& lp = lin.p;
  const JumpDistribution law = xi_marginal(model.jump_law, 1, 1);
  Vec checkpoints = cfg.schedule.times;
  checkpoints.push_back(cfg.horizon);
  const std::size_t nc_pts = checkpoints.size();
  std::vector<Vec> mvals(options.reference_paths, Vec(nc_pts, 0.0));
  const std::uint64_t ref_seed = derive_key(options.seed, StreamTag::Replicate, 1);
  parallel_for(options.reference_paths, options.threads, [&](std::size_t p) {
    const SimulatedRun sim = simulate_path(scenario, ref_seed, p, so);
    const auto traj = run_kalman(scenario, sim.events);
    const double y_dummy = 0.0;
    auto pi_of = [&](const GaussianBelief& b, const std::function<double(double)>& fn) {
      return gaussian_expectation(fn, b.m(0), std::max(b.p(0, 0), 0.0), 20);
    };
    auto l_phi = [&](double x) { return generator_continuous(phi, model, &x); };
    // Segment integrals of pi_s(L phi) between consecutive events (Simpson).
    GaussianBelief b{EVec::Constant(1, model.x0[0]), EMat::Zero(1, 1), 0.0};
    Vec seg_int, seg_jump, log_ratio;
    double t = 0.0;
    std::size_t ev = 0;
    auto integrate_to = [&](double until) {
      const double len = until - t;
      if (len <= 0.0) return 0.0;
      auto steps = static_cast<std::size_t>(std::ceil(len / 0.01));
      if (steps % 2) ++steps;
      const double hstep = len / static_cast<double>(steps);
      double acc = pi_of(b, l_phi);
      GaussianBelief cur = b;
      for (std::size_t s = 1; s <= steps; ++s) {
        cur = propagate(cur, lp, hstep);
        const double w = (s == steps) ? 1.0 : (s % 2 ? 4.0 : 2.0);
        acc += w * pi_of(cur, l_phi);
      }
      b = cur;
      t = until;
      return acc * hstep / 3.0;
    };
    // Accumulate in the scale of rho_t(1): terms weighted by rho_s(1) / rho_t(1).
    double total_int = 0.0;  // sum of rho_s(1)-weighted pieces, in units of rho at current time
    double log_rho = 0.0;
    std::size_t c = 0;
    const double phi0 = phi.value(model.x0.data());
    auto emit = [&]() {
      // M_t / rho_t(1) = pi_t(phi) - (phi0 + integrals) / rho_t(1)
      mvals[p][c] = pi_of(b, [&](double x) { return phi.value(&x); }) - std::exp(-log_rho) * (phi0 + total_int);
      ++c;
    };
    for (; ev < sim.events.size(); ++ev) {
      const auto& e = sim.events[ev];
      total_int += std::exp(log_rho) * integrate_to(e.time);
      total_int += std::exp(log_rho) *
                   pi_of(b, [&](double x) { return generator_jump(phi, model, law, &x, &y_dummy); });
      log_rho += -gamma(traj.predictive[ev], e.dy[0]);
      b = traj.post[ev];
      emit();
    }
    total_int += std::exp(log_rho) * integrate_to(cfg.horizon);
    emit();
  });
  for (std::size_t c = 0; c < nc_pts; ++c) {
    Vec v(options.reference_paths);
    for (std::size_t p = 0; p < options.reference_paths; ++p) v[p] = mvals[p][c];
    const Moments mo = sample_moments(v);
    CheckReport rc;
    rc.name = tag + " (c) reference-measure mean M at t=" + fmt(checkpoints[c]);
    rc.statistic = mo.mean;
    rc.se = mo.se;
    rc.rule = CheckRule::WithinSE;
    rc.bound = 3.0;
    rc.n_paths = options.reference_paths;
    rc.order = 20;
    rc.seed = options.seed;
    rc.negative_control = nc;
    out.push_back(finalize(rc));
  }
  return out;
}

std::vector<CheckReport> check_compensator(const ValidatedScenario& scenario, const CompensatorOptions& options) {
  struct Item {
    const char* name;
    CompensatorIntegrand w;
  };
  const std::vector<Item> battery{
      {"1", [](std::size_t, double, const double*) { return 1.0; }},
      {"y", [](std::size_t, double, const double* y) { return y[0]; }},
      {"y^2", [](std::size_t, double, const double* y) { return y[0] * y[0]; }},
      {"1{t<=T1} y", [](std::size_t i, double, const double* y) { return i == 0 ? y[0] : 0.0; }},
  };
  const bool nc = options.variance_scale != 1.0;
  const std::string tag = nc ? "compensator_corrupted" : "compensator";
  const std::size_t k = scenario.schedule().kind == Schedule::Kind::Deterministic
                            ? scenario.schedule().times.size()
                            : scenario.schedule().grid.size();
  std::vector<CheckReport> out;
  for (const auto& item : battery) {
    const auto data = empirical_compensator_check_data(scenario, item.w, options.n_paths, options.seed,
                                                       options.threads, 40, options.variance_scale);
    CheckReport r;
    r.name = tag + "[W=" + item.name + "] mean (W*mu) - (W*nu)";
    r.n_paths = options.n_paths;
    r.order = 40;
    r.seed = options.seed;
    r.negative_control = nc;
    if (std::string(item.name) == "1") {
      double worst = 0.0;
      for (const auto& s : data)
        worst = std::max({worst, std::abs(s.against_mu - static_cast<double>(k)),
                          std::abs(s.against_nu - static_cast<double>(k))});
      r.name = tag + "[W=1] max |side - K|";
      r.statistic = worst;
      r.rule = CheckRule::AbsTolerance;
      r.bound = 1e-9;
    } else {
      Vec diff(data.size());
      for (std::size_t p = 0; p < data.size(); ++p) diff[p] = data[p].against_mu - data[p].against_nu;
      const Moments mo = sample_moments(diff);
      r.statistic = mo.mean;
      r.se = mo.se;
      r.rule = CheckRule::WithinSE;
      r.bound = 3.0;
    }
    out.push_back(finalize(r));
  }
  return out;
}

std::string reports_to_json(const std::vector<CheckReport>& reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["statistic"] = r.statistic;
    j["se"] = r.se;
    j["rule"] = rule_name(r.rule);
    if (r.rule == CheckRule::Range) {
      j["lower"] = r.lower;
      j["upper"] = r.upper;
    } else {
      j["bound"] = r.bound;
    }
    j["pass"] = r.pass;
    j["n_paths"] = r.n_paths;
    j["particles"] = r.particles;
    j["order"] = r.order;
    j["seed"] = r.seed;
    j["negative_control"] = r.negative_control;
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

std::string reports_to_table(const std::vector<CheckReport>& reports) {
  std::ostringstream os;
  char line[512];
  for (const auto& r : reports) {
    std::string rule;
    switch (r.rule) {
      case CheckRule::WithinSE: rule = "<= " + fmt(r.bound) + " SE (" + fmt(r.se) + ")"; break;
      case CheckRule::AbsTolerance: rule = "<= " + fmt(r.bound); break;
      case CheckRule::Range: rule = "in [" + fmt(r.lower) + ", " + fmt(r.upper) + "]"; break;
    }
    std::snprintf(line, sizeof line, "%-4s %-70s %14.6g  %s%s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.statistic,
                  rule.c_str(), r.negative_control ? "  [negative control]" : "");
    os << line;
  }
  return os.str();
}

}  // namespace pjf
