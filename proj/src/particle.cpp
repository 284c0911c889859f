#include "pjf/particle.hpp"

#include "pjf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pjf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Vec& v) {
  double mx = kNegInf;
  for (double a : v) mx = std::max(mx, a);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double a : v) s += std::exp(a - mx);
  return mx + std::log(s);
}

// Implied noise dY - f(x, Y-) for every particle, n values each.
Vec implied_noise(const ParticleEnsemble& e, const ObservationEvent& ev, const ModelSpec& model, int threads) {
  const std::size_t n = model.n;
  Vec eta(e.size * n);
  parallel_chunks(e.size, threads, [&](std::size_t b, std::size_t end) {
    Vec f(n);
    for (std::size_t j = b; j < end; ++j) {
      if (n == 1 && model.m == 1) {
        eta[j] = ev.dy[0] - model.observation.eval1(e.at(j)[0], ev.y_pre[0]);
        continue;
      }
      model.observation.eval(e.at(j), ev.y_pre.data(), f.data());
      for (std::size_t k = 0; k < n; ++k) eta[j * n + k] = ev.dy[k] - f[k];
    }
  });
  return eta;
}

void apply_jumps(ParticleEnsemble& e, const Vec& eta, const ObservationEvent& ev, std::size_t jumps,
                 const ModelSpec& model, int threads) {
  if (jumps == 0 || model.jump.kind == JumpMap::Kind::None) return;
  const std::size_t m = model.m, n = model.n;
  const ConditionalSampler cond(model.jump_law, m, n);
  parallel_chunks(e.size, threads, [&](std::size_t b, std::size_t end) {
    Vec xi(m);
    for (std::size_t j = b; j < end; ++j) {
      if (!std::isfinite(e.log_w[j])) continue;
      for (std::size_t k = 0; k < jumps; ++k) {
        if (!cond.sample(eta.data() + j * n, e.rngs[j], xi.data())) break;  // zero-weight particle
        model.jump.apply(e.at(j), ev.y_pre.data(), xi.data(), m);
      }
      for (std::size_t i = 0; i < m; ++i)
        if (!std::isfinite(e.at(j)[i])) fail(ErrorCode::NumericalBlowup, "particle became non-finite at a jump");
    }
  });
}

}  // namespace

ParticleEnsemble make_ensemble(const ModelSpec& model, std::size_t n, WeightMode mode, std::uint64_t seed,
                               std::uint64_t run) {
  if (n < 2) fail(ErrorCode::InvalidConfig, "an ensemble needs at least two particles");
  ParticleEnsemble e;
  e.size = n;
  e.m = model.m;
  e.mode = mode;
  e.x.resize(n * model.m);
  for (std::size_t j = 0; j < n; ++j) std::copy(model.x0.begin(), model.x0.end(), e.at(j));
  e.log_w.assign(n, -std::log(static_cast<double>(n)));
  e.log_mass = 0.0;
  const std::uint64_t run_key = derive_key(seed, StreamTag::Replicate, run);
  e.rngs.reserve(n);
  for (std::size_t j = 0; j < n; ++j) e.rngs.emplace_back(run_key, StreamTag::Particles, j);
  e.resample_rng = Rng(run_key, StreamTag::Resampling, 0);
  return e;
}

Vec normalized_weights(const ParticleEnsemble& e) {
  const double lse = log_sum_exp(e.log_w);
  if (!std::isfinite(lse)) fail(ErrorCode::ZeroMass, "ensemble carries no weight");
  Vec w(e.size);
  for (std::size_t j = 0; j < e.size; ++j) w[j] = std::exp(e.log_w[j] - lse);
  return w;
}

double effective_sample_size(const ParticleEnsemble& e) {
  const Vec w = normalized_weights(e);
  double s2 = 0.0;
  for (double v : w) s2 += v * v;
  return 1.0 / s2;
}

std::vector<std::size_t> systematic_resample(const Vec& weights, double u) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> idx(n);
  double total = 0.0;
  for (double w : weights) total += w;
  double cum = weights[0] / total;
  std::size_t k = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double point = (static_cast<double>(j) + u) / static_cast<double>(n);
    while (point >= cum && k + 1 < n) cum += weights[++k] / total;
    idx[j] = k;
  }
  return idx;
}

void propagate(ParticleEnsemble& e, const ModelSpec& model, double dt, double substep, int threads) {
  if (dt < 0.0) fail(ErrorCode::NegativeDt, "cannot propagate backwards in time");
  if (dt == 0.0) return;
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(dt / substep - 1e-9)));
  const double h = dt / static_cast<double>(steps);
  const double sq = std::sqrt(h);
  const std::size_t m = model.m;
  parallel_chunks(e.size, threads, [&](std::size_t b, std::size_t end) {
    Vec a(m), bm(m * m), z(m);
    for (std::size_t j = b; j < end; ++j) {
      double* x = e.at(j);
      Rng& rng = e.rngs[j];
      if (m == 1) {
        double v = x[0];
        for (std::size_t s = 0; s < steps; ++s) v += model.drift.eval1(v) * h + model.diffusion.eval1(v) * sq * rng.normal();
        if (!std::isfinite(v)) fail(ErrorCode::NumericalBlowup, "particle became non-finite");
        x[0] = v;
        continue;
      }
      for (std::size_t s = 0; s < steps; ++s) {
        model.drift.eval(x, a.data());
        model.diffusion.eval(x, bm.data());
        for (auto& v : z) v = rng.normal();
        for (std::size_t i = 0; i < m; ++i) {
          double acc = a[i] * h;
          for (std::size_t k = 0; k < m; ++k) acc += bm[i * m + k] * sq * z[k];
          x[i] += acc;
        }
      }
      for (std::size_t i = 0; i < m; ++i)
        if (!std::isfinite(x[i])) fail(ErrorCode::NumericalBlowup, "particle became non-finite");
    }
  });
}

ResampleRecord maybe_resample(ParticleEnsemble& e, double threshold, int event_index) {
  ResampleRecord rec;
  rec.event_index = event_index;
  rec.threshold = threshold * static_cast<double>(e.size);
  const Vec w = normalized_weights(e);
  double s2 = 0.0;
  for (double v : w) s2 += v * v;
  rec.ess = 1.0 / s2;
  if (!(rec.ess < rec.threshold)) return rec;
  rec.resampled = true;
  const auto idx = systematic_resample(w, e.resample_rng.uniform());
  Vec x(e.x.size());
  for (std::size_t j = 0; j < e.size; ++j) std::copy(e.at(idx[j]), e.at(idx[j]) + e.m, x.data() + j * e.m);
  e.x = std::move(x);
  const double lw = (e.mode == WeightMode::Unnormalized ? e.log_mass : 0.0) - std::log(static_cast<double>(e.size));
  std::fill(e.log_w.begin(), e.log_w.end(), lw);
  return rec;
}

ResampleRecord ks_update(ParticleEnsemble& e, const ObservationEvent& event, std::size_t jumps,
                         const ModelSpec& model, double threshold, int threads) {
  const EtaDensity dens(model.jump_law, model.n);
  Vec eta = implied_noise(e, event, model, threads);
  const std::size_t n = model.n;
  const double lse_before = log_sum_exp(e.log_w);
  for (std::size_t j = 0; j < e.size; ++j) e.log_w[j] += dens.log_density(eta.data() + j * n);
  const double lse = log_sum_exp(e.log_w);
  if (!std::isfinite(lse)) fail(ErrorCode::WeightCollapse, "every particle has zero likelihood for the observation");
  for (double& lw : e.log_w) lw -= lse;
  const double ref = dens.log_density(event.dy.data());
  e.log_mass += std::isfinite(ref) ? lse - lse_before - ref : std::numeric_limits<double>::quiet_NaN();
  const ResampleRecord rec = maybe_resample(e, threshold, static_cast<int>(event.index));
  if (rec.resampled) eta = implied_noise(e, event, model, threads);
  apply_jumps(e, eta, event, jumps, model, threads);
  return rec;
}

ResampleRecord zakai_update(ParticleEnsemble& e, const ObservationEvent& event, std::size_t jumps,
                            const ModelSpec& model, double threshold, int threads) {
  const EtaDensity dens(model.jump_law, model.n);
  const double ref = dens.log_density(event.dy.data());
  if (!std::isfinite(ref) || dens.density(event.dy.data()) <= 0.0)
    fail(ErrorCode::ZeroReferenceDensity, "the noise law gives zero density to the observed increment");
  Vec eta = implied_noise(e, event, model, threads);
  const std::size_t n = model.n;
  for (std::size_t j = 0; j < e.size; ++j) e.log_w[j] += dens.log_density(eta.data() + j * n) - ref;
  e.log_mass = log_sum_exp(e.log_w);
  if (!std::isfinite(e.log_mass)) fail(ErrorCode::WeightCollapse, "every particle has zero likelihood for the observation");
  const ResampleRecord rec = maybe_resample(e, threshold, static_cast<int>(event.index));
  if (rec.resampled) eta = implied_noise(e, event, model, threads);
  apply_jumps(e, eta, event, jumps, model, threads);
  return rec;
}

Estimate weighted_mean(const ParticleEnsemble& e, const TestFunction& phi) {
  const Vec w = normalized_weights(e);
  Vec v(e.size);
  double mean = 0.0;
  for (std::size_t j = 0; j < e.size; ++j) {
    v[j] = phi.value(e.at(j));
    mean += w[j] * v[j];
  }
  double var = 0.0;
  for (std::size_t j = 0; j < e.size; ++j) var += w[j] * w[j] * (v[j] - mean) * (v[j] - mean);
  return {mean, std::sqrt(var)};
}

double unnormalized_estimate(const ParticleEnsemble& e, const TestFunction& phi) {
  double acc = 0.0;
  for (std::size_t j = 0; j < e.size; ++j) acc += std::exp(e.log_w[j]) * phi.value(e.at(j));
  return acc;
}

double kallianpur_striebel(const ParticleEnsemble& e, const TestFunction& phi) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < e.size; ++j) {
    const double w = std::exp(e.log_w[j]);
    num += w * phi.value(e.at(j));
    den += w;
  }
  if (!(den > 0.0)) fail(ErrorCode::ZeroMass, "unnormalized mass is zero");
  return num / den;
}

double gamma_gaussian(double pred_mean, double pred_var, double r, double y) {
  if (!(r > 0.0)) fail(ErrorCode::NonpositiveR, "noise variance must be positive");
  if (pred_var < 0.0) fail(ErrorCode::InvalidConfig, "predictive variance must be nonnegative");
  const double s = pred_var + r;
  const double d = y - pred_mean;
  return 0.5 * std::log(s / r) - y * y / (2.0 * r) + d * d / (2.0 * s);
}

void require_zakai_support(const ModelSpec& model) {
  if (model.jump_law.eta_is_discrete())
    fail(ErrorCode::UnsupportedScenario,
         "the unnormalized filter needs a noise density; discrete noise laws have none");
}

ParticleRun run_particle_filter(const ValidatedScenario& scenario, const std::vector<ObservationEvent>& events,
                                WeightMode mode, const std::vector<TestFunctionPtr>& battery,
                                const ParticleRunOptions& options) {
  const auto& cfg = scenario.config();
  const auto& model = cfg.model;
  if (mode == WeightMode::Unnormalized) require_zakai_support(model);
  auto ens = make_ensemble(model, options.particles, mode, options.seed, options.run);
  const auto counts = jump_counts(cfg.schedule, events);
  const EtaDensity dens(model.jump_law, model.n);
  ParticleRun out;
  double t = 0.0;
  for (const auto& at : report_schedule(cfg.horizon, cfg.filter.report_every, events)) {
    if (at.side == Side::Post) {
      const auto i = static_cast<std::size_t>(at.event_index);
      const auto& ev = events[i];
      EventMass mass;
      mass.log_rho_pre = ens.log_mass;
      if (mode == WeightMode::Unnormalized) {
        // SE of sum wbar_j L_j from the pre-event cloud.
        const Vec w = normalized_weights(ens);
        const Vec eta = implied_noise(ens, ev, model, options.threads);
        const double ref = dens.log_density(ev.dy.data());
        Vec l(ens.size);
        double r = 0.0;
        for (std::size_t j = 0; j < ens.size; ++j) {
          l[j] = std::exp(dens.log_density(eta.data() + j * model.n) - ref);
          r += w[j] * l[j];
        }
        double v = 0.0;
        for (std::size_t j = 0; j < ens.size; ++j) v += w[j] * w[j] * (l[j] - r) * (l[j] - r);
        mass.ratio_se = std::sqrt(v);
        out.trace.push_back(zakai_update(ens, ev, counts[i], model, options.threshold, options.threads));
      } else {
        out.trace.push_back(ks_update(ens, ev, counts[i], model, options.threshold, options.threads));
      }
      mass.log_rho_post = ens.log_mass;
      out.masses.push_back(mass);
    } else {
      propagate(ens, model, at.t - t, cfg.dt, options.threads);
      t = at.t;
    }
    const double ess = effective_sample_size(ens);
    for (const auto& phi : battery) {
      const auto est = weighted_mean(ens, *phi);
      out.rows.push_back({at, phi->name(), est.value, est.se, ess, ens.log_mass});
    }
    if (options.snapshot) options.snapshot(at, ens);
  }
  return out;
}

}  // namespace pjf
