#include "pjf/oracle_grid.hpp"

#include "pjf/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pjf {

namespace {

constexpr double kWindow = 8.0;

double trapezoid_weight(std::size_t i, std::size_t g) { return (i == 0 || i + 1 == g) ? 0.5 : 1.0; }

// Adds `mass` at position `pos`, split linearly between the two nearest nodes.
void deposit_linear(Vec& out, double lo, double dx, double mass, double pos) {
  if (!std::isfinite(pos)) return;
  const double c = (pos - lo) / dx;
  const double fl = std::floor(c);
  if (fl < -1.0 || fl > static_cast<double>(out.size())) return;
  const auto i = static_cast<long>(fl);
  const double frac = c - fl;
  const long g = static_cast<long>(out.size());
  if (i >= 0 && i < g) out[static_cast<std::size_t>(i)] += mass * (1.0 - frac) / dx;
  if (i + 1 >= 0 && i + 1 < g) out[static_cast<std::size_t>(i + 1)] += mass * frac / dx;
}

// Adds `mass` spread as N(mean, sd^2) discretized on the lattice (normalized
// over the whole lattice, so mass falling outside the domain is lost).
void deposit_gaussian(Vec& out, double lo, double dx, double mass, double mean, double sd) {
  if (!(sd >= 0.3 * dx)) {
    deposit_linear(out, lo, dx, mass, mean);
    return;
  }
  const double c = (mean - lo) / dx;
  const double s = sd / dx;
  const double first = std::ceil(c - kWindow * s), last = std::floor(c + kWindow * s);
  const long g = static_cast<long>(out.size());
  if (last < 0.0 || first > static_cast<double>(g - 1)) return;
  // exp(-d^2 / 2s^2) along the lattice by the two-term recurrence.
  const double inv = 1.0 / (2.0 * s * s);
  double d = first - c;
  double val = std::exp(-d * d * inv);
  double ratio = std::exp(-(2.0 * d + 1.0) * inv);
  const double q = std::exp(-2.0 * inv);
  const auto n = static_cast<std::size_t>(last - first) + 1;
  thread_local Vec buf;
  buf.resize(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    buf[k] = val;
    total += val;
    val *= ratio;
    ratio *= q;
  }
  const double scale = mass / (total * dx);
  const auto i0 = static_cast<long>(first);
  for (std::size_t k = 0; k < n; ++k) {
    const long i = i0 + static_cast<long>(k);
    if (i >= 0 && i < g) out[static_cast<std::size_t>(i)] += buf[k] * scale;
  }
}

GridDensity like(const GridDensity& d) {
  GridDensity out;
  out.lo = d.lo;
  out.hi = d.hi;
  out.t = d.t;
  out.p.assign(d.p.size(), 0.0);
  return out;
}

void normalize(GridDensity& d, ErrorCode code, const char* what) {
  const double mass = grid_mass(d);
  if (!(mass > 0.0) || !std::isfinite(mass)) fail(code, what);
  for (double& v : d.p) v /= mass;
}

// Implied noise at node x for observed increment y.
double implied_eta(const ModelSpec& model, double x, double y_pre, double y) {
  return y - model.observation.eval1(x, y_pre);
}

// Discretized conditional law of xi: Gaussian laws by a uniform midpoint rule
// over mean +- 8 sd, discrete laws by their atoms.
struct XiRule {
  Vec xi;
  Vec w;
};

XiRule xi_rule(const JumpDistribution& law, std::size_t points) {
  XiRule r;
  switch (law.kind) {
    case JumpDistribution::Kind::PointMass:
      r.xi = {law.mean[0]};
      r.w = {1.0};
      break;
    case JumpDistribution::Kind::Discrete:
      for (std::size_t a = 0; a < law.atoms.size(); ++a) {
        r.xi.push_back(law.atoms[a][0]);
        r.w.push_back(law.probs[a]);
      }
      break;
    case JumpDistribution::Kind::Gaussian: {
      const double mu = law.mean[0], sd = std::sqrt(std::max(law.cov(0, 0), 0.0));
      if (sd == 0.0) {
        r.xi = {mu};
        r.w = {1.0};
        break;
      }
      const double h = 2.0 * kWindow * sd / static_cast<double>(points);
      double total = 0.0;
      for (std::size_t k = 0; k < points; ++k) {
        const double z = mu - kWindow * sd + (static_cast<double>(k) + 0.5) * h;
        r.xi.push_back(z);
        r.w.push_back(normal_pdf(z, mu, sd * sd));
        total += r.w.back();
      }
      for (double& v : r.w) v /= total;
      break;
    }
  }
  return r;
}

bool gaussian_linear_push(const ModelSpec& model, const JumpDistribution& law) {
  return model.jump.kind == JumpMap::Kind::Linear && law.kind == JumpDistribution::Kind::Gaussian;
}

// Pushes mass at x through one jump with xi ~ law.
void push_one(Vec& out, double lo, double dx, double mass, double x, double y_pre, const ModelSpec& model,
              const JumpDistribution& law, std::size_t points) {
  if (model.jump.kind == JumpMap::Kind::None || law.kind == JumpDistribution::Kind::PointMass) {
    const double xi = law.kind == JumpDistribution::Kind::PointMass ? law.mean[0] : 0.0;
    deposit_linear(out, lo, dx, mass, model.jump.kind == JumpMap::Kind::None ? x : model.jump.apply1(x, y_pre, xi));
    return;
  }
  if (gaussian_linear_push(model, law)) {
    const double c = model.jump.loading.eval1(x);
    deposit_gaussian(out, lo, dx, mass, x + c * law.mean[0], std::abs(c) * std::sqrt(law.cov(0, 0)));
    return;
  }
  const XiRule r = xi_rule(law, points);
  for (std::size_t k = 0; k < r.xi.size(); ++k)
    deposit_linear(out, lo, dx, mass * r.w[k], model.jump.apply1(x, y_pre, r.xi[k]));
}

// E[phi(x after `jumps` jumps)] with every xi drawn from `law`.
double jumped_expectation(const TestFunction& phi, const ModelSpec& model, const JumpDistribution& law, double x,
                          double y_pre, std::size_t jumps) {
  if (jumps == 0 || model.jump.kind == JumpMap::Kind::None) return phi.value(&x);
  const std::size_t order = jumps == 1 ? 40 : 16;
  return law.expect(
      [&](const double* xi) {
        return jumped_expectation(phi, model, law, model.jump.apply1(x, y_pre, xi[0]), y_pre, jumps - 1);
      },
      order);
}

void require_scalar(const ModelSpec& model) {
  if (!is_one_dimensional(model))
    fail(ErrorCode::UnsupportedScenario, "the grid filter handles scalar signal and observation only");
}

struct PosteriorTerms {
  double num = 0.0;
  double num_pre = 0.0;
  double den = 0.0;
};

PosteriorTerms posterior_terms(const GridDensity& pre, double y_pre, std::size_t jumps, const ModelSpec& model,
                               const TestFunction& phi, double y) {
  const EtaDensity dens(model.jump_law, 1);
  const ConditionalSampler cond(model.jump_law, 1, 1);
  const std::size_t g = pre.nodes();
  Vec lik(g, 0.0);
  double peak = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    if (pre.p[i] <= 0.0) continue;
    const double eta = implied_eta(model, pre.node(i), y_pre, y);
    if (!std::isfinite(eta)) continue;
    lik[i] = trapezoid_weight(i, g) * pre.p[i] * dens.density(&eta);
    peak = std::max(peak, lik[i]);
  }
  PosteriorTerms t;
  std::optional<JumpDistribution> fixed;
  if (!cond.depends_on_eta()) {
    const double zero = 0.0;
    fixed = cond.law(&zero);
  }
  for (std::size_t i = 0; i < g; ++i) {
    if (lik[i] <= peak * 1e-18 || lik[i] == 0.0) continue;
    const double x = pre.node(i);
    const double eta = implied_eta(model, x, y_pre, y);
    const double after = fixed ? jumped_expectation(phi, model, *fixed, x, y_pre, jumps)
                               : jumped_expectation(phi, model, cond.law(&eta), x, y_pre, jumps);
    t.num += lik[i] * after;
    t.num_pre += lik[i] * phi.value(&x);
    t.den += lik[i];
  }
  if (!(t.den > 0.0)) fail(ErrorCode::ZeroLikelihoodMass, "the observation has zero likelihood on the grid");
  return t;
}

}  // namespace

GridDensity gaussian_density(double lo, double hi, std::size_t nodes, double mean, double sd) {
  if (nodes < 2 || !(hi > lo)) fail(ErrorCode::InvalidConfig, "grid needs at least two nodes and hi > lo");
  GridDensity d;
  d.lo = lo;
  d.hi = hi;
  d.p.assign(nodes, 0.0);
  for (std::size_t i = 0; i < nodes; ++i) d.p[i] = normal_pdf(d.node(i), mean, sd * sd);
  normalize(d, ErrorCode::BoundaryLeak, "initial density falls outside the grid");
  return d;
}

double grid_mass(const GridDensity& d) {
  double s = 0.0;
  const std::size_t g = d.nodes();
  for (std::size_t i = 0; i < g; ++i) s += trapezoid_weight(i, g) * d.p[i];
  return s * d.dx();
}

double grid_integral(const GridDensity& d, const std::function<double(double)>& fn) {
  double s = 0.0;
  const std::size_t g = d.nodes();
  for (std::size_t i = 0; i < g; ++i)
    if (d.p[i] != 0.0) s += trapezoid_weight(i, g) * d.p[i] * fn(d.node(i));
  return s * d.dx();
}

double grid_expectation(const GridDensity& d, const TestFunction& phi) {
  return grid_integral(d, [&](double x) { return phi.value(&x); }) / grid_mass(d);
}

GridMoments grid_moments(const GridDensity& d) {
  const double mass = grid_mass(d);
  const double mean = grid_integral(d, [](double x) { return x; }) / mass;
  const double var = grid_integral(d, [&](double x) { return (x - mean) * (x - mean); }) / mass;
  return {mean, var};
}

void check_boundary(const GridDensity& d) {
  const std::size_t g = d.nodes();
  const std::size_t band = std::max<std::size_t>(1, g / 50);
  double left = 0.0, right = 0.0;
  for (std::size_t i = 0; i < band; ++i) {
    left += d.p[i];
    right += d.p[g - 1 - i];
  }
  const double leak = std::max(left, right) * d.dx() / grid_mass(d);
  if (leak > 1e-6)
    fail(ErrorCode::BoundaryLeak, "grid boundary holds mass " + std::to_string(leak) + " at t = " + std::to_string(d.t));
}

GridDensity grid_propagate(const GridDensity& d, const ModelSpec& model, double dt, double substep) {
  require_scalar(model);
  if (dt < 0.0) fail(ErrorCode::NegativeDt, "cannot propagate backwards in time");
  if (dt == 0.0) return d;
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(dt / substep - 1e-9)));
  const double h = dt / static_cast<double>(steps);
  const std::size_t g = d.nodes();
  const double dx = d.dx();
  GridDensity cur = d;
  for (std::size_t s = 0; s < steps; ++s) {
    GridDensity next = like(cur);
    for (std::size_t i = 0; i < g; ++i) {
      if (cur.p[i] == 0.0) continue;
      const double x = cur.node(i);
      const double b = model.diffusion.eval1(x);
      deposit_gaussian(next.p, cur.lo, dx, cur.p[i] * dx, x + model.drift.eval1(x) * h, std::abs(b) * std::sqrt(h));
    }
    next.t = cur.t + h;
    cur = std::move(next);
  }
  cur.t = d.t + dt;
  normalize(cur, ErrorCode::BoundaryLeak, "all grid mass left the domain");
  check_boundary(cur);
  return cur;
}

GridDensity grid_event_update(const GridDensity& d, const ObservationEvent& event, std::size_t jumps,
                              const ModelSpec& model, std::size_t xi_points) {
  require_scalar(model);
  const EtaDensity dens(model.jump_law, 1);
  const double y = event.dy[0], y_pre = event.y_pre[0];
  const std::size_t g = d.nodes();
  const double dx = d.dx();
  GridDensity post = like(d);
  Vec eta(g, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    eta[i] = implied_eta(model, d.node(i), y_pre, y);
    if (d.p[i] == 0.0 || !std::isfinite(eta[i])) continue;
    post.p[i] = d.p[i] * dens.density(&eta[i]);
  }
  normalize(post, ErrorCode::ZeroLikelihoodMass, "the observation has zero likelihood on the grid");
  if (jumps == 0 || model.jump.kind == JumpMap::Kind::None) return post;

  const ConditionalSampler cond(model.jump_law, 1, 1);
  if (!cond.depends_on_eta()) {
    const double zero = 0.0;
    const JumpDistribution law = cond.law(&zero);
    for (std::size_t k = 0; k < jumps; ++k) {
      GridDensity next = like(post);
      for (std::size_t i = 0; i < g; ++i)
        if (post.p[i] != 0.0) push_one(next.p, post.lo, dx, post.p[i] * dx, post.node(i), y_pre, model, law, xi_points);
      post = std::move(next);
    }
  } else {
    // xi depends on the noise implied at the pre-jump location; follow each
    // node's mass through all of its jumps.
    GridDensity next = like(post);
    for (std::size_t i = 0; i < g; ++i) {
      if (post.p[i] == 0.0) continue;
      const JumpDistribution law = cond.law(&eta[i]);
      const std::size_t points = jumps == 1 ? xi_points : 24;
      const XiRule r = xi_rule(law, points);
      std::vector<std::pair<double, double>> cloud{{post.node(i), post.p[i] * dx}};
      for (std::size_t k = 0; k + 1 < jumps; ++k) {
        std::vector<std::pair<double, double>> grown;
        for (const auto& [x, w] : cloud)
          for (std::size_t a = 0; a < r.xi.size(); ++a) grown.emplace_back(model.jump.apply1(x, y_pre, r.xi[a]), w * r.w[a]);
        cloud = std::move(grown);
      }
      for (const auto& [x, w] : cloud) push_one(next.p, post.lo, dx, w, x, y_pre, model, law, points);
    }
    post = std::move(next);
  }
  normalize(post, ErrorCode::BoundaryLeak, "all grid mass left the domain at a jump");
  return post;
}

double grid_S_phi(const GridDensity& pre, const Vec& y_pre, std::size_t jumps, const ModelSpec& model,
                  const TestFunction& phi, double y) {
  require_scalar(model);
  const PosteriorTerms t = posterior_terms(pre, y_pre[0], jumps, model, phi, y);
  return t.num / t.den - grid_expectation(pre, phi);
}

double grid_S_phi_increment(const GridDensity& pre, const Vec& y_pre, std::size_t jumps, const ModelSpec& model,
                            const TestFunction& phi, double y) {
  require_scalar(model);
  const PosteriorTerms t = posterior_terms(pre, y_pre[0], jumps, model, phi, y);
  return (t.num - t.num_pre) / t.den;
}

double grid_predictive_density(const GridDensity& pre, const Vec& y_pre, const ModelSpec& model, double y) {
  require_scalar(model);
  const EtaDensity dens(model.jump_law, 1);
  return grid_integral(pre, [&](double x) {
           const double eta = implied_eta(model, x, y_pre[0], y);
           return std::isfinite(eta) ? dens.density(&eta) : 0.0;
         }) /
         grid_mass(pre);
}

double grid_S_nu_integral(const GridDensity& pre, const Vec& y_pre, std::size_t jumps, const ModelSpec& model,
                          const TestFunction& phi, std::size_t order) {
  require_scalar(model);
  const EtaDensity dens(model.jump_law, 1);
  if (dens.has_atoms())
    fail(ErrorCode::UnsupportedScenario, "the predictive integral needs a noise density");
  const double mass = grid_mass(pre);
  auto f_of = [&](double x) { return model.observation.eval1(x, y_pre[0]); };
  const double fm = grid_integral(pre, [&](double x) {
                      const double v = f_of(x);
                      return std::isfinite(v) ? v : 0.0;
                    }) / mass;
  const double fv = grid_integral(pre, [&](double x) {
                      const double v = f_of(x);
                      return std::isfinite(v) ? (v - fm) * (v - fm) : 0.0;
                    }) / mass;
  const double mean = fm + dens.mean()(0);
  const double var = fv + dens.cov()(0, 0);
  const double base = grid_expectation(pre, phi);
  return gaussian_expectation(
      [&](double y) {
        const PosteriorTerms t = posterior_terms(pre, y_pre[0], jumps, model, phi, y);
        const double ratio = grid_predictive_density(pre, y_pre, model, y) / normal_pdf(y, mean, var);
        return (t.num / t.den - base) * ratio;
      },
      mean, var, order);
}

double grid_jump_term(const GridDensity& pre, const Vec& y_pre, const ModelSpec& model, const TestFunction& phi) {
  require_scalar(model);
  const JumpDistribution law = xi_marginal(model.jump_law, 1, 1);
  return grid_integral(pre, [&](double x) { return generator_jump(phi, model, law, &x, y_pre.data()); }) /
         grid_mass(pre);
}

std::pair<double, double> choose_domain(const ValidatedScenario& scenario, std::size_t pilot_paths) {
  const auto& cfg = scenario.config();
  const auto& gs = cfg.filter.grid;
  if (gs.lo && gs.hi) return {*gs.lo, *gs.hi};
  require_scalar(cfg.model);
  Vec sum, sum2;
  const std::uint64_t key = derive_key(cfg.seed, StreamTag::Pilot, 0);
  for (std::size_t k = 0; k < pilot_paths; ++k) {
    const SimulatedRun run = simulate_path(scenario, key, k);
    const std::size_t rows = run.path.rows();
    if (sum.empty()) {
      sum.assign(rows, 0.0);
      sum2.assign(rows, 0.0);
    }
    for (std::size_t r = 0; r < std::min(rows, sum.size()); ++r) {
      const double x = run.path.x[r];
      sum[r] += x;
      sum2[r] += x * x;
    }
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const double np = static_cast<double>(pilot_paths);
  for (std::size_t r = 0; r < sum.size(); ++r) {
    const double mean = sum[r] / np;
    const double sd = std::sqrt(std::max(0.0, sum2[r] / np - mean * mean));
    lo = std::min(lo, mean - gs.sd_span * sd);
    hi = std::max(hi, mean + gs.sd_span * sd);
  }
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    fail(ErrorCode::NumericalBlowup, "pilot run gave a degenerate grid domain");
  const double pad = 0.05 * (hi - lo);
  return {gs.lo.value_or(lo - pad), gs.hi.value_or(hi + pad)};
}

GridRun run_grid(const ValidatedScenario& scenario, const std::vector<ObservationEvent>& events,
                 std::optional<std::pair<double, double>> domain, bool keep_densities) {
  const auto& cfg = scenario.config();
  const auto& model = cfg.model;
  require_scalar(model);
  GridRun out;
  out.domain = domain ? *domain : choose_domain(scenario);
  const std::size_t g = cfg.filter.grid.nodes;
  const double dx = (out.domain.second - out.domain.first) / static_cast<double>(g - 1);
  GridDensity cur = gaussian_density(out.domain.first, out.domain.second, g, model.x0[0], 2.0 * dx);
  out.jumps = jump_counts(cfg.schedule, events);
  for (const auto& at : report_schedule(cfg.horizon, cfg.filter.report_every, events)) {
    if (at.side == Side::Post) {
      const auto i = static_cast<std::size_t>(at.event_index);
      if (keep_densities) out.pre.push_back(cur);
      cur = grid_event_update(cur, events[i], out.jumps[i], model, cfg.filter.grid.xi_points);
      if (keep_densities) out.post.push_back(cur);
    } else {
      cur = grid_propagate(cur, model, std::max(0.0, at.t - cur.t), cfg.dt);
      cur.t = at.t;
    }
    check_boundary(cur);
    const GridMoments mom = grid_moments(cur);
    out.rows.push_back({at, mom.mean, mom.var, grid_mass(cur)});
  }
  return out;
}

}  // namespace pjf
