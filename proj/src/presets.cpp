#include "pjf/presets.hpp"

namespace pjf {

namespace {

VectorMap affine(Matrix m, Vec offset) {
  VectorMap v;
  v.matrix = std::move(m);
  v.offset = std::move(offset);
  return v;
}

MatrixField constant_field(double v) {
  MatrixField f;
  f.constant = Matrix::scalar(v);
  return f;
}

ObservationMap linear_obs(double a, double c) {
  ObservationMap o;
  o.a = Matrix::scalar(a);
  o.c = Matrix::scalar(c);
  o.offset = {0.0};
  return o;
}

ScenarioConfig medical() {
  ScenarioConfig c;
  c.preset = Preset::Medical;
  auto& s = c.model;
  s.x0 = {1.0};
  // Geometric Brownian motion: alpha x dt + beta x dB.
  s.drift = affine(Matrix::scalar(-0.5), {0.0});
  s.diffusion.constant = Matrix::scalar(0.0);
  s.diffusion.diagonal = {0.2};
  // Intervention multiplies the health state by exp(xi).
  s.jump.kind = JumpMap::Kind::ExpMultiplicative;
  // Health score Y_{s_j} = log X + eta, written as an increment.
  s.observation = linear_obs(1.0, 1.0);
  s.observation.transform.kind = ComponentTransform::Kind::Logarithm;
  s.jump_law.kind = JumpLaw::Kind::GaussianProduct;
  s.jump_law.q = Matrix::scalar(0.01);
  s.jump_law.r = Matrix::scalar(0.01);
  s.jump_law.xi_mean = {0.2};
  c.schedule.kind = Schedule::Kind::Threshold;
  for (int j = 1; j <= 20; ++j) c.schedule.grid.push_back(0.1 * j);
  c.schedule.thresholds = {-0.1, -0.3, -0.5};
  c.horizon = 2.0;
  c.dt = 1e-3;
  c.seed = 11;
  c.filter.particles = 10000;
  return c;
}

ScenarioConfig credit_risk() {
  ScenarioConfig c;
  c.preset = Preset::CreditRisk;
  auto& s = c.model;
  const double mu_v = 0.05, sigma_v = 0.2, alpha_y = 0.5;
  s.x0 = {0.0};
  s.drift = affine(Matrix::scalar(0.0), {mu_v - 0.5 * sigma_v * sigma_v});
  s.diffusion = constant_field(sigma_v);
  s.jump.kind = JumpMap::Kind::LogLoss;
  s.jump.beta = 1.0;
  s.jump.y_bar = -0.05;
  // f(x, y) = x + alpha_y y.
  s.observation = linear_obs(1.0, -alpha_y);
  s.jump_law.kind = JumpLaw::Kind::DiscreteXiGaussianEta;
  s.jump_law.r = Matrix::scalar(0.0025);
  s.jump_law.atoms = {{{0.0}, {}, 0.7}, {{0.1}, {}, 0.2}, {{0.3}, {}, 0.1}};
  c.schedule.times = {0.25, 0.5, 0.75, 1.0};
  c.horizon = 1.0;
  c.dt = 1e-3;
  c.seed = 13;
  c.filter.particles = 10000;
  c.filter.report_every = 0.05;
  return c;
}

ScenarioConfig njode_style() {
  ScenarioConfig c;
  c.preset = Preset::NjodeStyle;
  auto& s = c.model;
  s.x0 = {0.5};
  // Double-well drift x - x^3.
  s.drift.transform.kind = ComponentTransform::Kind::Polynomial;
  s.drift.transform.coeffs = {0.0, 1.0, 0.0, -1.0};
  s.drift.matrix = Matrix::scalar(1.0);
  s.drift.offset = {0.0};
  s.diffusion = constant_field(0.5);
  s.observation = linear_obs(1.0, 0.0);
  s.jump_law.kind = JumpLaw::Kind::DegenerateXiZero;
  s.jump_law.r = Matrix::scalar(0.05);
  c.schedule.times = {0.5, 1.0, 1.5, 2.0};
  c.horizon = 2.0;
  c.dt = 1e-3;
  c.seed = 17;
  c.filter.particles = 10000;
  return c;
}

}  // namespace

ScenarioConfig make_ou(const OuParams& p) {
  ScenarioConfig c;
  c.preset = Preset::Custom;
  auto& s = c.model;
  s.x0 = {p.x0};
  s.drift = affine(Matrix::scalar(-p.lambda), {0.0});
  s.diffusion = constant_field(p.sigma);
  s.jump.kind = JumpMap::Kind::Linear;
  s.jump.loading = constant_field(1.0);
  s.observation = linear_obs(p.a, p.c);
  s.jump_law.kind = JumpLaw::Kind::GaussianProduct;
  s.jump_law.q = Matrix::scalar(p.q);
  s.jump_law.r = Matrix::scalar(p.r);
  c.schedule.times = p.times;
  c.horizon = p.horizon;
  c.dt = p.dt;
  c.seed = 7;
  c.filter.particles = 100000;
  return c;
}

ScenarioConfig make_preset(Preset preset) {
  switch (preset) {
    case Preset::OuKalman: {
      auto c = make_ou(OuParams{});
      c.preset = Preset::OuKalman;
      return c;
    }
    case Preset::Medical: return medical();
    case Preset::CreditRisk: return credit_risk();
    case Preset::NjodeStyle: return njode_style();
    case Preset::Custom: break;
  }
  fail(ErrorCode::InvalidConfig, "no built-in scenario for preset 'custom'");
}

}  // namespace pjf
