#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pjf/kalman_jump.hpp"
#include "pjf/oracle_grid.hpp"
#include "pjf/presets.hpp"
#include "pjf/quadrature.hpp"
#include "support.hpp"

using namespace pjf;

namespace {

ObservationEvent event_at(double t, double dy, double y_pre = 0.0) {
  ObservationEvent ev;
  ev.time = t;
  ev.dy = {dy};
  ev.y_pre = {y_pre};
  ev.jumps = 1;
  return ev;
}

ModelSpec no_jump_model(double r) {
  auto c = make_preset(Preset::OuKalman);
  c.model.jump_law = {};
  c.model.jump_law.kind = JumpLaw::Kind::DegenerateXiZero;
  c.model.jump_law.r = Matrix::scalar(r);
  return validate_or_throw(c).model();
}

}  // namespace

TEST_CASE("zero-time propagation is the identity") {
  const auto model = validate_or_throw(make_preset(Preset::OuKalman)).model();
  const auto d = gaussian_density(-3, 3, 500, 0.2, 0.4);
  CHECK(grid_propagate(d, model, 0.0, 1e-3).p == d.p);
}

TEST_CASE("pure diffusion adds b^2 dt to the variance") {
  OuParams p;
  p.lambda = 0.0;
  const auto model = test::ou(p).model();
  const auto d = gaussian_density(-4, 4, 2000, 0.1, 0.3);
  const auto before = grid_moments(d);
  const auto after = grid_moments(grid_propagate(d, model, 0.5, 1e-3));
  CHECK(std::abs(after.var - before.var - 0.125) <= 1e-6);
  CHECK(std::abs(after.mean - before.mean) <= 1e-10);
}

TEST_CASE("OU from a narrow start matches the closed form") {
  const auto model = validate_or_throw(make_preset(Preset::OuKalman)).model();
  auto d = gaussian_density(-2, 3, 2000, 1.0, 2.0 * 5.0 / 1999.0);
  const auto start = grid_moments(d);
  for (double t : {0.4, 1.0}) {
    const auto m = grid_moments(grid_propagate(d, model, t, 1e-3));
    // The Euler kernel carries the mean exactly along (1 - dt)^n; its gap to
    // exp(-t) is the O(dt) kernel bias (1.3e-4 at t = 0.4 from x0 = 1).
    const double euler_mean = start.mean * std::pow(1.0 - 1e-3, std::round(t / 1e-3));
    CHECK(std::abs(m.mean - euler_mean) <= 1e-4);
    CHECK(std::abs(m.mean - test::ou_mean(start.mean, 1.0, t)) <= 1e-3 * t);
    CHECK(std::abs(m.var - test::ou_var(start.var, 1.0, 0.5, t)) <= 1e-4);
  }
}

TEST_CASE("mass is conserved by every operation") {
  const auto model = validate_or_throw(make_preset(Preset::OuKalman)).model();
  auto d = gaussian_density(-3, 3, 1500, 0.5, 0.2);
  CHECK(std::abs(grid_mass(d) - 1.0) <= 1e-8);
  d = grid_propagate(d, model, 0.3, 1e-3);
  CHECK(std::abs(grid_mass(d) - 1.0) <= 1e-8);
  d = grid_event_update(d, event_at(0.3, 0.4), 1, model);
  CHECK(std::abs(grid_mass(d) - 1.0) <= 1e-8);
}

TEST_CASE("mass near the boundary is reported") {
  const auto model = validate_or_throw(make_preset(Preset::OuKalman)).model();
  const auto d = gaussian_density(-0.5, 1.5, 400, 1.0, 0.05);
  try {
    grid_propagate(d, model, 1.0, 1e-3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BoundaryLeak);
  }
}

TEST_CASE("flat likelihood without signal jumps changes nothing") {
  const auto model = no_jump_model(1e12);
  const auto d = gaussian_density(-3, 3, 800, 0.5, 0.3);
  const auto post = grid_event_update(d, event_at(0.5, 0.2), 1, model);
  for (std::size_t i = 0; i < d.nodes(); ++i) CHECK(post.p[i] == doctest::Approx(d.p[i]).epsilon(1e-10));
}

TEST_CASE("event update matches the exact Gaussian posterior") {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  const auto d = gaussian_density(-2, 3, 2000, 0.8, std::sqrt(0.05));
  const auto prior = grid_moments(d);
  const auto post = grid_moments(grid_event_update(d, event_at(0.5, 0.9), 1, v.model()));
  const auto u = jump_update({EVec::Constant(1, prior.mean), EMat::Constant(1, 1, prior.var), 0.5}, {0.9}, {0.0}, 1,
                             linear_params(v));
  CHECK(std::abs(post.mean - u.belief.m(0)) <= 1e-3);
  CHECK(std::abs(post.var - u.belief.p(0, 0)) <= 1e-3);
  CHECK(std::abs(post.mean - 0.8833333333333333) <= 1e-3);
  CHECK(std::abs(post.var - 0.0483333333333333) <= 1e-3);
}

TEST_CASE("two narrow bumps get their Bayes weights") {
  const auto model = no_jump_model(0.25);
  const double s = 0.05;
  GridDensity d = gaussian_density(-3, 3, 3000, -1.0, s);
  const auto right = gaussian_density(-3, 3, 3000, 1.0, s);
  for (std::size_t i = 0; i < d.nodes(); ++i) d.p[i] = 0.4 * d.p[i] + 0.6 * right.p[i];
  const auto post = grid_event_update(d, event_at(0.5, 0.5), 1, model);
  const double wl = 0.4 * normal_pdf(0.5, -1.0, 0.25 + s * s), wr = 0.6 * normal_pdf(0.5, 1.0, 0.25 + s * s);
  const double left_mass = grid_integral(post, [](double x) { return x < 0.0 ? 1.0 : 0.0; });
  CHECK(std::abs(left_mass - wl / (wl + wr)) <= 1e-4);
}

TEST_CASE("incompatible discrete observation has zero likelihood") {
  auto c = make_preset(Preset::OuKalman);
  c.model.jump_law = {};
  c.model.jump_law.kind = JumpLaw::Kind::Discrete;
  c.model.jump_law.atoms = {{{0.0}, {0.0}, 1.0}};
  c.model.observation.a = Matrix::scalar(0.0);
  const auto v = validate_or_throw(c);
  try {
    grid_event_update(gaussian_density(-3, 3, 200, 0, 0.5), event_at(0.5, 0.3), 1, v.model());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroLikelihoodMass);
  }
}

TEST_CASE("innovation kernel of a constant is zero") {
  const auto model = validate_or_throw(make_preset(Preset::OuKalman)).model();
  const auto d = gaussian_density(-2, 3, 1000, 0.7, 0.25);
  const auto one = make_constant(1);
  for (double y : {-0.5, 0.3, 0.9, 2.0}) {
    CHECK(std::abs(grid_S_phi(d, {0.0}, 1, model, *one, y)) <= 1e-12);
    CHECK(std::abs(grid_S_phi_increment(d, {0.0}, 1, model, *one, y)) <= 1e-12);
  }
}

TEST_CASE("jump of phi vanishes when the signal does not jump") {
  const auto model = no_jump_model(0.01);
  const auto d = gaussian_density(-2, 3, 1000, 0.7, 0.25);
  const auto phi = make_tanh({1.0}, 0.2);
  for (double y : {-0.5, 0.3, 0.9}) CHECK(grid_S_phi_increment(d, {0.0}, 1, model, *phi, y) == 0.0);
  CHECK(std::abs(grid_jump_term(d, {0.0}, model, *phi)) == 0.0);
}

TEST_CASE("innovation kernel matches the Kalman mean change") {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  const auto d = gaussian_density(-2, 3, 2000, 0.8, std::sqrt(0.05));
  const auto prior = grid_moments(d);
  const auto id = make_clipped_identity(1);
  const auto prm = linear_params(v);
  for (double y = 0.2; y <= 1.4; y += 0.1) {
    const auto u = jump_update({EVec::Constant(1, prior.mean), EMat::Constant(1, 1, prior.var), 0.5}, {y}, {0.0}, 1, prm);
    CHECK(std::abs(grid_S_phi(d, {0.0}, 1, v.model(), *id, y) - (u.belief.m(0) - prior.mean)) <= 1e-3);
  }
}

TEST_CASE("predictive density is the Gaussian predictive law") {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  const auto d = gaussian_density(-2, 3, 2000, 0.8, std::sqrt(0.05));
  const auto mom = grid_moments(d);
  for (double y : {0.3, 0.8, 1.2})
    CHECK(grid_predictive_density(d, {0.0}, v.model(), y) ==
          doctest::Approx(normal_pdf(y, mom.mean, mom.var + 0.01)).epsilon(1e-8));
  // The kernel of the identity integrates to zero against the predictive law.
  const auto id = make_clipped_identity(1);
  CHECK(std::abs(grid_S_nu_integral(d, {0.0}, 1, v.model(), *id)) <= 1e-8);
}

TEST_CASE("full preset trajectory tracks the exact filter") {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  const auto events = simulate_path(v, v.config().seed).events;
  const auto grid = run_grid(v, events);
  const auto kal = run_kalman(v, events);
  REQUIRE(grid.rows.size() == kal.rows.size());
  for (std::size_t i = 0; i < grid.rows.size(); ++i) {
    CHECK(std::abs(grid.rows[i].mean - kal.rows[i].m(0)) <= 1e-3);
    CHECK(std::abs(grid.rows[i].var - kal.rows[i].p(0, 0)) <= 1e-3);
    CHECK(std::abs(grid.rows[i].mass - 1.0) <= 1e-8);
  }
}

TEST_CASE("refining the grid and the step moves the means by less than the tolerance") {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  const auto events = simulate_path(v, 5).events;
  auto fine_cfg = v.config();
  fine_cfg.filter.grid.nodes *= 2;
  fine_cfg.dt /= 2.0;
  const auto coarse = run_grid(v, events);
  const auto fine = run_grid(validate_or_throw(fine_cfg), events, coarse.domain);
  for (std::size_t i = 0; i < coarse.rows.size(); ++i) CHECK(std::abs(coarse.rows[i].mean - fine.rows[i].mean) <= 1e-3);
}

TEST_CASE("nonlinear presets run on the grid") {
  for (auto preset : {Preset::Medical, Preset::CreditRisk, Preset::NjodeStyle}) {
    const auto v = validate_or_throw(make_preset(preset));
    const auto events = simulate_path(v, 2).events;
    const auto grid = run_grid(v, events);
    for (const auto& row : grid.rows) {
      CHECK(std::abs(row.mass - 1.0) <= 1e-8);
      CHECK(std::isfinite(row.mean));
    }
  }
}

TEST_CASE("multi-dimensional scenarios are not supported") {
  auto c = make_preset(Preset::OuKalman);
  auto& m = c.model;
  m.m = 2;
  m.x0 = {1.0, 0.0};
  m.drift.matrix = Matrix{{-1.0, 0.0}, {0.0, -1.0}};
  m.drift.offset = {0.0, 0.0};
  m.diffusion.constant = Matrix{{0.5, 0.0}, {0.0, 0.5}};
  m.jump.loading.constant = Matrix::identity(2);
  m.observation.a = Matrix{{1.0, 0.0}};
  m.jump_law.q = Matrix{{0.04, 0.0}, {0.0, 0.04}};
  const auto v = validate_or_throw(c);
  try {
    run_grid(v, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedScenario);
  }
}
