#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pjf/model.hpp"
#include "pjf/presets.hpp"
#include "pjf/quadrature.hpp"
#include "pjf/scenario_io.hpp"
#include "pjf/simulate.hpp"
#include "support.hpp"

#include <algorithm>

using namespace pjf;

namespace {

ErrorCode first_code(const ScenarioConfig& c) {
  const auto out = validate(c);
  REQUIRE_FALSE(out.ok());
  return out.violations.front().code;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

JumpLaw joint_law() {
  JumpLaw law;
  law.kind = JumpLaw::Kind::GaussianJoint;
  law.joint = Matrix{{1.0, 0.5}, {0.5, 1.0}};
  return law;
}

}  // namespace

TEST_CASE("ou_kalman preset validates") {
  const auto out = validate(make_preset(Preset::OuKalman));
  CHECK(out.ok());
  CHECK(out.violations.empty());
  const auto& m = out.scenario->model();
  CHECK(m.jump_law.q(0, 0) == 0.04);
  CHECK(m.jump_law.r(0, 0) == 0.01);
  CHECK(out.scenario->schedule().times == Vec{0.5, 1.0, 1.5});
}

TEST_CASE("every preset validates") {
  for (auto p : {Preset::OuKalman, Preset::Medical, Preset::CreditRisk, Preset::NjodeStyle})
    CHECK_MESSAGE(validate(make_preset(p)).ok(), preset_name(p));
  CHECK_THROWS_AS(make_preset(Preset::Custom), Error);
}

TEST_CASE("negative R is rejected as non-PSD") {
  OuParams p;
  p.r = -0.01;
  CHECK(first_code(make_ou(p)) == ErrorCode::NonPSDCovariance);
}

TEST_CASE("asymmetric joint covariance is rejected") {
  auto c = make_preset(Preset::OuKalman);
  c.model.jump_law = joint_law();
  c.model.jump_law.joint(0, 1) = 0.4;
  CHECK(first_code(c) == ErrorCode::NonPSDCovariance);
}

TEST_CASE("decreasing jump times are rejected") {
  OuParams p;
  p.times = {1.0, 0.5};
  CHECK(first_code(make_ou(p)) == ErrorCode::NonIncreasingTimes);
}

TEST_CASE("horizon before the last jump is rejected") {
  OuParams p;
  p.horizon = 1.2;
  CHECK(first_code(make_ou(p)) == ErrorCode::HorizonTooShort);
}

TEST_CASE("threshold schedule needs decreasing thresholds") {
  auto c = make_preset(Preset::Medical);
  std::reverse(c.schedule.thresholds.begin(), c.schedule.thresholds.end());
  CHECK(first_code(c) == ErrorCode::InvalidSchedule);
}

TEST_CASE("particle count below two is rejected") {
  auto c = make_preset(Preset::OuKalman);
  c.filter.particles = 1;
  CHECK(first_code(c) == ErrorCode::InvalidConfig);
}

TEST_CASE("discrete probabilities must sum to one") {
  auto c = make_preset(Preset::OuKalman);
  c.model.jump_law.kind = JumpLaw::Kind::Discrete;
  c.model.jump_law.atoms = {{{0.1}, {0.0}, 0.5}, {{-0.1}, {0.0}, 0.5 + 1e-9}};
  CHECK(first_code(c) == ErrorCode::InvalidConfig);
  c.model.jump_law.atoms.back().prob = 0.5;
  CHECK(validate(c).ok());
}

TEST_CASE("unknown descriptor kinds are reported") {
  auto text = scenario_to_json(make_preset(Preset::OuKalman));
  const auto at = text.find("\"identity\"");
  REQUIRE(at != std::string::npos);
  text.replace(at, 10, "\"sinusoid\"");
  try {
    scenario_from_json(text);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownFunctionDescriptor);
  }
}

TEST_CASE("non-finite descriptor near x0 is rejected") {
  auto c = make_preset(Preset::OuKalman);
  c.model.drift.transform.kind = ComponentTransform::Kind::Logarithm;
  c.model.x0 = {-1.0};
  CHECK(first_code(c) == ErrorCode::NonFiniteFunction);
}

TEST_CASE("validate_or_throw carries the first code and lists all") {
  OuParams p;
  p.r = -0.01;
  p.times = {1.0, 0.5};
  try {
    validate_or_throw(make_ou(p));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPSDCovariance);
    CHECK(std::string(e.what()).find("NonIncreasingTimes") != std::string::npos);
  }
}

TEST_CASE("serialization round-trips bit for bit") {
  for (auto p : {Preset::OuKalman, Preset::Medical, Preset::CreditRisk, Preset::NjodeStyle}) {
    const auto v = validate_or_throw(make_preset(p));
    const auto text = scenario_to_json(v.config());
    const auto back = validate_or_throw(scenario_from_json(text));
    CHECK(back == v);
    CHECK(scenario_to_json(back.config()) == text);
  }
  OuParams odd;
  odd.lambda = 0.1 + 0.2;
  odd.sigma = 1.0 / 3.0;
  odd.times = {std::nextafter(0.5, 1.0), 1.0};
  const auto v = validate_or_throw(make_ou(odd));
  CHECK(validate_or_throw(scenario_from_json(scenario_to_json(v.config()))) == v);
}

TEST_CASE("K = 0 schedules are accepted and produce no events") {
  OuParams p;
  p.times = {};
  const auto v = validate_or_throw(make_ou(p));
  CHECK(v.schedule().max_jumps() == 0);
  CHECK(simulate_path(v, 3).events.empty());
}

TEST_CASE("conditional law: independent Gaussian marks ignore eta") {
  const auto& law = make_preset(Preset::OuKalman).model.jump_law;
  const auto d = conditional_jump_law(law, 1, 1, {0.3});
  CHECK(d.kind == JumpDistribution::Kind::Gaussian);
  CHECK(d.mean[0] == doctest::Approx(0.0));
  CHECK(d.cov(0, 0) == doctest::Approx(0.04));
}

TEST_CASE("conditional law: joint Gaussian conditioning") {
  const auto law = joint_law();
  const auto d = conditional_jump_law(law, 1, 1, {1.0});
  CHECK(d.mean[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(d.cov(0, 0) == doctest::Approx(0.75).epsilon(1e-14));

  // Rejection oracle: keep joint draws whose eta lands near 1.
  MarkSampler marks(law, 1, 1);
  Rng rng(99);
  std::vector<double> kept;
  for (int i = 0; i < 1000000; ++i) {
    double xi, eta;
    marks.sample(rng, &xi, &eta);
    if (std::abs(eta - 1.0) < 0.02) kept.push_back(xi);
  }
  const auto s = test::summarize(kept);
  CHECK(std::abs(s.mean - 0.5) <= 3.0 * s.se);
  CHECK(std::abs(s.var - 0.75) <= 3.0 * s.var_se);
}

TEST_CASE("conditional law: degenerate marks are a point mass at zero") {
  JumpLaw law;
  law.kind = JumpLaw::Kind::DegenerateXiZero;
  law.r = Matrix::scalar(0.01);
  const auto d = conditional_jump_law(law, 1, 1, {0.7});
  CHECK(d.kind == JumpDistribution::Kind::PointMass);
  CHECK(d.mean[0] == 0.0);
}

TEST_CASE("conditional law: discrete Bayes over matching atoms") {
  JumpLaw law;
  law.kind = JumpLaw::Kind::Discrete;
  law.atoms = {{{1.0}, {0.0}, 0.2}, {{2.0}, {0.0}, 0.3}, {{3.0}, {1.0}, 0.5}};
  const auto d = conditional_jump_law(law, 1, 1, {0.0});
  REQUIRE(d.kind == JumpDistribution::Kind::Discrete);
  REQUIRE(d.atoms.size() == 2);
  CHECK(d.probs[0] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(d.probs[1] == doctest::Approx(0.6).epsilon(1e-14));
  try {
    conditional_jump_law(law, 1, 1, {0.5});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroConditionalMass);
  }
}

TEST_CASE("conditional law marginalized over eta reproduces the xi marginal") {
  const auto law = joint_law();
  const auto marginal = xi_marginal(law, 1, 1);
  ConditionalSampler cond(law, 1, 1);
  const auto eta_law = EtaDensity(law, 1);
  Rng a(1), b(2);
  std::vector<double> direct(100000), mixed(100000);
  bool all_sampled = true;
  for (std::size_t i = 0; i < direct.size(); ++i) {
    marginal.sample(a, &direct[i]);
    const double eta = eta_law.mean()(0) + std::sqrt(eta_law.cov()(0, 0)) * b.normal();
    all_sampled = cond.sample(&eta, b, &mixed[i]) && all_sampled;
  }
  REQUIRE(all_sampled);
  CHECK(ks_distance(direct, mixed) < 0.02);
}

TEST_CASE("eta density matches the normal formula") {
  const auto& law = make_preset(Preset::OuKalman).model.jump_law;
  EtaDensity g(law, 1);
  const double y = 0.07;
  CHECK(g.log_density(&y) == doctest::Approx(normal_log_pdf(y, 0.0, 0.01)).epsilon(1e-13));
}
