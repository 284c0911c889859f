#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pjf/presets.hpp"
#include "pjf/simulate.hpp"
#include "support.hpp"

#include <cmath>

using namespace pjf;

namespace {

std::size_t row_at(const SignalPath& p, double t) {
  for (std::size_t r = 0; r < p.rows(); ++r)
    if (std::abs(p.t[r] - t) < 1e-12 && p.event_index[r] < 0) return r;
  FAIL("time not on grid");
  return 0;
}

}  // namespace

TEST_CASE("deterministic ODE limit") {
  OuParams p;
  p.sigma = 0.0;
  p.times = {};
  p.horizon = 1.0;
  const auto run = simulate_path(test::ou(p), 1);
  CHECK(std::abs(run.x_final[0] - std::exp(-1.0)) <= 5.0 * p.dt);
  CHECK(run.events.empty());
}

TEST_CASE("noise-free observation reads the pre-jump state") {
  OuParams p;
  p.sigma = 0.0;
  p.q = 0.0;
  p.r = 0.0;
  const auto run = simulate_path(test::ou(p), 5);
  REQUIRE(run.events.size() == 3);
  for (const auto& ev : run.events) {
    std::size_t r = 0;
    while (!(run.path.event_index[r] == static_cast<int>(ev.index) && !run.path.is_jump_time[r])) ++r;
    CHECK(run.path.t[r] == ev.time);
    CHECK(ev.dy[0] == run.path.x_at(r)[0]);
  }
}

TEST_CASE("OU moments before the first jump") {
  OuParams p;
  p.times = {0.5};
  p.horizon = 0.5;
  const auto v = test::ou(p);
  std::vector<double> x(100000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto run = simulate_path(v, 17, i);
    x[i] = run.path.x_at(row_at(run.path, 0.4))[0];
  }
  const auto s = test::summarize(x);
  CHECK(std::abs(s.mean - test::ou_mean(1.0, 1.0, 0.4)) <= 3.0 * s.se);
  CHECK(std::abs(s.var - test::ou_var(0.0, 1.0, 0.5, 0.4)) <= 3.0 * s.var_se);
}

TEST_CASE("halving dt halves the weak error of the mean") {
  auto err = [](double dt) {
    OuParams p;
    p.sigma = 0.05;
    p.times = {};
    p.horizon = 1.0;
    p.dt = dt;
    const auto v = test::ou(p);
    std::vector<double> x(10000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = simulate_path(v, 23, i, {false, false}).x_final[0];
    return std::abs(test::summarize(x).mean - std::exp(-1.0));
  };
  const double ratio = err(0.05) / err(0.1);
  CHECK(ratio >= 0.3);
  CHECK(ratio <= 0.7);
}

TEST_CASE("same seed gives identical paths") {
  const auto v = validate_or_throw(make_preset(Preset::Medical));
  const auto a = simulate_path(v, 42, 3);
  const auto b = simulate_path(v, 42, 3);
  CHECK(a.path.x == b.path.x);
  CHECK(a.path.y == b.path.y);
  CHECK(a.path.t == b.path.t);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) CHECK(a.events[i].dy == b.events[i].dy);
  CHECK(simulate_path(v, 42, 4).path.x != a.path.x);
}

TEST_CASE("jump and observation consistency at every event") {
  for (auto preset : {Preset::OuKalman, Preset::Medical, Preset::CreditRisk, Preset::NjodeStyle}) {
    const auto v = validate_or_throw(make_preset(preset));
    const auto& model = v.model();
    for (std::uint64_t k = 0; k < 20; ++k) {
      const auto run = simulate_path(v, 8, k);
      const auto& path = run.path;
      std::size_t mark = 0;
      for (const auto& ev : run.events) {
        std::size_t pre = 0;
        while (!(path.event_index[pre] == static_cast<int>(ev.index) && !path.is_jump_time[pre])) ++pre;
        const std::size_t post = pre + 1;
        CHECK(path.t[pre] == ev.time);
        CHECK(path.t[post] == ev.time);
        double f = 0.0;
        model.observation.eval(path.x_at(pre), ev.y_pre.data(), &f);
        CHECK(std::abs(ev.dy[0] - f - ev.eta[0]) <= 1e-15 * (1.0 + std::abs(ev.dy[0])));
        CHECK(path.y_at(post)[0] == ev.y_pre[0] + ev.dy[0]);
        double x = path.x_at(pre)[0];
        for (std::size_t j = 0; j < ev.jumps; ++j, ++mark)
          model.jump.apply(&x, ev.y_pre.data(), run.path.xi[mark].data(), 1);
        CHECK(x == path.x_at(post)[0]);
      }
      CHECK(mark == path.xi.size());
    }
  }
}

TEST_CASE("Y is piecewise constant between events") {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  const auto run = simulate_path(v, 2);
  for (std::size_t r = 1; r < run.path.rows(); ++r)
    if (!run.path.is_jump_time[r]) CHECK(run.path.y_at(r)[0] == run.path.y_at(r - 1)[0]);
}

TEST_CASE("threshold times: first crossing") {
  Schedule s;
  s.kind = Schedule::Kind::Threshold;
  s.grid = {1, 2, 3};
  s.thresholds = {0.5};
  const auto t = resolve_threshold_times(s, {0.9, 0.7, 0.4});
  REQUIRE(t.size() == 1);
  CHECK(t[0] == 3.0);
}

TEST_CASE("threshold times: never crossed") {
  Schedule s;
  s.kind = Schedule::Kind::Threshold;
  s.grid = {1, 2, 3};
  s.thresholds = {0.5};
  CHECK(std::isinf(resolve_threshold_times(s, {0.9, 0.8, 0.7})[0]));
}

TEST_CASE("threshold times: two thresholds fire in order") {
  Schedule s;
  s.kind = Schedule::Kind::Threshold;
  s.grid = {1, 2};
  s.thresholds = {0.8, 0.5};
  const auto t = resolve_threshold_times(s, {0.7, 0.45});
  REQUIRE(t.size() == 2);
  CHECK(t[0] == 2.0);  // T_1, theta_1 = 0.5
  CHECK(t[1] == 1.0);  // T_2, theta_2 = 0.8
}

TEST_CASE("threshold times are causal") {
  Schedule s;
  s.kind = Schedule::Kind::Threshold;
  s.grid = {1, 2, 3};
  s.thresholds = {0.8, 0.5};
  const auto partial = resolve_threshold_times(s, {0.7});
  CHECK(partial[1] == 1.0);
  CHECK(std::isinf(partial[0]));
  CHECK(resolve_threshold_times(s, {0.7, 0.9, 0.3})[0] == 3.0);
}

TEST_CASE("threshold jump counts follow the observations") {
  const auto v = validate_or_throw(make_preset(Preset::Medical));
  std::size_t fired = 0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto run = simulate_path(v, 4, k);
    CHECK(run.events.size() == v.schedule().grid.size());
    const auto counts = jump_counts(v.schedule(), run.events);
    for (std::size_t i = 0; i < run.events.size(); ++i) {
      CHECK(counts[i] == run.events[i].jumps);
      fired += counts[i];
    }
  }
  CHECK(fired > 0);
}

TEST_CASE("pre-event values are rebuilt from increments") {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  auto events = simulate_path(v, 9).events;
  const auto original = events;
  for (auto& ev : events) ev.y_pre.clear();
  fill_pre_event_values(events, 1);
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].y_pre == original[i].y_pre);
}

TEST_CASE("compensator data: W = 1 gives K on both sides") {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  const auto data = empirical_compensator_check_data(v, [](std::size_t, double, const double*) { return 1.0; }, 200, 3);
  for (const auto& s : data) {
    CHECK(s.against_mu == 3.0);
    CHECK(s.against_nu == doctest::Approx(3.0).epsilon(1e-12));
  }
}

namespace {

void check_compensator_mean(const CompensatorIntegrand& w) {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  const auto data = empirical_compensator_check_data(v, w, 10000, 31);
  std::vector<double> diff;
  for (const auto& s : data) diff.push_back(s.against_mu - s.against_nu);
  const auto d = test::summarize(diff);
  CHECK(std::abs(d.mean) <= 3.0 * d.se);
}

}  // namespace

TEST_CASE("compensator data: W = y") {
  check_compensator_mean([](std::size_t, double, const double* y) { return y[0]; });
}

TEST_CASE("compensator data: W = 1{t <= T1} y^2") {
  check_compensator_mean([](std::size_t i, double, const double* y) { return i == 0 ? y[0] * y[0] : 0.0; });
}

TEST_CASE("compensator data does not depend on the worker count") {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  auto w = [](std::size_t, double, const double* y) { return y[0] * y[0]; };
  const auto a = empirical_compensator_check_data(v, w, 300, 5, 1);
  const auto b = empirical_compensator_check_data(v, w, 300, 5, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].against_mu == b[i].against_mu);
    CHECK(a[i].against_nu == b[i].against_nu);
  }
}

TEST_CASE("reference measure draws observations from the noise law") {
  const auto v = validate_or_throw(make_preset(Preset::OuKalman));
  std::vector<double> dy;
  for (std::uint64_t k = 0; k < 20000; ++k)
    dy.push_back(simulate_path(v, 6, k, {true, false}).events[1].dy[0]);
  const auto s = test::summarize(dy);
  CHECK(std::abs(s.mean) <= 3.0 * s.se);
  CHECK(std::abs(s.var - 0.01) <= 3.0 * s.var_se);
}

TEST_CASE("time grid inserts event times exactly") {
  const auto g = time_grid(1.0, 0.3, {0.45});
  CHECK(g == Vec{0.0, 0.3, 0.45, 0.6, 0.8999999999999999, 1.0});
}
