#include "pjf/kalman_jump.hpp"

#include <algorithm>
#include <cmath>

namespace pjf {

std::string_view side_name(Side s) {
  switch (s) {
    case Side::Interior: return "interior";
    case Side::Pre: return "pre";
    case Side::Post: return "post";
  }
  return "interior";
}

std::vector<ReportPoint> report_schedule(double horizon, double every, const std::vector<ObservationEvent>& events) {
  Vec interior;
  const auto count = static_cast<std::size_t>(std::floor(horizon / every + 1e-9));
  for (std::size_t k = 0; k <= count; ++k) interior.push_back(std::min(horizon, static_cast<double>(k) * every));
  if (std::abs(interior.back() - horizon) > 1e-9 * std::max(1.0, horizon)) interior.push_back(horizon);

  std::vector<ReportPoint> out;
  std::size_t e = 0;
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); };
  for (double t : interior) {
    while (e < events.size() && events[e].time < t && !near(events[e].time, t)) {
      out.push_back({events[e].time, Side::Pre, static_cast<int>(e)});
      out.push_back({events[e].time, Side::Post, static_cast<int>(e)});
      ++e;
    }
    if (e < events.size() && near(events[e].time, t)) continue;  // the pair below replaces it
    out.push_back({t, Side::Interior, -1});
  }
  for (; e < events.size(); ++e) {
    out.push_back({events[e].time, Side::Pre, static_cast<int>(e)});
    out.push_back({events[e].time, Side::Post, static_cast<int>(e)});
  }
  return out;
}

std::optional<LinearModelParams> try_linear_params(const ValidatedScenario& scenario) {
  const auto& cfg = scenario.config();
  const auto& s = cfg.model;
  using TK = ComponentTransform::Kind;
  if (s.drift.transform.kind != TK::Identity || !s.diffusion.is_constant()) return std::nullopt;
  if (s.observation.transform.kind != TK::Identity) return std::nullopt;
  const auto km = static_cast<Eigen::Index>(s.m), kn = static_cast<Eigen::Index>(s.n);
  LinearModelParams p;
  p.m = s.m;
  p.n = s.n;
  p.dt = cfg.dt;
  p.drift = s.drift.matrix.eigen();
  p.drift_offset = to_eigen(s.drift.offset);
  p.diffusion = s.diffusion.constant.eigen();
  switch (s.jump.kind) {
    case JumpMap::Kind::None: p.loading = EMat::Zero(km, km); break;
    case JumpMap::Kind::Linear:
      if (!s.jump.loading.is_constant()) return std::nullopt;
      p.loading = s.jump.loading.constant.eigen();
      break;
    default: return std::nullopt;
  }
  const auto& law = s.jump_law;
  p.xi_mean = law.xi_mean.empty() ? EVec::Zero(km) : to_eigen(law.xi_mean);
  switch (law.kind) {
    case JumpLaw::Kind::GaussianProduct:
      p.q = law.q.eigen();
      p.r = law.r.eigen();
      break;
    case JumpLaw::Kind::DegenerateXiZero:
      p.q = EMat::Zero(km, km);
      p.r = law.r.eigen();
      break;
    case JumpLaw::Kind::GaussianJoint: {
      const EMat j = law.joint.eigen();
      if (!j.topRightCorner(km, kn).isZero(0.0)) return std::nullopt;
      p.q = j.topLeftCorner(km, km);
      p.r = j.bottomRightCorner(kn, kn);
      break;
    }
    default: return std::nullopt;
  }
  p.a = s.observation.a.eigen();
  p.c = s.observation.c.eigen();
  p.obs_offset = to_eigen(s.observation.offset);
  return p;
}

LinearModelParams linear_params(const ValidatedScenario& scenario) {
  auto p = try_linear_params(scenario);
  if (!p)
    fail(ErrorCode::IncompatibleMethod,
         "the Kalman filter needs affine drift, constant diffusion, additive Gaussian jumps and a linear observation");
  return *p;
}

GaussianBelief propagate(const GaussianBelief& belief, const LinearModelParams& params, double dt) {
  if (dt < 0.0) fail(ErrorCode::NegativeDt, "cannot propagate backwards in time");
  GaussianBelief out = belief;
  out.t = belief.t + dt;
  if (dt == 0.0) return out;
  if (params.m == 1) {
    const double f = params.drift(0, 0), u = params.drift_offset(0);
    const double s2 = params.diffusion(0, 0) * params.diffusion(0, 0);
    const double m = belief.m(0), p = belief.p(0, 0);
    if (f == 0.0) {
      out.m(0) = m + u * dt;
      out.p(0, 0) = p + s2 * dt;
    } else {
      // With lambda = -f: m_inf + (m - m_inf) e^{-lambda dt},
      // sigma^2 / (2 lambda) (1 - e^{-2 lambda dt}) + P e^{-2 lambda dt}.
      const double decay = std::exp(f * dt);
      const double m_inf = -u / f;
      out.m(0) = m_inf + (m - m_inf) * decay;
      out.p(0, 0) = s2 * std::expm1(2.0 * f * dt) / (2.0 * f) + p * decay * decay;
    }
    return out;
  }
  const EMat& f = params.drift;
  const EMat bb = params.diffusion * params.diffusion.transpose();
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(dt / params.dt - 1e-9)));
  const double h = dt / static_cast<double>(steps);
  auto dm = [&](const EVec& m) -> EVec { return f * m + params.drift_offset; };
  auto dp = [&](const EMat& p) -> EMat { return f * p + p * f.transpose() + bb; };
  EVec m = belief.m;
  EMat p = belief.p;
  for (std::size_t k = 0; k < steps; ++k) {
    const EVec m1 = dm(m), m2 = dm(m + 0.5 * h * m1), m3 = dm(m + 0.5 * h * m2), m4 = dm(m + h * m3);
    const EMat p1 = dp(p), p2 = dp(p + 0.5 * h * p1), p3 = dp(p + 0.5 * h * p2), p4 = dp(p + h * p3);
    m += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
    p += h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
  }
  out.m = m;
  out.p = symmetrize_clip(p);
  return out;
}

JumpUpdate jump_update(const GaussianBelief& prior, const Vec& dy, const Vec& y_pre, std::size_t jumps,
                       const LinearModelParams& params, Ordering ordering) {
  const EMat& a = params.a;
  const EVec jump_mean = params.loading * params.xi_mean * static_cast<double>(jumps);
  const EMat jump_cov = params.loading * params.q * params.loading.transpose() * static_cast<double>(jumps);
  EVec m = prior.m;
  EMat p = prior.p;
  if (ordering == Ordering::JumpThenObserve) {
    m += jump_mean;
    p += jump_cov;
  }
  JumpUpdate out;
  out.pred_mean = a * m - params.c * to_eigen(y_pre) + params.obs_offset;
  out.innovation = to_eigen(dy) - out.pred_mean;
  out.s = a * p * a.transpose() + params.r;
  out.s = 0.5 * (out.s + out.s.transpose());
  Eigen::LLT<EMat> llt(out.s);
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0))
    fail(ErrorCode::SingularS, "predictive observation covariance is singular");
  const EMat ap = a * p;
  out.gain = llt.solve(ap).transpose();
  m += out.gain * out.innovation;
  p -= out.gain * ap;
  if (ordering == Ordering::ObserveThenJump) {
    m += jump_mean;
    p += jump_cov;
  }
  const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
  p = symmetrize_clip(p, 1e-10 * scale);
  if (min_eigenvalue(p) < -1e-10 * scale) fail(ErrorCode::NumericalBlowup, "posterior covariance lost definiteness");
  out.belief = {m, p, prior.t};
  return out;
}

FilterTrajectory run_kalman(const ValidatedScenario& scenario, const std::vector<ObservationEvent>& events,
                            Ordering ordering) {
  const auto params = linear_params(scenario);
  const auto& cfg = scenario.config();
  const auto counts = jump_counts(cfg.schedule, events);
  const auto km = static_cast<Eigen::Index>(params.m);
  GaussianBelief b{to_eigen(cfg.model.x0), EMat::Zero(km, km), 0.0};
  FilterTrajectory out;
  for (const auto& at : report_schedule(cfg.horizon, cfg.filter.report_every, events)) {
    if (at.side == Side::Post) {
      const auto& e = events[static_cast<std::size_t>(at.event_index)];
      const auto upd = jump_update(b, e.dy, e.y_pre, counts[static_cast<std::size_t>(at.event_index)], params,
                                   ordering);
      out.predictive.push_back({upd.pred_mean, upd.s});
      b = upd.belief;
      b.t = e.time;
      out.post.push_back(b);
      out.rows.push_back({at, b.m, b.p, upd.innovation, upd.s, upd.gain});
      continue;
    }
    b = propagate(b, params, std::max(0.0, at.t - b.t));
    b.t = at.t;
    if (at.side == Side::Pre) out.pre.push_back(b);
    out.rows.push_back({at, b.m, b.p, {}, {}, {}});
  }
  return out;
}

}  // namespace pjf
