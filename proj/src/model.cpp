#include "pjf/model.hpp"

#include "pjf/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace pjf {

double ComponentTransform::apply(double u) const {
  switch (kind) {
    case Kind::Identity: return u;
    case Kind::Polynomial: {
      double acc = 0.0;
      for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * u + *it;
      return acc;
    }
    case Kind::Exponential: return std::exp(rate * u);
    case Kind::Logarithm: return std::log(u);
  }
  return u;
}

void VectorMap::eval(const double* x, double* out) const {
  const std::size_t r = matrix.rows, c = matrix.cols;
  for (std::size_t i = 0; i < r; ++i) {
    double acc = offset.empty() ? 0.0 : offset[i];
    for (std::size_t j = 0; j < c; ++j) acc += matrix(i, j) * transform.apply(x[j]);
    out[i] = acc;
  }
}

void MatrixField::eval(const double* x, double* out) const {
  const std::size_t m = constant.rows;
  std::copy(constant.data.begin(), constant.data.end(), out);
  if (!diagonal.empty())
    for (std::size_t i = 0; i < m; ++i) out[i * m + i] += diagonal[i] * transform.apply(x[i]);
}

bool MatrixField::is_constant() const {
  return std::all_of(diagonal.begin(), diagonal.end(), [](double d) { return d == 0.0; });
}

void ObservationMap::eval(const double* x, const double* y, double* out) const {
  const std::size_t n = a.rows, m = a.cols;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = offset.empty() ? 0.0 : offset[i];
    for (std::size_t j = 0; j < m; ++j) acc += a(i, j) * transform.apply(x[j]);
    for (std::size_t j = 0; j < n; ++j) acc -= c(i, j) * y[j];
    out[i] = acc;
  }
}

void JumpMap::apply(double* x, const double* y_pre, const double* xi, std::size_t m) const {
  switch (kind) {
    case Kind::None: return;
    case Kind::Linear: {
      if (m == 1) {
        x[0] += loading.eval1(x[0]) * xi[0];
        return;
      }
      std::vector<double> c(m * m);
      loading.eval(x, c.data());
      std::vector<double> inc(m, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) inc[i] += c[i * m + j] * xi[j];
      for (std::size_t i = 0; i < m; ++i) x[i] += inc[i];
      return;
    }
    case Kind::ExpMultiplicative:
      for (std::size_t i = 0; i < m; ++i) x[i] *= std::exp(xi[i]);
      return;
    case Kind::LogLoss: x[0] = apply1(x[0], y_pre[0], xi[0]); return;
  }
}

double JumpMap::apply1(double x, double y_pre, double xi) const {
  switch (kind) {
    case Kind::None: return x;
    case Kind::Linear: return x + loading.eval1(x) * xi;
    case Kind::ExpMultiplicative: return x * std::exp(xi);
    case Kind::LogLoss: {
      const double amp = 1.0 + (y_pre < y_bar ? beta : 0.0);
      return x + std::log(1.0 - xi * amp);
    }
  }
  return x;
}

std::string_view preset_name(Preset p) {
  switch (p) {
    case Preset::OuKalman: return "ou_kalman";
    case Preset::Medical: return "medical";
    case Preset::CreditRisk: return "credit_risk";
    case Preset::NjodeStyle: return "njode_style";
    case Preset::Custom: return "custom";
  }
  return "custom";
}

std::optional<Preset> preset_from_name(std::string_view name) {
  for (Preset p : {Preset::OuKalman, Preset::Medical, Preset::CreditRisk, Preset::NjodeStyle, Preset::Custom})
    if (preset_name(p) == name) return p;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

class Checker {
 public:
  std::vector<Violation> violations;

  void add(ErrorCode code, std::string msg) { violations.push_back({code, std::move(msg)}); }

  bool shape(const Matrix& mat, std::size_t r, std::size_t c, const std::string& what) {
    if (mat.rows != r || mat.cols != c || mat.data.size() != r * c) {
      std::ostringstream os;
      os << what << " must be " << r << "x" << c << ", got " << mat.rows << "x" << mat.cols;
      add(ErrorCode::InvalidConfig, os.str());
      return false;
    }
    return finite(mat.data, what);
  }

  bool size(const Vec& v, std::size_t n, const std::string& what) {
    if (v.size() != n) {
      add(ErrorCode::InvalidConfig, what + " must have " + std::to_string(n) + " entries");
      return false;
    }
    return finite(v, what);
  }

  bool finite(const Vec& v, const std::string& what) {
    for (double d : v)
      if (!std::isfinite(d)) {
        add(ErrorCode::InvalidConfig, what + " contains a non-finite value");
        return false;
      }
    return true;
  }

  void covariance(const Matrix& mat, std::size_t dim, const std::string& what) {
    if (!shape(mat, dim, dim, what)) return;
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = i + 1; j < dim; ++j)
        if (std::abs(mat(i, j) - mat(j, i)) > 1e-12 * (1.0 + std::abs(mat(i, j)))) {
          add(ErrorCode::NonPSDCovariance, what + " is not symmetric");
          return;
        }
    const EMat e = mat.eigen();
    const double scale = std::max(1.0, e.cwiseAbs().maxCoeff());
    if (min_eigenvalue(e) < -1e-12 * scale) add(ErrorCode::NonPSDCovariance, what + " is not positive semidefinite");
  }

  void transform(const ComponentTransform& t, const std::string& what) {
    if (t.kind == ComponentTransform::Kind::Polynomial && t.coeffs.empty())
      add(ErrorCode::UnknownFunctionDescriptor, what + ": polynomial without coefficients");
    finite(t.coeffs, what + " coefficients");
    if (!std::isfinite(t.rate)) add(ErrorCode::InvalidConfig, what + ": non-finite rate");
  }
};

// Coarse validation grid: x0 with one coordinate moved at a time.
std::vector<Vec> validation_points(const Vec& x0) {
  std::vector<Vec> pts{x0};
  for (std::size_t k = 0; k < x0.size(); ++k) {
    const double s = 0.5 * std::max(1.0, std::abs(x0[k]));
    for (double d : {-1.0, -0.5, 0.5, 1.0}) {
      Vec p = x0;
      // Stay on the side of zero that x0 is on, so log-type maps remain defined.
      p[k] = x0[k] > 0.0 && x0[k] + d * s <= 0.0 ? x0[k] * (1.0 + 0.5 * d) : x0[k] + d * s;
      pts.push_back(std::move(p));
    }
  }
  return pts;
}

bool all_finite(const double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(v[i])) return false;
  return true;
}

void check_law(Checker& ck, const JumpLaw& law, std::size_t m, std::size_t n) {
  using K = JumpLaw::Kind;
  if (!law.xi_mean.empty()) ck.size(law.xi_mean, m, "jump_law.xi_mean");
  if (!(law.match_tol >= 0.0)) ck.add(ErrorCode::InvalidConfig, "jump_law.match_tol must be nonnegative");
  switch (law.kind) {
    case K::GaussianProduct:
      ck.covariance(law.q, m, "jump_law.Q");
      ck.covariance(law.r, n, "jump_law.R");
      break;
    case K::GaussianJoint: ck.covariance(law.joint, m + n, "jump_law.joint"); break;
    case K::DegenerateXiZero: ck.covariance(law.r, n, "jump_law.R"); break;
    case K::Discrete:
    case K::DiscreteXiGaussianEta: {
      if (law.kind == K::DiscreteXiGaussianEta) ck.covariance(law.r, n, "jump_law.R");
      if (law.atoms.empty()) {
        ck.add(ErrorCode::InvalidConfig, "discrete jump law without atoms");
        break;
      }
      double total = 0.0;
      for (std::size_t i = 0; i < law.atoms.size(); ++i) {
        const auto& a = law.atoms[i];
        const std::string tag = "jump_law.atoms[" + std::to_string(i) + "]";
        ck.size(a.xi, m, tag + ".xi");
        if (law.kind == K::Discrete) ck.size(a.eta, n, tag + ".eta");
        if (!(a.prob >= 0.0) || !std::isfinite(a.prob)) ck.add(ErrorCode::InvalidConfig, tag + ".prob must be >= 0");
        total += a.prob;
      }
      if (std::abs(total - 1.0) > 1e-12) ck.add(ErrorCode::InvalidConfig, "discrete probabilities must sum to 1");
      break;
    }
  }
}

void check_model(Checker& ck, const ModelSpec& s) {
  const std::size_t m = s.m, n = s.n;
  if (m < 1 || n < 1) {
    ck.add(ErrorCode::InvalidConfig, "dimensions m and n must be at least 1");
    return;
  }
  const std::size_t before = ck.violations.size();
  ck.size(s.x0, m, "x0");
  ck.transform(s.drift.transform, "drift");
  ck.shape(s.drift.matrix, m, m, "drift.matrix");
  ck.size(s.drift.offset, m, "drift.offset");
  ck.transform(s.diffusion.transform, "diffusion");
  ck.shape(s.diffusion.constant, m, m, "diffusion.constant");
  if (!s.diffusion.diagonal.empty()) ck.size(s.diffusion.diagonal, m, "diffusion.diagonal");
  ck.transform(s.observation.transform, "observation");
  ck.shape(s.observation.a, n, m, "observation.A");
  ck.shape(s.observation.c, n, n, "observation.C");
  ck.size(s.observation.offset, n, "observation.offset");
  switch (s.jump.kind) {
    case JumpMap::Kind::Linear:
      ck.transform(s.jump.loading.transform, "jump.loading");
      ck.shape(s.jump.loading.constant, m, m, "jump.loading.constant");
      if (!s.jump.loading.diagonal.empty()) ck.size(s.jump.loading.diagonal, m, "jump.loading.diagonal");
      break;
    case JumpMap::Kind::LogLoss:
      if (m != 1) ck.add(ErrorCode::InvalidConfig, "log-loss jump map requires a scalar signal");
      if (!(s.jump.beta >= 0.0) || !std::isfinite(s.jump.y_bar))
        ck.add(ErrorCode::InvalidConfig, "log-loss jump map needs beta >= 0 and a finite y_bar");
      break;
    default: break;
  }
  check_law(ck, s.jump_law, m, n);
  if (ck.violations.size() != before) return;

  if (s.jump.kind == JumpMap::Kind::LogLoss) {
    const double cap = 1.0 / (1.0 + s.jump.beta);
    auto check_xi = [&](double xi) {
      if (!(xi >= 0.0 && xi < cap))
        ck.add(ErrorCode::InvalidConfig, "log-loss jump map needs loss proportions in [0, 1/(1+beta))");
    };
    if (s.jump_law.kind == JumpLaw::Kind::Discrete || s.jump_law.kind == JumpLaw::Kind::DiscreteXiGaussianEta) {
      for (const auto& a : s.jump_law.atoms) check_xi(a.xi[0]);
    } else if (s.jump_law.kind != JumpLaw::Kind::DegenerateXiZero) {
      ck.add(ErrorCode::InvalidConfig, "log-loss jump map needs bounded (discrete) loss proportions");
    }
  }

  // Finiteness of every descriptor on the validation grid.
  std::vector<double> buf(std::max(m * m, n)), y(n, 0.0), xi(m, 0.0);
  if (!s.jump_law.xi_mean.empty()) xi = s.jump_law.xi_mean;
  std::vector<Vec> xis{xi};
  if (s.jump_law.kind == JumpLaw::Kind::Discrete || s.jump_law.kind == JumpLaw::Kind::DiscreteXiGaussianEta)
    for (const auto& a : s.jump_law.atoms) xis.push_back(a.xi);
  for (const Vec& p : validation_points(s.x0)) {
    s.drift.eval(p.data(), buf.data());
    if (!all_finite(buf.data(), m)) return ck.add(ErrorCode::NonFiniteFunction, "drift is not finite near x0");
    s.diffusion.eval(p.data(), buf.data());
    if (!all_finite(buf.data(), m * m)) return ck.add(ErrorCode::NonFiniteFunction, "diffusion is not finite near x0");
    s.observation.eval(p.data(), y.data(), buf.data());
    if (!all_finite(buf.data(), n)) return ck.add(ErrorCode::NonFiniteFunction, "observation map is not finite near x0");
    for (const Vec& z : xis) {
      Vec q = p;
      s.jump.apply(q.data(), y.data(), z.data(), m);
      if (!all_finite(q.data(), m)) return ck.add(ErrorCode::NonFiniteFunction, "jump map is not finite near x0");
    }
  }
}

void check_schedule(Checker& ck, const Schedule& sc, double horizon) {
  if (sc.kind == Schedule::Kind::Deterministic) {
    if (!ck.finite(sc.times, "schedule.times")) return;
    for (std::size_t i = 0; i < sc.times.size(); ++i) {
      if (sc.times[i] <= 0.0) return ck.add(ErrorCode::NonIncreasingTimes, "jump times must be positive");
      if (i > 0 && !(sc.times[i] > sc.times[i - 1]))
        return ck.add(ErrorCode::NonIncreasingTimes, "jump times must be strictly increasing");
    }
    if (!sc.times.empty() && sc.times.back() > horizon)
      ck.add(ErrorCode::HorizonTooShort, "horizon is shorter than the last jump time");
    return;
  }
  if (!ck.finite(sc.grid, "schedule.grid") || !ck.finite(sc.thresholds, "schedule.thresholds")) return;
  if (sc.thresholds.empty()) return ck.add(ErrorCode::InvalidSchedule, "threshold schedule without thresholds");
  if (sc.grid.empty()) return ck.add(ErrorCode::InvalidSchedule, "threshold schedule without observation grid");
  for (std::size_t i = 1; i < sc.thresholds.size(); ++i)
    if (!(sc.thresholds[i] < sc.thresholds[i - 1]))
      return ck.add(ErrorCode::InvalidSchedule, "thresholds must be strictly decreasing");
  if (sc.grid.front() < 0.0) return ck.add(ErrorCode::NonIncreasingTimes, "observation grid must start at or after 0");
  for (std::size_t i = 1; i < sc.grid.size(); ++i)
    if (!(sc.grid[i] > sc.grid[i - 1]))
      return ck.add(ErrorCode::NonIncreasingTimes, "observation grid must be strictly increasing");
  if (sc.grid.back() > horizon) ck.add(ErrorCode::HorizonTooShort, "horizon is shorter than the observation grid");
}

}  // namespace

ValidationOutcome validate(const ScenarioConfig& config) {
  Checker ck;
  if (!(config.dt > 0.0) || !std::isfinite(config.dt)) ck.add(ErrorCode::InvalidConfig, "dt must be positive");
  if (!(config.horizon > 0.0) || !std::isfinite(config.horizon))
    ck.add(ErrorCode::InvalidConfig, "horizon must be positive");
  if (config.filter.particles < 2) ck.add(ErrorCode::InvalidConfig, "particle count must be at least 2");
  if (!(config.filter.resample_threshold >= 0.0 && config.filter.resample_threshold <= 1.0))
    ck.add(ErrorCode::InvalidConfig, "resample threshold must lie in [0, 1]");
  if (!(config.filter.report_every > 0.0)) ck.add(ErrorCode::InvalidConfig, "report_every must be positive");
  const auto& g = config.filter.grid;
  if (g.nodes < 16) ck.add(ErrorCode::InvalidConfig, "grid needs at least 16 nodes");
  if (g.lo.has_value() != g.hi.has_value() || (g.lo && !(*g.lo < *g.hi)))
    ck.add(ErrorCode::InvalidConfig, "grid bounds must be given together with lo < hi");
  if (!(g.sd_span > 0.0) || g.xi_points < 8) ck.add(ErrorCode::InvalidConfig, "invalid grid settings");
  check_model(ck, config.model);
  check_schedule(ck, config.schedule, config.horizon);

  ValidationOutcome out;
  out.violations = std::move(ck.violations);
  if (out.violations.empty()) out.scenario = ValidatedScenario(config);
  return out;
}

ValidatedScenario validate_or_throw(const ScenarioConfig& config) {
  auto outcome = validate(config);
  if (outcome.ok()) return std::move(*outcome.scenario);
  std::string msg;
  for (const auto& v : outcome.violations) {
    if (!msg.empty()) msg += "; " + std::string(to_string(v.code)) + ": ";
    msg += v.message;
  }
  throw Error(outcome.violations.front().code, msg);
}

// ---------------------------------------------------------------------------
// Laws
// ---------------------------------------------------------------------------

namespace {

JumpDistribution gaussian(EVec mean, EMat cov) {
  JumpDistribution d;
  d.kind = cov.isZero(0.0) ? JumpDistribution::Kind::PointMass : JumpDistribution::Kind::Gaussian;
  d.mean = from_eigen(mean);
  d.factor = psd_factor(cov);
  d.cov = std::move(cov);
  return d;
}

JumpDistribution point_mass(Vec at) {
  JumpDistribution d;
  d.kind = JumpDistribution::Kind::PointMass;
  d.mean = std::move(at);
  return d;
}

EVec xi_mean_of(const JumpLaw& law, std::size_t m) {
  return law.xi_mean.empty() ? EVec::Zero(static_cast<Eigen::Index>(m)) : to_eigen(law.xi_mean);
}

bool matches(const Vec& a, const double* b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

std::size_t pick(const Vec& cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u * cumulative.back());
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

void JumpDistribution::sample(Rng& rng, double* out) const {
  const std::size_t m = dim();
  switch (kind) {
    case Kind::PointMass: std::copy(mean.begin(), mean.end(), out); return;
    case Kind::Gaussian: {
      if (m == 1) {
        out[0] = mean[0] + factor(0, 0) * rng.normal();
        return;
      }
      EVec z(static_cast<Eigen::Index>(m));
      for (std::size_t i = 0; i < m; ++i) z(i) = rng.normal();
      const EVec x = factor * z;
      for (std::size_t i = 0; i < m; ++i) out[i] = mean[i] + x(i);
      return;
    }
    case Kind::Discrete: {
      Vec cum(probs.size());
      double acc = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) cum[i] = acc += probs[i];
      const auto& a = atoms[pick(cum, rng.uniform())];
      std::copy(a.begin(), a.end(), out);
      return;
    }
  }
}

double JumpDistribution::density(const double* xi) const {
  switch (kind) {
    case Kind::PointMass: return matches(mean, xi, 0.0) ? 1.0 : 0.0;
    case Kind::Gaussian: {
      const auto k = static_cast<Eigen::Index>(dim());
      EVec d(k);
      for (Eigen::Index i = 0; i < k; ++i) d(i) = xi[i] - mean[i];
      Eigen::LDLT<EMat> ldlt(cov);
      const double quad = d.dot(ldlt.solve(d));
      const double logdet = ldlt.vectorD().array().log().sum();
      return std::exp(-0.5 * (quad + logdet + static_cast<double>(k) * std::log(2.0 * std::numbers::pi)));
    }
    case Kind::Discrete: {
      double p = 0.0;
      for (std::size_t i = 0; i < atoms.size(); ++i)
        if (matches(atoms[i], xi, 0.0)) p += probs[i];
      return p;
    }
  }
  return 0.0;
}

double JumpDistribution::expect(const std::function<double(const double*)>& g, std::size_t order) const {
  const std::size_t m = dim();
  switch (kind) {
    case Kind::PointMass: return g(mean.data());
    case Kind::Discrete: {
      double acc = 0.0;
      for (std::size_t i = 0; i < atoms.size(); ++i) acc += probs[i] * g(atoms[i].data());
      return acc;
    }
    case Kind::Gaussian: {
      const auto& rule = gauss_hermite(order);
      std::vector<std::size_t> idx(m, 0);
      EVec z(static_cast<Eigen::Index>(m));
      Vec x(m);
      double acc = 0.0;
      while (true) {
        double w = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
          z(i) = rule.nodes[idx[i]];
          w *= rule.weights[idx[i]];
        }
        const EVec dx = factor * z;
        for (std::size_t i = 0; i < m; ++i) x[i] = mean[i] + dx(i);
        acc += w * g(x.data());
        std::size_t k = 0;
        while (k < m && ++idx[k] == order) idx[k++] = 0;
        if (k == m) break;
      }
      return acc;
    }
  }
  return 0.0;
}

JumpDistribution conditional_jump_law(const JumpLaw& law, std::size_t m, std::size_t n, const Vec& eta0) {
  return ConditionalSampler(law, m, n).law(eta0.data());
}

JumpDistribution xi_marginal(const JumpLaw& law, std::size_t m, std::size_t n) {
  using K = JumpLaw::Kind;
  switch (law.kind) {
    case K::GaussianProduct: return gaussian(xi_mean_of(law, m), law.q.eigen());
    case K::GaussianJoint:
      return gaussian(xi_mean_of(law, m), law.joint.eigen().topLeftCorner(static_cast<Eigen::Index>(m),
                                                                           static_cast<Eigen::Index>(m)));
    case K::DegenerateXiZero: return point_mass(Vec(m, 0.0));
    case K::Discrete:
    case K::DiscreteXiGaussianEta: {
      JumpDistribution d;
      d.kind = JumpDistribution::Kind::Discrete;
      d.mean.assign(m, 0.0);
      for (const auto& a : law.atoms) {
        d.atoms.push_back(a.xi);
        d.probs.push_back(a.prob);
        for (std::size_t i = 0; i < m; ++i) d.mean[i] += a.prob * a.xi[i];
      }
      return d;
    }
  }
  (void)n;
  return point_mass(Vec(m, 0.0));
}

EtaDensity::EtaDensity(const JumpLaw& law, std::size_t n) : n_(n) {
  const auto k = static_cast<Eigen::Index>(n);
  if (law.kind == JumpLaw::Kind::Discrete) {
    discrete_ = true;
    tol_ = law.match_tol;
    mean_ = EVec::Zero(k);
    for (const auto& a : law.atoms) {
      atoms_.push_back(a.eta);
      probs_.push_back(a.prob);
      mean_ += a.prob * to_eigen(a.eta);
    }
    cov_ = EMat::Zero(k, k);
    for (const auto& a : law.atoms) {
      const EVec d = to_eigen(a.eta) - mean_;
      cov_ += a.prob * d * d.transpose();
    }
    return;
  }
  mean_ = EVec::Zero(k);
  if (law.kind == JumpLaw::Kind::GaussianJoint) {
    const auto m = law.joint.rows - n;
    cov_ = law.joint.eigen().bottomRightCorner(k, k);
    (void)m;
  } else {
    cov_ = law.r.eigen();
  }
  Eigen::LDLT<EMat> ldlt(cov_);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
    fail(ErrorCode::NonpositiveR, "observation noise covariance must be positive definite for a likelihood");
  precision_ = ldlt.solve(EMat::Identity(k, k));
  log_norm_ = -0.5 * (ldlt.vectorD().array().log().sum() + static_cast<double>(n) * std::log(2.0 * std::numbers::pi));
}

double EtaDensity::log_density(const double* eta) const {
  if (discrete_) {
    const double p = density(eta);
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
  }
  if (n_ == 1) return log_norm_ - 0.5 * precision_(0, 0) * eta[0] * eta[0];
  const EVec e = Eigen::Map<const EVec>(eta, static_cast<Eigen::Index>(n_));
  return log_norm_ - 0.5 * e.dot(precision_ * e);
}

double EtaDensity::density(const double* eta) const {
  if (!discrete_) return std::exp(log_density(eta));
  double p = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i)
    if (matches(atoms_[i], eta, tol_)) p += probs_[i];
  return p;
}

ConditionalSampler::ConditionalSampler(const JumpLaw& law, std::size_t m, std::size_t n) : law_(&law), m_(m), n_(n) {
  using K = JumpLaw::Kind;
  switch (law.kind) {
    case K::GaussianJoint: {
      const auto km = static_cast<Eigen::Index>(m), kn = static_cast<Eigen::Index>(n);
      const EMat joint = law.joint.eigen();
      const EMat sxx = joint.topLeftCorner(km, km);
      const EMat sxe = joint.topRightCorner(km, kn);
      const EMat see = joint.bottomRightCorner(kn, kn);
      gain_ = sxe * see.completeOrthogonalDecomposition().pseudoInverse();
      mu_ = xi_mean_of(law, m);
      cond_cov_ = symmetrize_clip(sxx - gain_ * sxe.transpose(), 1e-10 * std::max(1.0, sxx.cwiseAbs().maxCoeff()));
      cond_factor_ = psd_factor(cond_cov_);
      depends_on_eta_ = !gain_.isZero(0.0);
      if (!depends_on_eta_) fixed_ = gaussian(mu_, cond_cov_);
      break;
    }
    case K::Discrete: depends_on_eta_ = true; break;
    default: fixed_ = xi_marginal(law, m, n); break;
  }
}

JumpDistribution ConditionalSampler::law(const double* eta) const {
  if (!depends_on_eta_) return fixed_;
  if (law_->kind == JumpLaw::Kind::GaussianJoint) {
    const EVec e = Eigen::Map<const EVec>(eta, static_cast<Eigen::Index>(n_));
    return gaussian(mu_ + gain_ * e, cond_cov_);
  }
  JumpDistribution d;
  d.kind = JumpDistribution::Kind::Discrete;
  d.mean.assign(m_, 0.0);
  double total = 0.0;
  for (const auto& a : law_->atoms)
    if (a.prob > 0.0 && matches(a.eta, eta, law_->match_tol)) {
      d.atoms.push_back(a.xi);
      d.probs.push_back(a.prob);
      total += a.prob;
    }
  if (!(total > 0.0)) fail(ErrorCode::ZeroConditionalMass, "no jump-law atom is compatible with the observed noise");
  for (std::size_t i = 0; i < d.atoms.size(); ++i) {
    d.probs[i] /= total;
    for (std::size_t j = 0; j < m_; ++j) d.mean[j] += d.probs[i] * d.atoms[i][j];
  }
  return d;
}

bool ConditionalSampler::sample(const double* eta, Rng& rng, double* xi) const {
  if (!depends_on_eta_) {
    fixed_.sample(rng, xi);
    return true;
  }
  if (law_->kind == JumpLaw::Kind::GaussianJoint) {
    const EVec e = Eigen::Map<const EVec>(eta, static_cast<Eigen::Index>(n_));
    EVec z(static_cast<Eigen::Index>(m_));
    for (std::size_t i = 0; i < m_; ++i) z(i) = rng.normal();
    const EVec x = mu_ + gain_ * e + cond_factor_ * z;
    for (std::size_t i = 0; i < m_; ++i) xi[i] = x(i);
    return true;
  }
  double total = 0.0;
  for (const auto& a : law_->atoms)
    if (matches(a.eta, eta, law_->match_tol)) total += a.prob;
  if (!(total > 0.0)) return false;
  double u = rng.uniform() * total;
  const JumpLaw::Atom* chosen = nullptr;
  for (const auto& a : law_->atoms) {
    if (!matches(a.eta, eta, law_->match_tol) || a.prob <= 0.0) continue;
    chosen = &a;
    if (u < a.prob) break;
    u -= a.prob;
  }
  std::copy(chosen->xi.begin(), chosen->xi.end(), xi);
  return true;
}

MarkSampler::MarkSampler(const JumpLaw& law, std::size_t m, std::size_t n) : law_(&law), m_(m), n_(n) {
  using K = JumpLaw::Kind;
  xi_mean_ = xi_mean_of(law, m);
  switch (law.kind) {
    case K::GaussianProduct:
      xi_factor_ = psd_factor(law.q.eigen());
      eta_factor_ = psd_factor(law.r.eigen());
      break;
    case K::GaussianJoint: joint_factor_ = psd_factor(law.joint.eigen()); break;
    case K::DegenerateXiZero: eta_factor_ = psd_factor(law.r.eigen()); break;
    case K::DiscreteXiGaussianEta: eta_factor_ = psd_factor(law.r.eigen()); [[fallthrough]];
    case K::Discrete: {
      double acc = 0.0;
      for (const auto& a : law.atoms) cumulative_.push_back(acc += a.prob);
      break;
    }
  }
}

void MarkSampler::sample(Rng& rng, double* xi, double* eta) const {
  using K = JumpLaw::Kind;
  auto gauss = [&](const EMat& factor, std::size_t k, double* out, const double* shift) {
    if (k == 1) {
      out[0] = (shift ? shift[0] : 0.0) + factor(0, 0) * rng.normal();
      return;
    }
    EVec z(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) z(i) = rng.normal();
    const EVec v = factor * z;
    for (std::size_t i = 0; i < k; ++i) out[i] = (shift ? shift[i] : 0.0) + v(i);
  };
  switch (law_->kind) {
    case K::GaussianProduct:
      gauss(xi_factor_, m_, xi, xi_mean_.data());
      gauss(eta_factor_, n_, eta, nullptr);
      return;
    case K::GaussianJoint: {
      Vec z(m_ + n_);
      gauss(joint_factor_, m_ + n_, z.data(), nullptr);
      for (std::size_t i = 0; i < m_; ++i) xi[i] = xi_mean_(i) + z[i];
      for (std::size_t i = 0; i < n_; ++i) eta[i] = z[m_ + i];
      return;
    }
    case K::DegenerateXiZero:
      std::fill(xi, xi + m_, 0.0);
      gauss(eta_factor_, n_, eta, nullptr);
      return;
    case K::Discrete: {
      const auto& a = law_->atoms[pick(cumulative_, rng.uniform())];
      std::copy(a.xi.begin(), a.xi.end(), xi);
      std::copy(a.eta.begin(), a.eta.end(), eta);
      return;
    }
    case K::DiscreteXiGaussianEta: {
      const auto& a = law_->atoms[pick(cumulative_, rng.uniform())];
      std::copy(a.xi.begin(), a.xi.end(), xi);
      gauss(eta_factor_, n_, eta, nullptr);
      return;
    }
  }
}

}  // namespace pjf
