#pragma once

#include "pjf/error.hpp"
#include "pjf/matrix.hpp"
#include "pjf/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pjf {

// ---------------------------------------------------------------------------
// Function catalogue. Every coefficient function of the model is one of these
// descriptors so that a scenario is plain data and serializes losslessly.
// ---------------------------------------------------------------------------

/// Scalar map applied componentwise before a linear combination.
struct ComponentTransform {
  enum class Kind { Identity, Polynomial, Exponential, Logarithm };

  Kind kind = Kind::Identity;
  std::vector<double> coeffs;  // polynomial: c0 + c1 u + c2 u^2 + ...
  double rate = 1.0;           // exponential: exp(rate * u)

  double apply(double u) const;

  bool operator==(const ComponentTransform&) const = default;
};

/// v(x) = matrix * g(x) + offset, with g applied componentwise.
/// Covers linear, affine, constant and polynomial/exponential drifts.
struct VectorMap {
  ComponentTransform transform;
  Matrix matrix;
  Vec offset;

  void eval(const double* x, double* out) const;
  double eval1(double x) const { return matrix.data[0] * transform.apply(x) + offset[0]; }
  bool is_affine() const { return transform.kind == ComponentTransform::Kind::Identity; }

  bool operator==(const VectorMap&) const = default;
};

/// B(x) = constant + diag(diagonal * g(x)); `diagonal` empty means constant.
/// Multiplicative noise beta*x is {constant = 0, diagonal = beta, identity}.
struct MatrixField {
  Matrix constant;
  Vec diagonal;
  ComponentTransform transform;

  void eval(const double* x, double* out) const;  // writes m*m row-major
  double eval1(double x) const {
    double v = constant.data[0];
    if (!diagonal.empty()) v += diagonal[0] * transform.apply(x);
    return v;
  }
  bool is_constant() const;

  bool operator==(const MatrixField&) const = default;
};

/// f(x, y) = A g(x) - C y + offset.
struct ObservationMap {
  ComponentTransform transform;
  Matrix a;
  Matrix c;
  Vec offset;

  void eval(const double* x, const double* y, double* out) const;
  double eval1(double x, double y) const {
    return a.data[0] * transform.apply(x) - c.data[0] * y + offset[0];
  }

  bool operator==(const ObservationMap&) const = default;
};

/// Signal jump applied at a predictable time: x <- x + increment(x, y_pre, xi).
struct JumpMap {
  enum class Kind {
    None,               // c == 0
    Linear,             // c(x) xi with c a MatrixField
    ExpMultiplicative,  // x * (exp(xi) - 1), keeps a positive signal positive
    LogLoss,            // log(1 - xi (1 + beta 1{y < y_bar})), scalar only
  };

  Kind kind = Kind::None;
  MatrixField loading;
  double beta = 0.0;
  double y_bar = 0.0;

  void apply(double* x, const double* y_pre, const double* xi, std::size_t m) const;
  double apply1(double x, double y_pre, double xi) const;

  bool operator==(const JumpMap&) const = default;
};

/// Joint law F_Z of the marks Z = (xi, eta).
struct JumpLaw {
  enum class Kind { GaussianProduct, GaussianJoint, Discrete, DegenerateXiZero, DiscreteXiGaussianEta };

  struct Atom {
    Vec xi;
    Vec eta;  // unused for DiscreteXiGaussianEta
    double prob = 0.0;
    bool operator==(const Atom&) const = default;
  };

  Kind kind = Kind::GaussianProduct;
  Matrix q;      // xi covariance (GaussianProduct)
  Matrix r;      // eta covariance (GaussianProduct, DegenerateXiZero, DiscreteXiGaussianEta)
  Matrix joint;  // (m+n) covariance, xi block first (GaussianJoint)
  Vec xi_mean;   // optional, Gaussian kinds; empty means zero
  std::vector<Atom> atoms;
  double match_tol = 1e-9;  // eta matching tolerance for Discrete

  bool eta_is_discrete() const { return kind == Kind::Discrete; }
  bool operator==(const JumpLaw&) const = default;
};

struct ModelSpec {
  std::size_t m = 1;
  std::size_t n = 1;
  Vec x0;
  VectorMap drift;
  MatrixField diffusion;
  JumpMap jump;
  ObservationMap observation;
  JumpLaw jump_law;

  bool operator==(const ModelSpec&) const = default;
};

/// Predictable-time mechanism.
///
/// Deterministic: events at the listed times, each carrying one signal jump.
/// Threshold: an observation at every grid time; after the observation at s_j
/// every threshold theta_i not yet triggered with Y_{s_j} <= theta_i fires and
/// applies one signal jump at s_j. Thresholds are listed in decreasing order
/// (theta_K first) and are compared against the first component of Y.
struct Schedule {
  enum class Kind { Deterministic, Threshold };

  Kind kind = Kind::Deterministic;
  Vec times;
  Vec grid;
  Vec thresholds;

  std::size_t max_jumps() const { return kind == Kind::Deterministic ? times.size() : thresholds.size(); }
  bool operator==(const Schedule&) const = default;
};

struct GridSettings {
  std::size_t nodes = 2000;
  std::optional<double> lo;
  std::optional<double> hi;
  double sd_span = 8.0;          // domain = pilot mean +- sd_span * pilot sd
  std::size_t xi_points = 400;   // quadrature nodes for non-Gaussian jump pushes

  bool operator==(const GridSettings&) const = default;
};

struct FilterSettings {
  std::size_t particles = 1000;
  double resample_threshold = 0.5;
  double report_every = 0.1;
  GridSettings grid;

  bool operator==(const FilterSettings&) const = default;
};

enum class Preset { OuKalman, Medical, CreditRisk, NjodeStyle, Custom };

std::string_view preset_name(Preset p);
std::optional<Preset> preset_from_name(std::string_view name);

struct ScenarioConfig {
  Preset preset = Preset::Custom;
  ModelSpec model;
  Schedule schedule;
  double horizon = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  FilterSettings filter;

  bool operator==(const ScenarioConfig&) const = default;
};

struct Violation {
  ErrorCode code;
  std::string message;
};

struct ValidationOutcome;
ValidationOutcome validate(const ScenarioConfig& config);

/// A scenario that passed validation. Only `validate` can construct one, so
/// every downstream operation can rely on the invariants it checks.
class ValidatedScenario {
 public:
  const ScenarioConfig& config() const { return config_; }
  const ModelSpec& model() const { return config_.model; }
  const Schedule& schedule() const { return config_.schedule; }

  bool operator==(const ValidatedScenario&) const = default;

 private:
  explicit ValidatedScenario(ScenarioConfig c) : config_(std::move(c)) {}
  friend ValidationOutcome validate(const ScenarioConfig& config);

  ScenarioConfig config_;
};

struct ValidationOutcome {
  std::optional<ValidatedScenario> scenario;
  std::vector<Violation> violations;

  bool ok() const { return scenario.has_value(); }
};

ValidationOutcome validate(const ScenarioConfig& config);

/// Throws Error carrying the first violation's code; the message lists all.
ValidatedScenario validate_or_throw(const ScenarioConfig& config);

// ---------------------------------------------------------------------------
// Laws derived from F_Z.
// ---------------------------------------------------------------------------

/// Sampleable, density-evaluable law over R^m (the xi part of a mark).
struct JumpDistribution {
  enum class Kind { PointMass, Gaussian, Discrete };

  Kind kind = Kind::PointMass;
  Vec mean;                // Gaussian mean or point-mass location
  EMat cov;                // Gaussian covariance
  EMat factor;             // factor * factor^T = cov
  std::vector<Vec> atoms;  // Discrete
  Vec probs;

  std::size_t dim() const { return mean.size(); }
  void sample(Rng& rng, double* out) const;
  /// Lebesgue density (Gaussian) or probability mass (PointMass, Discrete).
  double density(const double* xi) const;
  /// E[g(xi)]; tensor Gauss-Hermite of the given order per dimension for the
  /// Gaussian case, exact sums otherwise.
  double expect(const std::function<double(const double*)>& g, std::size_t order = 40) const;
};

/// Conditional law F_{xi|eta}(. | eta0).
JumpDistribution conditional_jump_law(const JumpLaw& law, std::size_t m, std::size_t n, const Vec& eta0);

/// xi-marginal of F_Z.
JumpDistribution xi_marginal(const JumpLaw& law, std::size_t m, std::size_t n);

/// Density of the eta-marginal F (probability mass for discrete laws).
class EtaDensity {
 public:
  EtaDensity(const JumpLaw& law, std::size_t n);

  double log_density(const double* eta) const;
  double density(const double* eta) const;
  bool has_atoms() const { return discrete_; }
  /// Mean and covariance of F.
  const EVec& mean() const { return mean_; }
  const EMat& cov() const { return cov_; }

 private:
  std::size_t n_;
  bool discrete_ = false;
  EMat precision_;
  double log_norm_ = 0.0;
  std::vector<Vec> atoms_;
  Vec probs_;
  double tol_ = 0.0;
  EVec mean_;
  EMat cov_;
};

/// Draws xi from F_{xi|eta}(. | eta) for many eta values without rebuilding
/// the conditional each time.
class ConditionalSampler {
 public:
  ConditionalSampler(const JumpLaw& law, std::size_t m, std::size_t n);

  /// Returns false when eta has zero conditional mass (discrete laws).
  bool sample(const double* eta, Rng& rng, double* xi) const;
  /// Conditional law as a distribution (for quadrature).
  JumpDistribution law(const double* eta) const;
  bool depends_on_eta() const { return depends_on_eta_; }

 private:
  const JumpLaw* law_;
  std::size_t m_;
  std::size_t n_;
  bool depends_on_eta_ = false;
  JumpDistribution fixed_;
  EMat gain_;  // GaussianJoint: cond mean = mu + gain * eta
  EVec mu_;
  EMat cond_factor_;
  EMat cond_cov_;
};

/// Draws full marks Z = (xi, eta) from F_Z.
class MarkSampler {
 public:
  MarkSampler(const JumpLaw& law, std::size_t m, std::size_t n);
  void sample(Rng& rng, double* xi, double* eta) const;

 private:
  const JumpLaw* law_;
  std::size_t m_;
  std::size_t n_;
  EMat xi_factor_;
  EMat eta_factor_;
  EMat joint_factor_;
  EVec xi_mean_;
  Vec cumulative_;
};

/// True when the model is scalar in both signal and observation.
inline bool is_one_dimensional(const ModelSpec& m) { return m.m == 1 && m.n == 1; }

}  // namespace pjf
