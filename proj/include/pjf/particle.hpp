#pragma once

#include "pjf/kalman_jump.hpp"
#include "pjf/model.hpp"
#include "pjf/simulate.hpp"
#include "pjf/test_functions.hpp"

#include <cstdint>
#include <vector>

namespace pjf {

enum class WeightMode { Normalized, Unnormalized };

/// Weighted particle cloud. Weights live in log space; in normalized mode they
/// sum to one, in unnormalized mode their sum is rho(1) and `log_mass` tracks
/// log rho(1). Each slot owns its own random stream, so results do not depend
/// on how particles are split across workers.
struct ParticleEnsemble {
  std::size_t size = 0;
  std::size_t m = 1;
  WeightMode mode = WeightMode::Normalized;
  Vec x;
  Vec log_w;
  double log_mass = 0.0;
  std::vector<Rng> rngs;
  Rng resample_rng;

  const double* at(std::size_t j) const { return x.data() + j * m; }
  double* at(std::size_t j) { return x.data() + j * m; }
};

/// N particles at x0 with equal weights 1/N (rho_0(1) = 1).
ParticleEnsemble make_ensemble(const ModelSpec& model, std::size_t n, WeightMode mode, std::uint64_t seed,
                               std::uint64_t run = 0);

/// Normalized weights (sum one) and their ESS = (sum w)^2 / sum w^2.
Vec normalized_weights(const ParticleEnsemble& e);
double effective_sample_size(const ParticleEnsemble& e);

/// Offspring indices for systematic resampling of normalized weights with
/// offset u in [0, 1).
std::vector<std::size_t> systematic_resample(const Vec& weights, double u);

struct ResampleRecord {
  int event_index = -1;
  double ess = 0.0;
  double threshold = 0.0;
  bool resampled = false;
};

/// Euler-Maruyama over dt in equal substeps no longer than `substep`.
void propagate(ParticleEnsemble& e, const ModelSpec& model, double dt, double substep, int threads = 1);

/// Resamples when ESS < threshold * N. Offspring carry equal weights that
/// preserve the total mass. Returns the trace entry.
ResampleRecord maybe_resample(ParticleEnsemble& e, double threshold, int event_index);

/// Exact Bayes reweighting by the noise density at dY - f(x, Y-), then
/// resampling check, then `jumps` signal jumps with xi drawn from the
/// conditional law given the implied noise.
ResampleRecord ks_update(ParticleEnsemble& e, const ObservationEvent& event, std::size_t jumps,
                         const ModelSpec& model, double threshold, int threads = 1);

/// Unnormalized update: weights times g(dY - f(x, Y-)) / g(dY), no
/// renormalization, then the same jump step.
ResampleRecord zakai_update(ParticleEnsemble& e, const ObservationEvent& event, std::size_t jumps,
                            const ModelSpec& model, double threshold, int threads = 1);

struct Estimate {
  double value = 0.0;
  double se = 0.0;  // sqrt(sum wbar^2 (phi - value)^2)
};

/// Weighted mean sum w phi / sum w (works in either mode).
Estimate weighted_mean(const ParticleEnsemble& e, const TestFunction& phi);

/// Unnormalized estimate rho(phi) = sum w phi.
double unnormalized_estimate(const ParticleEnsemble& e, const TestFunction& phi);

/// rho(phi) / rho(1); throws ZeroMass when rho(1) vanishes.
double kallianpur_striebel(const ParticleEnsemble& e, const TestFunction& phi);

/// Log-density ratio log(g_F(y) / g_{F^i}(y)) for the scalar linear-Gaussian
/// case, with pred_var = A^2 P_{T-} and pred_mean = A m_{T-} (less C Y-).
double gamma_gaussian(double pred_mean, double pred_var, double r, double y);

struct SummaryRow {
  ReportPoint at;
  std::string phi;
  double estimate = 0.0;
  double se = 0.0;
  double ess = 0.0;
  double log_rho1 = 0.0;
};

struct EventMass {
  double log_rho_pre = 0.0;
  double log_rho_post = 0.0;  // after reweighting, before jumps
  double ratio_se = 0.0;      // SE of the ratio of masses across the event
};

struct ParticleRun {
  std::vector<SummaryRow> rows;
  std::vector<ResampleRecord> trace;
  std::vector<EventMass> masses;
};

struct ParticleRunOptions {
  std::size_t particles = 1000;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::uint64_t run = 0;
  int threads = 1;
  /// Snapshot callback (t, side, ensemble) at every report point; optional.
  std::function<void(const ReportPoint&, const ParticleEnsemble&)> snapshot;
};

/// Runs the normalized (KS) or unnormalized (Zakai, reported through the
/// Kallianpur-Striebel ratio) filter over the events on the shared report
/// schedule, estimating each battery function.
ParticleRun run_particle_filter(const ValidatedScenario& scenario, const std::vector<ObservationEvent>& events,
                                WeightMode mode, const std::vector<TestFunctionPtr>& battery,
                                const ParticleRunOptions& options);

/// Zakai mode needs a Lebesgue noise density; discrete noise laws are
/// rejected with UnsupportedScenario.
void require_zakai_support(const ModelSpec& model);

}  // namespace pjf
