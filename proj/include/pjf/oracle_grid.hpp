#pragma once

#include "pjf/kalman_jump.hpp"
#include "pjf/model.hpp"
#include "pjf/simulate.hpp"
#include "pjf/test_functions.hpp"

#include <vector>

namespace pjf {

/// Density values on a uniform grid over [lo, hi]; integrals by trapezoid.
struct GridDensity {
  double lo = 0.0;
  double hi = 1.0;
  Vec p;
  double t = 0.0;

  std::size_t nodes() const { return p.size(); }
  double dx() const { return (hi - lo) / static_cast<double>(p.size() - 1); }
  double node(std::size_t i) const { return lo + static_cast<double>(i) * dx(); }
};

/// Gaussian N(mean, sd^2) sampled on the grid and normalized.
GridDensity gaussian_density(double lo, double hi, std::size_t nodes, double mean, double sd);

double grid_mass(const GridDensity& d);
/// Trapezoidal integral of phi * p.
double grid_integral(const GridDensity& d, const std::function<double(double)>& g);
double grid_expectation(const GridDensity& d, const TestFunction& phi);

struct GridMoments {
  double mean = 0.0;
  double var = 0.0;
};
GridMoments grid_moments(const GridDensity& d);

/// Throws BoundaryLeak when the outer 2% of nodes on either side hold more
/// than 1e-6 of the mass.
void check_boundary(const GridDensity& d);

/// Chapman-Kolmogorov with one-step Euler Gaussian kernels; dt is split into
/// equal substeps no longer than `substep`. Renormalized afterwards.
GridDensity grid_propagate(const GridDensity& d, const ModelSpec& model, double dt, double substep);

/// Pointwise likelihood, renormalization, then `jumps` jump transforms with
/// xi drawn from its law conditional on the implied noise.
GridDensity grid_event_update(const GridDensity& d, const ObservationEvent& event, std::size_t jumps,
                              const ModelSpec& model, std::size_t xi_points = 400);

/// Innovation kernel at observed value y, in the form that makes the jump
/// term of the filter equation exact: E[phi(X_T) | F_{T-}, dY = y] - pi_{T-}(phi).
double grid_S_phi(const GridDensity& pre, const Vec& y_pre, std::size_t jumps, const ModelSpec& model,
                  const TestFunction& phi, double y);

/// E[phi(X_T) - phi(X_{T-}) | F_{T-}, dY = y], the jump of phi itself.
double grid_S_phi_increment(const GridDensity& pre, const Vec& y_pre, std::size_t jumps, const ModelSpec& model,
                            const TestFunction& phi, double y);

/// Predictive density of dY at y given the pre-event density.
double grid_predictive_density(const GridDensity& pre, const Vec& y_pre, const ModelSpec& model, double y);

/// Integral of grid_S_phi(y) against the predictive law of dY, by
/// Gauss-Hermite anchored at the predictive mean and variance.
double grid_S_nu_integral(const GridDensity& pre, const Vec& y_pre, std::size_t jumps, const ModelSpec& model,
                          const TestFunction& phi, std::size_t order = 60);

/// Jump operator averaged over the grid density.
double grid_jump_term(const GridDensity& pre, const Vec& y_pre, const ModelSpec& model, const TestFunction& phi);

/// Default domain: settings bounds if given, otherwise the envelope of
/// mean +- sd_span * sd over a pilot Monte Carlo run of the signal.
std::pair<double, double> choose_domain(const ValidatedScenario& scenario, std::size_t pilot_paths = 2000);

struct GridRow {
  ReportPoint at;
  double mean = 0.0;
  double var = 0.0;
  double mass = 0.0;
};

struct GridRun {
  std::vector<GridRow> rows;
  std::vector<GridDensity> pre;  // per event
  std::vector<GridDensity> post;
  std::vector<std::size_t> jumps;
  std::pair<double, double> domain;
};

/// Runs the grid filter on the shared report schedule. Requires m = n = 1.
GridRun run_grid(const ValidatedScenario& scenario, const std::vector<ObservationEvent>& events,
                 std::optional<std::pair<double, double>> domain = std::nullopt, bool keep_densities = true);

}  // namespace pjf
