#pragma once

#include "pjf/model.hpp"
#include "pjf/simulate.hpp"

#include <optional>
#include <vector>

namespace pjf {

/// Where an output row sits relative to the observation events.
enum class Side { Interior, Pre, Post };
std::string_view side_name(Side s);

struct ReportPoint {
  double t = 0.0;
  Side side = Side::Interior;
  int event_index = -1;
};

/// Rows shared by every filter: interior rows at k * every on [0, horizon]
/// (plus the horizon itself), and a pre/post pair at each event. An interior
/// row that coincides with an event time is replaced by the pair.
std::vector<ReportPoint> report_schedule(double horizon, double every, const std::vector<ObservationEvent>& events);

struct GaussianBelief {
  EVec m;
  EMat p;
  double t = 0.0;
};

/// Linear-Gaussian model dX = (F X + u) dt + B dW, jumps X += G xi with
/// xi ~ N(mu, Q), observation increment dY = A X - C Y + d + eta, eta ~ N(0, R).
struct LinearModelParams {
  std::size_t m = 1;
  std::size_t n = 1;
  EMat drift;
  EVec drift_offset;
  EMat diffusion;
  EMat loading;
  EVec xi_mean;
  EMat q;
  EMat a;
  EMat c;
  EVec obs_offset;
  EMat r;
  double dt = 1e-3;  // RK4 step for the matrix moment ODEs
};

/// Extracts the linear-Gaussian parameters or throws IncompatibleMethod.
LinearModelParams linear_params(const ValidatedScenario& scenario);
std::optional<LinearModelParams> try_linear_params(const ValidatedScenario& scenario);

enum class Ordering { ObserveThenJump, JumpThenObserve };

/// Moments of the jump-free dynamics over dt. Scalar models use the closed
/// form; larger ones integrate the mean and Lyapunov ODEs with RK4.
GaussianBelief propagate(const GaussianBelief& belief, const LinearModelParams& params, double dt);

struct JumpUpdate {
  GaussianBelief belief;
  EVec innovation;
  EMat gain;
  EMat s;          // predictive covariance of dY
  EVec pred_mean;  // predictive mean of dY
};

/// Bayes update at an event followed (or preceded, per `ordering`) by
/// `jumps` independent signal jumps.
JumpUpdate jump_update(const GaussianBelief& prior, const Vec& dy, const Vec& y_pre, std::size_t jumps,
                       const LinearModelParams& params, Ordering ordering = Ordering::ObserveThenJump);

struct KalmanRow {
  ReportPoint at;
  EVec m;
  EMat p;
  EVec v;  // post rows only
  EMat s;
  EMat k;
};

struct PredictiveLaw {
  EVec mean;
  EMat cov;
};

struct FilterTrajectory {
  std::vector<KalmanRow> rows;
  std::vector<PredictiveLaw> predictive;  // one per event
  std::vector<GaussianBelief> pre;        // beliefs just before each event
  std::vector<GaussianBelief> post;
};

FilterTrajectory run_kalman(const ValidatedScenario& scenario, const std::vector<ObservationEvent>& events,
                            Ordering ordering = Ordering::ObserveThenJump);

}  // namespace pjf
