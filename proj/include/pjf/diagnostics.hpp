#pragma once

#include "pjf/model.hpp"
#include "pjf/test_functions.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pjf {

/// How a report's pass flag follows from its numbers.
enum class CheckRule {
  WithinSE,      // |statistic| <= bound * se
  AbsTolerance,  // |statistic| <= bound
  Range,         // lower <= statistic <= upper
};

std::string_view rule_name(CheckRule r);

struct CheckReport {
  std::string name;
  double statistic = 0.0;
  double se = 0.0;
  CheckRule rule = CheckRule::AbsTolerance;
  double bound = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
  std::size_t n_paths = 0;
  std::size_t particles = 0;
  std::size_t order = 0;
  std::uint64_t seed = 0;
  bool negative_control = false;
};

/// Pass flag from the recorded numbers alone.
bool evaluate(const CheckReport& r);

/// Sets `pass` from the recorded numbers and returns the report.
CheckReport finalize(CheckReport r);

struct MartingaleOptions {
  Vec checkpoints{0.4, 0.9, 1.4, 2.0};
  std::size_t n_paths = 10000;
  std::uint64_t seed = 0;
  int threads = 1;
  bool drop_jump_term = false;  // negative control
};

/// M_t = phi(X_t) - phi(X_0) - int L phi(X_s) ds - sum A phi(X_{T-}) over
/// simulated paths. One report per checkpoint (|mean| <= 3 SE) plus one per
/// consecutive checkpoint pair for the regression of increments on
/// [1, X_s, phi(X_s)] (Wald statistic against the chi-square 99.9% point).
std::vector<CheckReport> check_martingale(const ValidatedScenario& scenario, const TestFunction& phi,
                                          const MartingaleOptions& options);

struct KsResidualOptions {
  std::size_t n_runs = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-3;
  std::size_t order = 80;  // quadrature for the predictive integral
  bool drop_jump_term = false;  // negative control
};

/// Filter-equation residuals on the grid oracle (scalar scenarios only): the
/// h^2 ratio of the interior residual on a jump-free stretch, and the largest
/// jump residual over `n_runs` simulated observation records.
std::vector<CheckReport> check_ks_residual(const ValidatedScenario& scenario, const TestFunction& phi,
                                           const KsResidualOptions& options);

struct ZakaiOptions {
  std::size_t n_runs = 20;       // quadrature and mass-ratio runs
  std::size_t particles = 100000;
  std::size_t ratio_runs = 20;   // particle runs for the mass ratio
  std::size_t reference_paths = 10000;
  std::uint64_t seed = 0;
  int threads = 1;
  double variance_scale = 1.0;   // != 1 corrupts the predictive law (negative control)
};

/// Unnormalized-filter structure on a linear-Gaussian scenario:
/// (a) int (e^Gamma - 1) dF^i = 0 per event, (b) rho(1) jump ratio equals
/// e^-Gamma (pooled over runs, per event index), (c) the martingale part of the
/// unnormalized equation has mean zero under the reference measure.
std::vector<CheckReport> check_zakai(const ValidatedScenario& scenario, const TestFunction& phi,
                                     const ZakaiOptions& options);

struct CompensatorOptions {
  std::size_t n_paths = 10000;
  std::uint64_t seed = 0;
  int threads = 1;
  double variance_scale = 1.0;  // negative control
};

/// E[(W * mu)] against E[(W * nu)] for W in {1, y, y^2, 1{t <= T_1} y}.
std::vector<CheckReport> check_compensator(const ValidatedScenario& scenario, const CompensatorOptions& options);

/// JSON array of reports.
std::string reports_to_json(const std::vector<CheckReport>& reports);
/// Fixed-width table for terminals.
std::string reports_to_table(const std::vector<CheckReport>& reports);

}  // namespace pjf
