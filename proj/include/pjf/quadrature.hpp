#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace pjf {

/// Probabilists' Gauss-Hermite rule: nodes and weights for E[g(Z)], Z ~ N(0,1).
/// Weights sum to one.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch construction; results are cached per order (thread-safe).
const GaussHermiteRule& gauss_hermite(std::size_t order);

/// E[g(Y)] for Y ~ N(mean, var) by an `order`-point rule.
double gaussian_expectation(const std::function<double(double)>& g, double mean, double var, std::size_t order);

/// Integral of exp(log_h(y)) dy over the real line, with the Gauss-Hermite rule
/// anchored at the Laplace approximation of log_h (mode by Newton iteration on
/// finite-difference derivatives starting at `guess`, scale from the curvature).
/// Exact to rounding when exp(log_h) is Gaussian.
double laplace_gauss_hermite(const std::function<double(double)>& log_h, double guess, double scale_guess,
                             std::size_t order);

/// Normal density and log-density helpers.
double normal_pdf(double x, double mean, double var);
double normal_log_pdf(double x, double mean, double var);

}  // namespace pjf
