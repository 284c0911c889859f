#include "pjf/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace pjf {

namespace {

GaussHermiteRule build_rule(std::size_t order) {
  // Jacobi matrix of the monic probabilists' Hermite recurrence:
  // He_{k+1}(x) = x He_k(x) - k He_{k-1}(x).
  const auto n = static_cast<Eigen::Index>(order);
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) {
    const double off = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    rule.weights[i] = v * v;
    total += rule.weights[i];
  }
  for (double& w : rule.weights) w /= total;
  // Symmetrize: the exact rule is symmetric about zero.
  for (std::size_t i = 0; i < order / 2; ++i) {
    const std::size_t j = order - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

}  // namespace

const GaussHermiteRule& gauss_hermite(std::size_t order) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<GaussHermiteRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussHermiteRule>(build_rule(order));
  return *slot;
}

double gaussian_expectation(const std::function<double(double)>& g, double mean, double var, std::size_t order) {
  if (var <= 0.0) return g(mean);
  const auto& rule = gauss_hermite(order);
  const double sd = std::sqrt(var);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * g(mean + sd * rule.nodes[i]);
  return acc;
}

double laplace_gauss_hermite(const std::function<double(double)>& log_h, double guess, double scale_guess,
                             std::size_t order) {
  double mode = guess;
  double h = std::max(1e-6, 1e-3 * scale_guess);
  double curvature = -1.0 / (scale_guess * scale_guess);
  for (int it = 0; it < 60; ++it) {
    const double f0 = log_h(mode);
    const double fp = log_h(mode + h);
    const double fm = log_h(mode - h);
    const double d1 = (fp - fm) / (2.0 * h);
    const double d2 = (fp - 2.0 * f0 + fm) / (h * h);
    if (!(d2 < 0.0) || !std::isfinite(d2)) break;
    curvature = d2;
    const double step = -d1 / d2;
    mode += step;
    h = std::max(1e-7, 1e-3 / std::sqrt(-d2));
    if (std::abs(step) < 1e-13 * (1.0 + std::abs(mode))) break;
  }
  const double sd = 1.0 / std::sqrt(-curvature);
  const auto& rule = gauss_hermite(order);
  const double log_norm = std::log(sd) + 0.5 * std::log(2.0 * std::numbers::pi);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double z = rule.nodes[i];
    const double y = mode + sd * z;
    // h(y) / N(y; mode, sd^2)
    acc += rule.weights[i] * std::exp(log_h(y) + log_norm + 0.5 * z * z);
  }
  return acc;
}

double normal_pdf(double x, double mean, double var) { return std::exp(normal_log_pdf(x, mean, var)); }

double normal_log_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

}  // namespace pjf
