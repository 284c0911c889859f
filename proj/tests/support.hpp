#pragma once

#include "pjf/model.hpp"
#include "pjf/presets.hpp"

#include <cmath>
#include <vector>

namespace pjf::test {

struct Sample {
  double mean = 0.0;
  double var = 0.0;
  double se = 0.0;  // of the mean
  double var_se = 0.0;  // of the variance, normal-theory plus kurtosis
};

inline Sample summarize(const std::vector<double>& v) {
  Sample s;
  const double n = static_cast<double>(v.size());
  for (double x : v) s.mean += x;
  s.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - s.mean) * (x - s.mean);
    m2 += d;
    m4 += d * d;
  }
  s.var = m2 / (n - 1.0);
  s.se = std::sqrt(s.var / n);
  m4 /= n;
  s.var_se = std::sqrt(std::max(m4 - s.var * s.var, 0.0) / n);
  return s;
}

inline ValidatedScenario ou(OuParams p = {}) { return validate_or_throw(make_ou(p)); }

inline double ou_mean(double x0, double lambda, double t) { return x0 * std::exp(-lambda * t); }
inline double ou_var(double p0, double lambda, double sigma, double t) {
  return sigma * sigma / (2.0 * lambda) * (1.0 - std::exp(-2.0 * lambda * t)) + p0 * std::exp(-2.0 * lambda * t);
}

}  // namespace pjf::test
