#pragma once

#include "pjf/model.hpp"

namespace pjf {

/// Built-in scenario for a named preset (Custom is rejected).
ScenarioConfig make_preset(Preset preset);

/// Linear-Gaussian OU scenario with additive Gaussian jumps. Exposed for
/// tests that vary one parameter at a time.
struct OuParams {
  double lambda = 1.0;
  double sigma = 0.5;
  double a = 1.0;
  double c = 0.0;
  double q = 0.04;
  double r = 0.01;
  double x0 = 1.0;
  Vec times{0.5, 1.0, 1.5};
  double horizon = 2.0;
  double dt = 1e-3;
};

ScenarioConfig make_ou(const OuParams& p);

}  // namespace pjf
