#pragma once

#include "pjf/model.hpp"

#include <memory>
#include <string>
#include <vector>

namespace pjf {

/// Bounded C^2 test function with coded first and second derivatives.
class TestFunction {
 public:
  virtual ~TestFunction() = default;
  virtual std::string name() const = 0;
  virtual double value(const double* x) const = 0;
  virtual void gradient(const double* x, double* out) const = 0;
  virtual void hessian(const double* x, double* out) const = 0;  // m*m row-major
  std::size_t dim() const { return m_; }

 protected:
  explicit TestFunction(std::size_t m) : m_(m) {}
  std::size_t m_;
};

using TestFunctionPtr = std::shared_ptr<const TestFunction>;

/// tanh(alpha . x + beta)
TestFunctionPtr make_tanh(Vec alpha, double beta);
/// exp(-|x - center|^2 / scale)
TestFunctionPtr make_bump(Vec center, double scale);
/// p(x_k) * cutoff(x_k): equals the polynomial on [-limit, limit], then
/// tapers to zero by 2 * limit through a quintic smoothstep (C^2).
TestFunctionPtr make_clipped_polynomial(std::size_t m, std::size_t component, Vec coeffs, double limit,
                                        std::string name);
/// Clipped x_k; exact on [-limit, limit].
TestFunctionPtr make_clipped_identity(std::size_t m, std::size_t component = 0, double limit = 5.0);
/// phi == 1
TestFunctionPtr make_constant(std::size_t m);
/// alpha * f1 + f2
TestFunctionPtr make_combination(double alpha, TestFunctionPtr f1, TestFunctionPtr f2);

/// Default battery for an m-dimensional signal: tanh, bump, clipped identity.
std::vector<TestFunctionPtr> default_battery(std::size_t m);
/// Battery member by name ("tanh", "bump", "identity", "square", "one").
TestFunctionPtr battery_function(const std::string& name, std::size_t m);

/// Generator of the continuous part: a . grad phi + 1/2 tr(b b^T hess phi).
double generator_continuous(const TestFunction& phi, const ModelSpec& model, const double* x);

/// Jump operator: E_xi[phi(jump(x, y_pre, xi))] - phi(x), with xi drawn from
/// its marginal law (Gauss-Hermite for Gaussian laws, exact sums otherwise).
double generator_jump(const TestFunction& phi, const ModelSpec& model, const JumpDistribution& xi_law,
                      const double* x, const double* y_pre, std::size_t order = 40);

}  // namespace pjf
