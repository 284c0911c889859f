#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace pjf {

using Vec = std::vector<double>;
using EMat = Eigen::MatrixXd;
using EVec = Eigen::VectorXd;

/// Dense row-major matrix with value semantics and exact equality. Used for
/// every serialized parameter so that configs round-trip bit for bit; the
/// numerics convert to Eigen at the point of use.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> init);

  static Matrix identity(std::size_t n);
  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix from_eigen(const EMat& m);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool empty() const { return data.empty(); }
  bool is_square() const { return rows == cols; }
  bool is_zero() const;

  EMat eigen() const;

  bool operator==(const Matrix&) const = default;
};

inline EVec to_eigen(const Vec& v) { return Eigen::Map<const EVec>(v.data(), static_cast<Eigen::Index>(v.size())); }
inline Vec from_eigen(const EVec& v) { return Vec(v.data(), v.data() + v.size()); }

/// Smallest eigenvalue of the symmetric part; NaN for an empty matrix.
double min_eigenvalue(const EMat& m);

/// Symmetric square root factor F with F F^T = m, for PSD m (negative
/// eigenvalues are clipped to zero).
EMat psd_factor(const EMat& m);

/// Symmetrizes and clips eigenvalues in [-tol, 0) to zero. Eigenvalues below
/// -tol are left in place so that callers can detect them.
EMat symmetrize_clip(const EMat& m, double tol = 1e-10);

}  // namespace pjf
