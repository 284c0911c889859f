#include "pjf/matrix.hpp"

#include <cmath>
#include <limits>

namespace pjf {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
  rows = init.size();
  cols = rows ? init.begin()->size() : 0;
  data.reserve(rows * cols);
  for (const auto& row : init)
    for (double v : row) data.push_back(v);
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_eigen(const EMat& m) {
  Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

bool Matrix::is_zero() const {
  for (double v : data)
    if (v != 0.0) return false;
  return true;
}

EMat Matrix::eigen() const {
  EMat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = (*this)(r, c);
  return m;
}

double min_eigenvalue(const EMat& m) {
  if (m.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  const EMat sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<EMat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

EMat psd_factor(const EMat& m) {
  if (m.size() == 0) return m;
  if (m.rows() == 1) return EMat::Constant(1, 1, std::sqrt(std::max(0.0, m(0, 0))));
  const EMat sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<EMat> es(sym);
  EVec s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal();
}

EMat symmetrize_clip(const EMat& m, double tol) {
  EMat sym = 0.5 * (m + m.transpose());
  if (sym.rows() == 1) {
    if (sym(0, 0) < 0.0 && sym(0, 0) >= -tol) sym(0, 0) = 0.0;
    return sym;
  }
  Eigen::SelfAdjointEigenSolver<EMat> es(sym);
  EVec ev = es.eigenvalues();
  bool clipped = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0 && ev(i) >= -tol) {
      ev(i) = 0.0;
      clipped = true;
    }
  }
  if (!clipped) return sym;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace pjf
