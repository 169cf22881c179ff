#pragma once

// Dense small-matrix helpers shared by every module. All routines target
// desk-scale problems (n <= 16) and favour robustness over speed.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leo/error.hpp"

namespace leo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

/// Relative singular-value cutoff used for numerical rank, pseudoinverse and conditioning.
inline constexpr double kRankTolerance = 1e-9;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(name) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

inline void require_square(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) {
    throw ShapeError(std::string(name) + ": matrix is not square (" + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ")");
  }
}

/// Induced 1-norm (maximum absolute column sum). For a column vector this is the vector 1-norm.
inline double norm1(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

/// Singular values in descending order.
inline Vector singular_values(const Matrix& m) {
  if (m.size() == 0) return Vector();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues();
}

inline double rank_cutoff(const Vector& sigma) {
  return sigma.size() == 0 ? 0.0 : kRankTolerance * sigma(0);
}

inline Eigen::Index numerical_rank(const Matrix& m) {
  const Vector sigma = singular_values(m);
  if (sigma.size() == 0 || sigma(0) == 0.0) return 0;
  const double cut = rank_cutoff(sigma);
  return static_cast<Eigen::Index>((sigma.array() > cut).count());
}

inline double smallest_singular_value(const Matrix& m) {
  const Vector sigma = singular_values(m);
  return sigma.size() == 0 ? 0.0 : sigma(sigma.size() - 1);
}

/// Moore-Penrose pseudoinverse via SVD, dropping singular values below the rank cutoff.
inline Matrix pinv(const Matrix& m) {
  if (!all_finite(m)) throw DomainError("pinv: matrix has non-finite entries");
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("pinv: SVD did not converge");
  const Vector& sigma = svd.singularValues();
  const double cut = rank_cutoff(sigma);
  Vector inv = Vector::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cut && sigma(i) > 0.0) inv(i) = 1.0 / sigma(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// sigma_max / sigma_min; +infinity when sigma_min falls below the rank cutoff.
inline double condition_number(const Matrix& m) {
  const Vector sigma = singular_values(m);
  if (sigma.size() == 0 || sigma(0) == 0.0) throw DomainError("condition_number: zero matrix");
  const double smin = sigma(sigma.size() - 1);
  if (smin <= rank_cutoff(sigma)) return std::numeric_limits<double>::infinity();
  return sigma(0) / smin;
}

/// Eigenvalues of a real square matrix (unsorted).
inline std::vector<Complex> eigenvalues(const Matrix& a) {
  require_square(a, "eigenvalues");
  if (a.rows() == 0) return {};
  if (!all_finite(a)) throw NumericalError("eigenvalues: matrix has non-finite entries");
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigenvalues: QR iteration did not converge within " +
                         std::to_string(solver.getMaxIterations() * a.rows()) + " iterations");
  }
  const auto ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

inline double spectral_radius(const Matrix& a) {
  double rho = 0.0;
  for (const Complex& l : eigenvalues(a)) rho = std::max(rho, std::abs(l));
  return rho;
}

inline bool is_schur(const Matrix& a) { return spectral_radius(a) < 1.0; }

/// Greedy bipartite match of two eigenvalue multisets; returns the largest paired distance.
/// Exact minimal matching is unnecessary at the tolerances used (1e-6 against separations >= 1e-2).
inline double spectrum_distance(std::vector<Complex> a, std::vector<Complex> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (const Complex& x : a) {
    auto it = std::min_element(b.begin(), b.end(),
                               [&](const Complex& l, const Complex& r) { return std::abs(l - x) < std::abs(r - x); });
    worst = std::max(worst, std::abs(*it - x));
    b.erase(it);
  }
  return worst;
}

}  // namespace leo
