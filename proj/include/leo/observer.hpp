#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "leo/lti.hpp"

namespace leo {

/// Output-injection gain L (n x q) together with the poles it was designed for.
struct ObserverGain {
  Matrix L;
  std::vector<Complex> desired_poles;

  static ObserverGain zero(Eigen::Index n, Eigen::Index q) { return {Matrix::Zero(n, q), {}}; }
};

/// Change of state coordinates x -> T x.
struct CoordinateTransform {
  Matrix T;
  Matrix T_inv;

  static CoordinateTransform identity(Eigen::Index n) { return {Matrix::Identity(n, n), Matrix::Identity(n, n)}; }

  static CoordinateTransform from_matrix(const Matrix& t) {
    require_square(t, "CoordinateTransform");
    Eigen::FullPivLU<Matrix> lu(t);
    if (!lu.isInvertible() || smallest_singular_value(t) < 1e-12 * std::max(1.0, norm1(t))) {
      throw SingularMatrix("CoordinateTransform: matrix is not invertible");
    }
    return {t, lu.inverse()};
  }

  bool is_identity() const { return T.isIdentity(0.0); }

  /// Composition: first apply `inner`, then this.
  CoordinateTransform after(const CoordinateTransform& inner) const { return {T * inner.T, inner.T_inv * T_inv}; }
};

/// n poles evenly spaced on [0.1, 0.5].
inline std::vector<Complex> default_observer_poles(Eigen::Index n) {
  std::vector<Complex> poles;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    poles.emplace_back(0.1 + 0.4 * t, 0.0);
  }
  return poles;
}

namespace detail {

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Real block-upper-triangular matrix with the requested spectrum. Real poles become 1x1
/// blocks, conjugate pairs become [[a, b], [-b, a]]. Equal consecutive blocks are coupled
/// through an identity on the block superdiagonal so repeated poles yield a single Jordan chain.
inline Matrix real_pole_matrix(const std::vector<Complex>& poles) {
  constexpr double tol = 1e-12;
  std::vector<Complex> reals, uppers;
  std::vector<Complex> lowers;
  for (const Complex& p : poles) {
    if (std::abs(p.imag()) <= tol) reals.emplace_back(p.real(), 0.0);
    else if (p.imag() > 0) uppers.push_back(p);
    else lowers.push_back(p);
  }
  if (uppers.size() != lowers.size()) throw DomainError("desired poles are not closed under conjugation");
  for (const Complex& u : uppers) {
    auto it = std::find_if(lowers.begin(), lowers.end(), [&](const Complex& l) { return std::abs(l - std::conj(u)) <= 1e-9; });
    if (it == lowers.end()) throw DomainError("desired poles are not closed under conjugation");
    lowers.erase(it);
  }
  auto by_value = [](const Complex& a, const Complex& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  };
  std::sort(reals.begin(), reals.end(), by_value);
  std::sort(uppers.begin(), uppers.end(), by_value);

  const auto n = static_cast<Eigen::Index>(poles.size());
  Matrix F = Matrix::Zero(n, n);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < reals.size(); ++i, ++at) {
    F(at, at) = reals[i].real();
    if (i > 0 && std::abs(reals[i] - reals[i - 1]) <= tol) F(at - 1, at) = 1.0;
  }
  for (std::size_t i = 0; i < uppers.size(); ++i, at += 2) {
    const double a = uppers[i].real(), b = uppers[i].imag();
    F.block(at, at, 2, 2) << a, b, -b, a;
    if (i > 0 && std::abs(uppers[i] - uppers[i - 1]) <= tol) F.block(at - 2, at, 2, 2).setIdentity();
  }
  return F;
}

inline double min_cross_distance(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const Complex& x : a)
    for (const Complex& y : b) best = std::min(best, std::abs(x - y));
  return best;
}

/// Sylvester construction of L for spectra of A and F that are well separated.
inline Matrix place_disjoint(const Matrix& A, const Matrix& C, const std::vector<Complex>& desired) {
  const Eigen::Index n = A.rows(), q = C.rows();
  const Matrix F = real_pole_matrix(desired);
  const Matrix I = Matrix::Identity(n, n);
  // vec(A^T X - X F) = (I (x) A^T - F^T (x) I) vec(X)
  const Matrix K = kron(I, A.transpose()) - kron(F.transpose(), I);
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) throw SingularMatrix("pole placement: Sylvester operator is singular");

  RngStream rng(0x5EED0B5E7, static_cast<std::uint64_t>(n * 64 + q));
  Matrix best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 10; ++attempt) {
    const Matrix G = rng.normal_matrix(q, n);
    const Matrix rhs = C.transpose() * G;
    const Vector x = lu.solve(Eigen::Map<const Vector>(rhs.data(), rhs.size()));
    const Matrix X = Eigen::Map<const Matrix>(x.data(), n, n);
    if (!all_finite(X) || smallest_singular_value(X) < 1e-10 * std::max(1.0, X.norm())) continue;
    const Matrix L = (G * X.inverse()).transpose();
    if (!all_finite(L)) continue;
    const double err = spectrum_distance(eigenvalues(A - L * C), desired);
    if (err < best_err) {
      best_err = err;
      best = L;
    }
    if (best_err < 1e-10) break;
  }
  if (best.size() == 0) throw NumericalError("pole placement: Sylvester solution X singular for every trial G");
  if (!(best_err < 1e-6)) {
    throw NumericalError("pole placement: achieved spectrum deviates by " + std::to_string(best_err));
  }
  return best;
}

}  // namespace detail

/// Gain L such that eig(A - L C) equals `desired`. Uses the dual Sylvester construction
/// A^T X - X F = C^T G, L = (G X^{-1})^T, so any number of outputs is supported. When
/// eig(A) comes close to the requested spectrum the placement goes through an
/// intermediate spectrum first and the two gains are summed.
inline ObserverGain place_observer_poles(const Matrix& A, const Matrix& C, const std::vector<Complex>& desired) {
  require_square(A, "place_observer_poles.A");
  if (C.cols() != A.rows()) throw ShapeError("place_observer_poles: C must have n columns");
  if (static_cast<Eigen::Index>(desired.size()) != A.rows()) {
    throw DomainError("place_observer_poles: need exactly n desired poles");
  }
  for (const Complex& p : desired) {
    if (!(std::abs(p) < 1.0)) throw DomainError("place_observer_poles: desired poles must lie inside the unit disk");
  }
  if (!is_observable(A, C)) throw PolePlacementInfeasible("place_observer_poles: (A, C) is not observable");
  detail::real_pole_matrix(desired);  // conjugation check

  const Eigen::Index n = A.rows(), q = C.rows();
  const std::vector<Complex> open = eigenvalues(A);
  if (spectrum_distance(open, desired) < 1e-9) return {Matrix::Zero(n, q), desired};

  constexpr double separation = 1e-3;
  if (detail::min_cross_distance(open, desired) >= separation) {
    return {detail::place_disjoint(A, C, desired), desired};
  }

  for (int shift = 0; shift < 16; ++shift) {
    std::vector<Complex> staging;
    for (Eigen::Index i = 0; i < n; ++i) staging.emplace_back(-0.9 + 0.011 * shift + 0.11 * static_cast<double>(i), 0.0);
    if (detail::min_cross_distance(staging, open) < 1e-2 || detail::min_cross_distance(staging, desired) < 1e-2) continue;
    const Matrix L1 = detail::place_disjoint(A, C, staging);
    const Matrix L2 = detail::place_disjoint(A - L1 * C, C, desired);
    return {L1 + L2, desired};
  }
  throw NumericalError("place_observer_poles: no staging spectrum separated from both eig(A) and the target");
}

inline ObserverGain place_observer_poles(const Matrix& A, const Matrix& C) {
  return place_observer_poles(A, C, default_observer_poles(A.rows()));
}

namespace detail {

inline void check_rollout_shapes(const LtiParams& params, const Signal& inputs, Eigen::Index horizon,
                                 const Vector& x0_hat) {
  params.validate();
  if (horizon < 0) throw DomainError("observer: negative horizon");
  if (inputs.rows() != params.p() || inputs.cols() < horizon) throw ShapeError("observer: inputs must be p x >=T");
  if (x0_hat.size() != params.n()) throw ShapeError("observer: initial estimate must have n entries");
}

}  // namespace detail

/// x^_{k+1} = A x^_k + B u_k + L (y_k - C x^_k); outputs hold C x^_k.
inline Trajectory run_luenberger(const LtiParams& params, const ObserverGain& gain, const Signal& inputs,
                                 const Signal& measured, const Vector& x0_hat, Eigen::Index horizon) {
  detail::check_rollout_shapes(params, inputs, horizon, x0_hat);
  require_shape(gain.L, params.n(), params.q(), "observer gain");
  if (measured.rows() != params.q() || measured.cols() < horizon) {
    throw ShapeError("run_luenberger: measured outputs must be q x >=T");
  }
  const Matrix closed = params.A - gain.L * params.C;
  Trajectory est{inputs.leftCols(horizon), Signal(params.n(), horizon + 1), Signal()};
  est.states.col(0) = x0_hat;
  for (Eigen::Index k = 0; k < horizon; ++k) {
    est.states.col(k + 1) = closed * est.states.col(k) + params.B * inputs.col(k) + gain.L * measured.col(k);
  }
  est.outputs = params.C * est.states;
  return est;
}

/// Pure predictor x^_{k+1} = A x^_k + B u_k.
inline Trajectory run_open_loop(const LtiParams& params, const Signal& inputs, const Vector& x0_hat,
                                Eigen::Index horizon) {
  detail::check_rollout_shapes(params, inputs, horizon, x0_hat);
  Trajectory est{inputs.leftCols(horizon), Signal(params.n(), horizon + 1), Signal()};
  est.states.col(0) = x0_hat;
  for (Eigen::Index k = 0; k < horizon; ++k) {
    est.states.col(k + 1) = params.A * est.states.col(k) + params.B * inputs.col(k);
  }
  est.outputs = params.C * est.states;
  return est;
}

/// (T A T^{-1}, T B, C T^{-1}).
inline LtiParams apply_transform(const CoordinateTransform& t, const LtiParams& p) {
  return {t.T * p.A * t.T_inv, t.T * p.B, p.C * t.T_inv};
}

inline LtiParams invert_transform(const CoordinateTransform& t, const LtiParams& p) {
  return {t.T_inv * p.A * t.T, t.T_inv * p.B, p.C * t.T};
}

/// Similarity transform making the observability matrix well conditioned. With O = QR,
/// T = R maps O to O R^{-1} = Q, whose condition number is 1. Falls back to column
/// equilibration when R is numerically singular. Never returns a transform that
/// increases the condition number.
inline std::pair<CoordinateTransform, LtiParams> conditioning_transform(const LtiParams& params, double threshold) {
  params.validate();
  const Eigen::Index n = params.n();
  if (!is_observable(params.A, params.C)) throw PolePlacementInfeasible("conditioning_transform: pair is unobservable");
  const Matrix O = observability_matrix(params.A, params.C, n);
  const double original = condition_number(O);
  if (original <= threshold) return {CoordinateTransform::identity(n), params};

  auto try_matrix = [&](const Matrix& t) -> std::optional<std::pair<CoordinateTransform, LtiParams>> {
    try {
      CoordinateTransform ct = CoordinateTransform::from_matrix(t);
      if (!(condition_number(O * ct.T_inv) < original)) return std::nullopt;
      return std::make_pair(ct, apply_transform(ct, params));
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  Eigen::HouseholderQR<Matrix> qr(O);
  const Matrix R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  const Vector diag = R.diagonal().cwiseAbs();
  if (diag.minCoeff() > 1e-12 * diag.maxCoeff()) {
    if (auto out = try_matrix(R)) return *out;
  }
  Matrix balance = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) balance(j, j) = std::max(O.col(j).norm(), 1e-300);
  if (auto out = try_matrix(balance)) return *out;
  return {CoordinateTransform::identity(n), params};
}

}  // namespace leo
