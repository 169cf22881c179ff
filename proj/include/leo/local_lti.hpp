#pragma once

// Constructive counterparts of the local-matching results: an LTI model that reproduces a
// finite window of an LTV trajectory, the initial state that steers it onto a given state,
// an invertible nudge of a singular state matrix, and the initial-state gap bound for two
// realizations sharing the same input/output data.

#include "leo/lti.hpp"

namespace leo {

/// Consecutive samples x_K..x_{K+N-1}, their successors, inputs and outputs.
struct TrajectoryWindow {
  Matrix X;       // n x N
  Matrix X_next;  // n x N
  Matrix U;       // p x N
  Matrix Y;       // q x N
  Eigen::Index start = 0;

  Eigen::Index length() const { return X.cols(); }

  /// Slice [start, start + N) out of a simulated trajectory.
  static TrajectoryWindow from_trajectory(const Trajectory& traj, Eigen::Index start, Eigen::Index length) {
    if (start < 0 || length < 1 || start + length > traj.horizon()) {
      throw DomainError("TrajectoryWindow: window exceeds the trajectory");
    }
    return {traj.states.middleCols(start, length), traj.states.middleCols(start + 1, length),
            traj.inputs.middleCols(start, length), traj.outputs.middleCols(start, length), start};
  }
};

/// How the output matrix of the local fit is formed.
enum class OutputFit {
  pseudoinverse,  ///< C = Y X^+ (exact whenever X has full column rank)
  transpose,      ///< C = Y X^T; not a valid construction, kept for fault-injection checks
};

/// Local LTI match (A | B) = X_next [X; U]^+, C = Y X^+.
inline LtiParams fit_local_lti(const TrajectoryWindow& w, OutputFit output_fit = OutputFit::pseudoinverse) {
  const Eigen::Index n = w.X.rows(), N = w.length();
  if (w.X_next.rows() != n || w.X_next.cols() != N || w.U.cols() != N || w.Y.cols() != N) {
    throw ShapeError("fit_local_lti: window blocks have inconsistent column counts");
  }
  if (numerical_rank(w.X) < N) throw RankDeficient("fit_local_lti: state window lacks full column rank");

  const Eigen::Index p = w.U.rows();
  Matrix stacked(n + p, N);
  stacked << w.X, w.U;
  const Matrix AB = w.X_next * pinv(stacked);

  LtiParams out;
  out.A = AB.leftCols(n);
  out.B = AB.rightCols(p);
  out.C = output_fit == OutputFit::pseudoinverse ? Matrix(w.Y * pinv(w.X)) : Matrix(w.Y * w.X.transpose());
  return out;
}

/// Initial state x0 such that K steps of `params` under `inputs` end exactly at `target`.
/// Runs the recursion backwards, x_k = A^{-1}(x_{k+1} - B u_k).
inline Vector back_solve_initial_state(const LtiParams& params, const Signal& inputs, const Vector& target,
                                       Eigen::Index steps) {
  params.validate();
  if (steps < 0) throw DomainError("back_solve_initial_state: negative horizon");
  if (target.size() != params.n()) throw ShapeError("back_solve_initial_state: target must have n entries");
  if (steps == 0) return target;
  if (inputs.rows() != params.p() || inputs.cols() < steps) throw ShapeError("back_solve_initial_state: inputs");
  if (smallest_singular_value(params.A) <= 1e-10) throw SingularMatrix("back_solve_initial_state: A is singular");

  const Eigen::PartialPivLU<Matrix> lu(params.A);
  Vector x = target;
  for (Eigen::Index k = steps - 1; k >= 0; --k) x = lu.solve(x - params.B * inputs.col(k));
  return x;
}

/// An invertible matrix within 1-norm distance `delta` of A; A itself when already invertible.
inline Matrix make_invertible(const Matrix& A, double delta) {
  require_square(A, "make_invertible");
  if (!(delta > 0.0)) throw DomainError("make_invertible: delta must be positive");
  constexpr double floor = 1e-10;
  const Eigen::Index n = A.rows();
  if (smallest_singular_value(A) > floor) return A;

  // The shift eps * I has 1-norm eps = delta / 2n.
  const double eps = delta / (2.0 * static_cast<double>(n));
  Matrix shifted = A + eps * Matrix::Identity(n, n);
  if (smallest_singular_value(shifted) > floor) return shifted;

  RngStream rng(0x1E77A1, static_cast<std::uint64_t>(n));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Matrix bump = rng.normal_matrix(n, n);
    bump *= 0.5 * delta / (2.0 * std::max(norm1(bump), 1e-300));  // 1-norm delta / 4
    shifted = A + bump;
    if (smallest_singular_value(shifted) > floor) return shifted;
  }
  throw NumericalError("make_invertible: random perturbations failed to reach an invertible matrix");
}

/// Observability stack O_N and block lower-triangular impulse operator Gamma_N.
struct StackedOperators {
  Matrix O;      // Nq x n
  Matrix Gamma;  // Nq x Np, block (i, j) = C A^{i-j-1} B for i > j
};

inline StackedOperators stacked_operators(const LtiParams& params, Eigen::Index blocks) {
  params.validate();
  if (blocks < 1) throw DomainError("stacked_operators: need at least one block");
  const Eigen::Index q = params.q(), p = params.p();
  StackedOperators ops{observability_matrix(params.A, params.C, blocks), Matrix::Zero(blocks * q, blocks * p)};
  // Markov parameters C A^m B, m = 0..N-2
  std::vector<Matrix> markov;
  Matrix power_b = params.B;
  for (Eigen::Index m = 0; m + 1 < blocks; ++m) {
    markov.push_back(params.C * power_b);
    power_b = params.A * power_b;
  }
  for (Eigen::Index i = 1; i < blocks; ++i)
    for (Eigen::Index j = 0; j < i; ++j) ops.Gamma.block(i * q, j * p, q, p) = markov[static_cast<std::size_t>(i - j - 1)];
  return ops;
}

/// Stack u_0..u_{N-1} into one column (Np entries).
inline Vector stack_inputs(const Signal& inputs, Eigen::Index blocks) {
  if (inputs.cols() < blocks) throw ShapeError("stack_inputs: not enough input samples");
  const Matrix head = inputs.leftCols(blocks);
  return Eigen::Map<const Vector>(head.data(), head.size());
}

/// Upper bound on ||x1_0 - x2_0||_1 for two systems producing identical outputs:
/// ||O1^+||_1 (||Gamma1 - Gamma2||_1 ||U||_1 + ||O1 - O2||_1 ||x2_0||_1).
inline double initial_state_gap_bound(const LtiParams& p1, const LtiParams& p2, const Vector& x2_0,
                                      const Vector& u_stack, Eigen::Index blocks) {
  const StackedOperators s1 = stacked_operators(p1, blocks);
  const StackedOperators s2 = stacked_operators(p2, blocks);
  if (s1.O.rows() != s2.O.rows() || s1.O.cols() != s2.O.cols() || s1.Gamma.cols() != s2.Gamma.cols()) {
    throw ShapeError("initial_state_gap_bound: systems have different dimensions");
  }
  if (u_stack.size() != s1.Gamma.cols()) throw ShapeError("initial_state_gap_bound: input stack must have Np entries");
  if (numerical_rank(s1.O) < p1.n()) throw RankDeficient("initial_state_gap_bound: O_N lacks full column rank");
  return norm1(pinv(s1.O)) * (norm1(s1.Gamma - s2.Gamma) * norm1(u_stack) + norm1(s1.O - s2.O) * norm1(x2_0));
}

}  // namespace leo
