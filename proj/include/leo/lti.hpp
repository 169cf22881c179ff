#pragma once

#include <cstddef>

#include "leo/linalg.hpp"
#include "leo/rng.hpp"

namespace leo {

/// Time series stored column-wise: column k holds the sample at time k.
using Signal = Matrix;

/// System matrices of x_{k+1} = A x_k + B u_k, y_k = C x_k.
struct LtiParams {
  Matrix A;  // n x n
  Matrix B;  // n x p
  Matrix C;  // q x n

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index p() const { return B.cols(); }
  Eigen::Index q() const { return C.rows(); }

  void validate() const {
    require_square(A, "LtiParams.A");
    if (B.rows() != n()) throw ShapeError("LtiParams.B: row count must equal n");
    if (C.cols() != n()) throw ShapeError("LtiParams.C: column count must equal n");
    if (p() > n()) throw ShapeError("LtiParams: input dimension p must not exceed n");
    if (q() < 1) throw ShapeError("LtiParams: need at least one output");
    if (!all_finite(A) || !all_finite(B) || !all_finite(C)) throw DomainError("LtiParams: non-finite entry");
  }
};

/// Hidden ground truth of one trial: the real matrices, their perturbations and the real initial state.
struct TrueSystem {
  LtiParams real;
  Matrix delta_A;
  Matrix delta_B;
  Matrix delta_C;
  Vector x0_real;

  /// Parameters available to the designer: real minus perturbation.
  LtiParams nominal() const { return {real.A - delta_A, real.B - delta_B, real.C - delta_C}; }
};

/// Process noise w (n x T, or wider) and measurement noise v (q x T+1, or wider).
struct NoiseRealization {
  Signal w;
  Signal v;

  static NoiseRealization zero(Eigen::Index n, Eigen::Index q, Eigen::Index horizon) {
    return {Signal::Zero(n, horizon + 1), Signal::Zero(q, horizon + 1)};
  }
};

/// Inputs u_0..u_{T-1}, states x_0..x_T and outputs y_0..y_T.
struct Trajectory {
  Signal inputs;
  Signal states;
  Signal outputs;

  Eigen::Index horizon() const { return states.cols() - 1; }
};

/// x_{k+1} = A x_k + B u_k + w_k, y_k = C x_k + v_k, driven from the real initial state.
inline Trajectory simulate_true(const TrueSystem& sys, const Signal& inputs, const NoiseRealization& noise,
                                Eigen::Index horizon) {
  const LtiParams& s = sys.real;
  s.validate();
  const Eigen::Index n = s.n();
  if (horizon < 0) throw DomainError("simulate_true: negative horizon");
  if (inputs.rows() != s.p() || inputs.cols() < horizon) throw ShapeError("simulate_true: inputs must be p x >=T");
  if (noise.w.rows() != n || noise.w.cols() < horizon) throw ShapeError("simulate_true: w must be n x >=T");
  if (noise.v.rows() != s.q() || noise.v.cols() < horizon + 1) throw ShapeError("simulate_true: v must be q x >=T+1");
  if (sys.x0_real.size() != n) throw ShapeError("simulate_true: x0 must have n entries");

  Trajectory traj{inputs.leftCols(horizon), Signal(n, horizon + 1), Signal(s.q(), horizon + 1)};
  traj.states.col(0) = sys.x0_real;
  for (Eigen::Index k = 0; k < horizon; ++k) {
    traj.states.col(k + 1) = s.A * traj.states.col(k) + s.B * inputs.col(k) + noise.w.col(k);
  }
  traj.outputs = s.C * traj.states + noise.v.leftCols(horizon + 1);
  return traj;
}

/// Noise-free simulation of arbitrary parameters from x0.
inline Trajectory simulate(const LtiParams& params, const Signal& inputs, const Vector& x0, Eigen::Index horizon) {
  TrueSystem sys{params, Matrix::Zero(params.n(), params.n()), Matrix::Zero(params.n(), params.p()),
                 Matrix::Zero(params.q(), params.n()), x0};
  return simulate_true(sys, inputs, NoiseRealization::zero(params.n(), params.q(), horizon), horizon);
}

/// Stack of C A^j for j = 0..N-1 (Nq x n).
inline Matrix observability_matrix(const Matrix& A, const Matrix& C, Eigen::Index blocks) {
  require_square(A, "observability_matrix.A");
  if (C.cols() != A.rows()) throw ShapeError("observability_matrix: C must have n columns");
  if (blocks < 1) throw DomainError("observability_matrix: need at least one block");
  const Eigen::Index q = C.rows();
  Matrix O(blocks * q, A.rows());
  Matrix block = C;
  for (Eigen::Index j = 0; j < blocks; ++j) {
    O.middleRows(j * q, q) = block;
    block = block * A;
  }
  return O;
}

inline bool is_observable(const Matrix& A, const Matrix& C) {
  return numerical_rank(observability_matrix(A, C, A.rows())) == A.rows();
}

struct GenConfig {
  double target_radius = 0.9;
  double perturbation_std = 0.05;
  double x0_std = 1.0;
  int max_resamples = 100;
};

/// Random stable, observable system with Gaussian parameter perturbations.
inline TrueSystem random_system(Eigen::Index n, Eigen::Index p, Eigen::Index q, RngStream& rng,
                                const GenConfig& cfg = {}) {
  if (n < 1 || p < 1 || q < 1 || p > n) throw DomainError("random_system: need 1 <= p <= n and q >= 1");

  Matrix A;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= cfg.max_resamples) throw GenerationError("random_system: could not draw a non-nilpotent A");
    A = rng.normal_matrix(n, n);
    const double rho = spectral_radius(A);
    if (rho > 1e-6) {
      A *= cfg.target_radius / rho;
      break;
    }
  }

  Matrix B, C;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= cfg.max_resamples) {
      throw GenerationError("random_system: no observable (A, C) after " + std::to_string(cfg.max_resamples) +
                            " resamples");
    }
    B = rng.normal_matrix(n, p);
    C = rng.normal_matrix(q, n);
    if (is_observable(A, C)) break;
  }

  TrueSystem sys;
  sys.real = {A, B, C};
  sys.delta_A = rng.normal_matrix(n, n, cfg.perturbation_std);
  sys.delta_B = rng.normal_matrix(n, p, cfg.perturbation_std);
  sys.delta_C = rng.normal_matrix(q, n, cfg.perturbation_std);
  sys.x0_real = rng.normal_vector(n, cfg.x0_std);
  return sys;
}

}  // namespace leo
