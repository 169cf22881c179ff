#pragma once

// Refinement of nominal system matrices by gradient descent on the steady-state output
// discrepancy of an observer rollout.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "leo/observer.hpp"

namespace leo {

/// Trainable copy of (A, B, C) plus the observer's initial estimate.
struct LearnableParams {
  Matrix A;
  Matrix B;
  Matrix C;
  Vector x0;

  LtiParams system() const { return {A, B, C}; }

  static LearnableParams from(const LtiParams& sys, const Vector& x0) { return {sys.A, sys.B, sys.C, x0}; }

  static LearnableParams zeros_like(const LearnableParams& p) {
    return {Matrix::Zero(p.A.rows(), p.A.cols()), Matrix::Zero(p.B.rows(), p.B.cols()),
            Matrix::Zero(p.C.rows(), p.C.cols()), Vector::Zero(p.x0.size())};
  }

  bool all_finite() const { return A.allFinite() && B.allFinite() && C.allFinite() && x0.allFinite(); }
};

struct RegularizationWeights {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
};

/// Weights proportional to the entry count of each matrix, summing to 1e-3.
inline RegularizationWeights lambda_coefficients(Eigen::Index n, Eigen::Index p, Eigen::Index q) {
  if (n < 1 || p < 1 || q < 1) throw DomainError("lambda_coefficients: dimensions must be positive");
  const double nn = static_cast<double>(n * n), np = static_cast<double>(n * p), nq = static_cast<double>(n * q);
  const double total = nn + np + nq;
  return {1e-3 * nn / total, 1e-3 * np / total, 1e-3 * nq / total};
}

enum class RolloutMode { luenberger, open_loop };
enum class WeightDecayMode { decoupled, coupled };

struct TrainConfig {
  double lr0 = 1e-4;
  int epochs = 250;
  double decay_factor = 10.0;
  int decay_every = 200;
  double weight_decay = 1e-5;
  WeightDecayMode weight_decay_mode = WeightDecayMode::decoupled;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  Eigen::Index k0 = 201;
  Eigen::Index window = 50;
  /// Unset: derived from the dimensions by lambda_coefficients.
  std::optional<RegularizationWeights> lambdas;
  RolloutMode rollout_mode = RolloutMode::luenberger;
  bool conditioning = true;
  double conditioning_threshold = 1e8;
  /// Residuals with magnitude at or below this count as exact zeros (subgradient 0).
  double subgradient_zero_tol = 1e-12;
  /// Unset: default_observer_poles(n).
  std::optional<std::vector<Complex>> poles;

  /// Last time index touched by the loss window.
  Eigen::Index window_end() const { return k0 + window; }

  double learning_rate(int epoch) const {
    return lr0 * std::pow(decay_factor, -static_cast<double>(epoch / decay_every));
  }

  RegularizationWeights weights_for(Eigen::Index n, Eigen::Index p, Eigen::Index q) const {
    return lambdas ? *lambdas : lambda_coefficients(n, p, q);
  }

  std::vector<Complex> poles_for(Eigen::Index n) const { return poles ? *poles : default_observer_poles(n); }

  void validate() const {
    if (!(lr0 > 0.0) || !(decay_factor > 0.0) || decay_every < 1) throw DomainError("TrainConfig: rates must be positive");
    if (epochs < 0) throw DomainError("TrainConfig: negative epoch count");
    if (k0 < 0 || window < 1) throw DomainError("TrainConfig: invalid loss window");
    if (weight_decay < 0.0) throw DomainError("TrainConfig: negative weight decay");
  }
};

/// Components of the training objective.
struct LossBreakdown {
  double data_term = 0.0;
  double reg_A = 0.0;
  double reg_B = 0.0;
  double reg_C = 0.0;
  double total = 0.0;
};

/// Mean of |entries|.
inline double elementwise_mean_abs(const Matrix& m) {
  if (m.size() == 0) throw DomainError("elementwise_mean_abs: empty input");
  return m.cwiseAbs().mean();
}

namespace detail {

inline double subgradient_sign(double r, double zero_tol) {
  if (std::abs(r) <= zero_tol) return 0.0;
  return r > 0.0 ? 1.0 : -1.0;
}

inline Matrix subgradient_sign(const Matrix& m, double zero_tol) {
  return m.unaryExpr([zero_tol](double r) { return subgradient_sign(r, zero_tol); });
}

}  // namespace detail

/// Objective value and, when requested, its gradient with respect to every learnable tensor.
struct LossEvaluation {
  LossBreakdown loss;
  LearnableParams grad;
};

/// Rolls the observer from x0 up to the end of the loss window and differentiates the loss by
/// a backward (adjoint) pass over the affine recursion x_{k+1} = M x_k + B u_k + L y_k, with
/// M = A - L C (Luenberger) or M = A (open loop). The gain L is treated as a constant.
inline LossEvaluation evaluate_loss(const LearnableParams& params, const LearnableParams& anchor, const Matrix& L,
                                    const Signal& inputs, const Signal& measured, const TrainConfig& cfg,
                                    bool with_gradient = true) {
  const LtiParams sys = params.system();
  sys.validate();
  const Eigen::Index n = sys.n(), p = sys.p(), q = sys.q();
  require_shape(anchor.A, n, n, "anchor.A");
  require_shape(anchor.B, n, p, "anchor.B");
  require_shape(anchor.C, q, n, "anchor.C");
  if (params.x0.size() != n) throw ShapeError("loss: initial estimate must have n entries");
  const bool luenberger = cfg.rollout_mode == RolloutMode::luenberger;
  if (luenberger) require_shape(L, n, q, "observer gain");
  const Eigen::Index first = cfg.k0, last = cfg.window_end();
  if (inputs.rows() != p || inputs.cols() < last) throw ShapeError("loss: inputs must be p x >= k0+K");
  if (measured.rows() != q || measured.cols() < last + 1) throw ShapeError("loss: outputs must be q x >= k0+K+1");

  const Matrix M = luenberger ? Matrix(sys.A - L * sys.C) : sys.A;
  Signal x(n, last + 1);
  x.col(0) = params.x0;
  if (!params.x0.allFinite()) throw DivergedRollout(0, "loss: non-finite initial estimate");
  for (Eigen::Index k = 0; k < last; ++k) {
    x.col(k + 1) = M * x.col(k) + sys.B * inputs.col(k);
    if (luenberger) x.col(k + 1) += L * measured.col(k);
    if (!x.col(k + 1).allFinite()) throw DivergedRollout(static_cast<std::size_t>(k + 1), "loss: observer rollout diverged");
  }

  const Signal residual = measured.middleCols(first, last - first + 1) - sys.C * x.middleCols(first, last - first + 1);
  const double K = static_cast<double>(cfg.window);
  const RegularizationWeights lambda = cfg.weights_for(n, p, q);

  LossEvaluation out;
  out.loss.data_term = residual.cwiseAbs().sum() / (K * static_cast<double>(q));
  out.loss.reg_A = elementwise_mean_abs(sys.A - anchor.A);
  out.loss.reg_B = elementwise_mean_abs(sys.B - anchor.B);
  out.loss.reg_C = elementwise_mean_abs(sys.C - anchor.C);
  out.loss.total = out.loss.data_term + lambda.A * out.loss.reg_A + lambda.B * out.loss.reg_B + lambda.C * out.loss.reg_C;
  if (!with_gradient) return out;

  LearnableParams& g = out.grad;
  g = LearnableParams::zeros_like(params);
  // d loss / d residual_k, nonzero only inside the window.
  const Matrix dres = detail::subgradient_sign(residual, cfg.subgradient_zero_tol) / (K * static_cast<double>(q));

  const Matrix Mt = M.transpose();
  Vector adj_next = Vector::Zero(n);  // d loss / d x_{k+1}
  for (Eigen::Index k = last; k >= 0; --k) {
    Vector adj = Mt * adj_next;
    if (k >= first) {
      const Vector dr = dres.col(k - first);
      adj.noalias() -= sys.C.transpose() * dr;
      g.C.noalias() -= dr * x.col(k).transpose();
    }
    if (k < last) {
      g.A.noalias() += adj_next * x.col(k).transpose();
      g.B.noalias() += adj_next * inputs.col(k).transpose();
      if (luenberger) g.C.noalias() -= (L.transpose() * adj_next) * x.col(k).transpose();
    }
    adj_next = adj;
  }
  g.x0 = adj_next;

  g.A += lambda.A / static_cast<double>(sys.A.size()) * detail::subgradient_sign(sys.A - anchor.A, cfg.subgradient_zero_tol);
  g.B += lambda.B / static_cast<double>(sys.B.size()) * detail::subgradient_sign(sys.B - anchor.B, cfg.subgradient_zero_tol);
  g.C += lambda.C / static_cast<double>(sys.C.size()) * detail::subgradient_sign(sys.C - anchor.C, cfg.subgradient_zero_tol);
  return out;
}

inline LossBreakdown loss(const LearnableParams& params, const LearnableParams& anchor, const ObserverGain& gain,
                          const Signal& inputs, const Signal& measured, const TrainConfig& cfg) {
  return evaluate_loss(params, anchor, gain.L, inputs, measured, cfg, false).loss;
}

inline LearnableParams gradient(const LearnableParams& params, const LearnableParams& anchor, const ObserverGain& gain,
                                const Signal& inputs, const Signal& measured, const TrainConfig& cfg) {
  return evaluate_loss(params, anchor, gain.L, inputs, measured, cfg, true).grad;
}

/// First and second moment accumulators, one per learnable tensor.
struct AdamState {
  LearnableParams m;
  LearnableParams v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const LearnableParams& p, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    return {LearnableParams::zeros_like(p), LearnableParams::zeros_like(p), 0, beta1, beta2, eps};
  }
};

/// One bias-corrected Adam update. Decoupled weight decay shrinks the parameters by
/// lr * weight_decay before the moment step; coupled mode adds weight_decay * param to the gradient.
inline LearnableParams adam_step(AdamState& state, const LearnableParams& params, const LearnableParams& grads,
                                 double lr, double weight_decay,
                                 WeightDecayMode mode = WeightDecayMode::decoupled) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);

  auto update = [&](const Matrix& p, const Matrix& g_in, Matrix& m, Matrix& v) -> Matrix {
    Matrix g = g_in;
    Matrix next = p;
    if (mode == WeightDecayMode::coupled) g += weight_decay * p;
    else next -= lr * weight_decay * p;
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    next.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    return next;
  };

  LearnableParams out;
  out.A = update(params.A, grads.A, state.m.A, state.v.A);
  out.B = update(params.B, grads.B, state.m.B, state.v.B);
  out.C = update(params.C, grads.C, state.m.C, state.v.C);
  Matrix m0 = state.m.x0, v0 = state.v.x0;
  out.x0 = update(params.x0, grads.x0, m0, v0);
  state.m.x0 = m0;
  state.v.x0 = v0;
  return out;
}

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;
  double lr = 0.0;
  bool L_refreshed = false;
  bool transformed = false;
};

enum class TrainStatus { completed, diverged };

struct TrainResult {
  LearnableParams params;  // original coordinates
  std::vector<EpochLog> log;
  TrainStatus status = TrainStatus::completed;
  /// Epoch of the failing rollout when status == diverged.
  int abort_epoch = -1;
  std::string message;
  /// Epochs in which (A, C) was unobservable and the previous gain was reused.
  int gain_fallbacks = 0;
  /// Accumulated coordinate change applied during training (identity when never triggered).
  CoordinateTransform transform;
};

/// Gradient refinement of (A, B, C, x0) from nominal values. Each epoch optionally
/// re-conditions the coordinates, re-places the observer poles on the current estimate
/// (keeping the previous gain when the pair is unobservable), evaluates the loss and its
/// gradient, and takes one Adam step with the scheduled learning rate.
///
/// A non-finite rollout undoes the previous update and retries it at half the learning rate;
/// a second consecutive failure stops training with status `diverged`.
inline TrainResult train(const LearnableParams& init, const Signal& inputs, const Signal& measured,
                         const TrainConfig& cfg, std::optional<ObserverGain> initial_gain = std::nullopt) {
  cfg.validate();
  const LtiParams init_sys = init.system();
  init_sys.validate();
  if (!init.all_finite()) throw DomainError("train: non-finite initial parameters");
  const Eigen::Index n = init_sys.n(), q = init_sys.q();
  if (measured.cols() < cfg.window_end() + 1) throw ShapeError("train: data horizon shorter than k0 + K");
  const std::vector<Complex> poles = cfg.poles_for(n);

  TrainResult result;
  result.transform = CoordinateTransform::identity(n);
  LearnableParams params = init;
  LearnableParams anchor = init;
  AdamState adam = AdamState::for_params(params, cfg.beta1, cfg.beta2, cfg.adam_eps);
  Matrix L = initial_gain ? initial_gain->L : Matrix::Zero(n, q);
  bool have_gain = initial_gain.has_value();
  double lr_scale = 1.0;

  struct Snapshot {
    LearnableParams params;
    AdamState adam;
    LearnableParams grad;
    double lr;
  };
  std::optional<Snapshot> previous;
  int consecutive_failures = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;

    if (cfg.conditioning) {
      const LtiParams current = params.system();
      if (is_observable(current.A, current.C) &&
          condition_number(observability_matrix(current.A, current.C, n)) > cfg.conditioning_threshold) {
        const CoordinateTransform t = conditioning_transform(current, cfg.conditioning_threshold).first;
        if (!t.is_identity()) {
          auto move = [&](LearnableParams& lp) {
            const LtiParams moved = apply_transform(t, lp.system());
            lp = {moved.A, moved.B, moved.C, t.T * lp.x0};
          };
          move(params);
          move(anchor);
          L = t.T * L;
          adam = AdamState::for_params(params, cfg.beta1, cfg.beta2, cfg.adam_eps);
          previous.reset();
          result.transform = t.after(result.transform);
          entry.transformed = true;
        }
      }
    }

    try {
      L = place_observer_poles(params.A, params.C, poles).L;
      have_gain = true;
      entry.L_refreshed = true;
    } catch (const Error&) {
      ++result.gain_fallbacks;
      if (!have_gain) L = Matrix::Zero(n, q);
    }

    const double lr = cfg.learning_rate(epoch) * lr_scale;
    LossEvaluation eval;
    try {
      eval = evaluate_loss(params, anchor, L, inputs, measured, cfg);
      consecutive_failures = 0;
    } catch (const DivergedRollout& e) {
      ++consecutive_failures;
      if (consecutive_failures >= 2 || !previous) {
        result.status = TrainStatus::diverged;
        result.abort_epoch = epoch;
        result.message = e.what();
        break;
      }
      // Redo the previous update at half the step size and re-run this epoch.
      lr_scale *= 0.5;
      adam = previous->adam;
      params = adam_step(adam, previous->params, previous->grad, previous->lr * 0.5, cfg.weight_decay,
                         cfg.weight_decay_mode);
      --epoch;
      continue;
    }

    entry.loss = eval.loss;
    entry.lr = lr;
    result.log.push_back(entry);

    previous = Snapshot{params, adam, eval.grad, lr};
    params = adam_step(adam, params, eval.grad, lr, cfg.weight_decay, cfg.weight_decay_mode);
  }

  const LtiParams back = invert_transform(result.transform, params.system());
  result.params = {back.A, back.B, back.C, result.transform.T_inv * params.x0};
  return result;
}

}  // namespace leo
