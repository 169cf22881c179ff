#pragma once

// Test-side helpers shared by the unit tests and the acceptance binary.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "leo/learning.hpp"

namespace leo::testing_support {

struct Instance {
  TrueSystem truth;
  LtiParams nominal;
  Vector x0_hat;
  Signal u;
  Signal y;
};

/// Random trial-like data set: perturbed nominal model, noisy outputs over 260 steps.
inline Instance make_instance(Eigen::Index n, Eigen::Index p, Eigen::Index q, std::uint64_t seed, double noise = 0.1) {
  RngStream rng(seed, 0);
  Instance in;
  in.truth = random_system(n, p, q, rng);
  in.nominal = in.truth.nominal();
  in.u = rng.normal_matrix(p, 261);
  NoiseRealization w{rng.normal_matrix(n, 261, noise), rng.normal_matrix(q, 261, noise)};
  in.y = simulate_true(in.truth, in.u, w, 260).outputs;
  in.x0_hat = in.truth.x0_real + rng.normal_vector(n, 10.0);
  return in;
}

inline LearnableParams offset(const LearnableParams& p, RngStream& rng, double scale) {
  return {p.A + rng.normal_matrix(p.A.rows(), p.A.cols(), scale), p.B + rng.normal_matrix(p.B.rows(), p.B.cols(), scale),
          p.C + rng.normal_matrix(p.C.rows(), p.C.cols(), scale), p.x0 + rng.normal_vector(p.x0.size(), scale)};
}

/// Straight-line evaluation of the objective with plain loops, accumulated in Real.
template <typename Real = double>
Real reference_loss(const LearnableParams& th, const LearnableParams& anchor, const Matrix& L, const Signal& u,
                    const Signal& y, Eigen::Index k0, Eigen::Index K, const RegularizationWeights& lam,
                    bool luenberger) {
  const Eigen::Index n = th.A.rows(), p = th.B.cols(), q = th.C.rows();
  std::vector<Real> x(th.x0.data(), th.x0.data() + n);
  Real data = 0;
  for (Eigen::Index k = 0; k <= k0 + K; ++k) {
    std::vector<Real> r(static_cast<std::size_t>(q));
    for (Eigen::Index i = 0; i < q; ++i) {
      Real yhat = 0;
      for (Eigen::Index j = 0; j < n; ++j) yhat += Real(th.C(i, j)) * x[j];
      r[i] = Real(y(i, k)) - yhat;
      if (k >= k0) data += std::abs(r[i]) / Real(q);
    }
    std::vector<Real> next(static_cast<std::size_t>(n), Real(0));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) next[i] += Real(th.A(i, j)) * x[j];
      for (Eigen::Index j = 0; j < p; ++j) next[i] += Real(th.B(i, j)) * Real(u(j, k));
      if (luenberger)
        for (Eigen::Index j = 0; j < q; ++j) next[i] += Real(L(i, j)) * r[j];
    }
    x = next;
  }
  data /= Real(K);
  auto mean_abs_diff = [](const Matrix& a, const Matrix& b) {
    Real s = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) s += std::abs(Real(a(i)) - Real(b(i)));
    return s / Real(a.size());
  };
  return data + Real(lam.A) * mean_abs_diff(th.A, anchor.A) + Real(lam.B) * mean_abs_diff(th.B, anchor.B) +
         Real(lam.C) * mean_abs_diff(th.C, anchor.C);
}

struct GradientCheck {
  int entries = 0;
  int violations = 0;
  /// Largest |adjoint - fd| / (1e-4 |fd| + 1e-8); below 1 means within tolerance.
  double worst = 0.0;
  std::string first_violation;
};

/// Adjoint gradient against central differences (step 1e-6) of the total loss, evaluated away
/// from the anchor so the regularizer is differentiable, with the gain frozen. The differenced
/// objective is the extended-precision plain-loop oracle, so cancellation noise stays far below
/// the 1e-8 absolute floor even where the true derivative vanishes.
inline GradientCheck gradient_check(const Instance& in, const TrainConfig& cfg, std::uint64_t seed) {
  const LearnableParams anchor = LearnableParams::from(in.nominal, in.x0_hat);
  RngStream rng(seed, 1);
  const LearnableParams th = offset(anchor, rng, 1e-3);
  const ObserverGain g = place_observer_poles(th.A, th.C);
  const LearnableParams grad = gradient(th, anchor, g, in.u, in.y, cfg);
  const double h = 1e-6;
  const RegularizationWeights lam = cfg.weights_for(th.A.rows(), th.B.cols(), th.C.rows());
  auto objective = [&](const LearnableParams& p) {
    return reference_loss<long double>(p, anchor, g.L, in.u, in.y, cfg.k0, cfg.window, lam,
                                       cfg.rollout_mode == RolloutMode::luenberger);
  };
  GradientCheck out;
  auto compare = [&](const char* name, const Matrix& analytic, auto select) {
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
      LearnableParams plus = th, minus = th;
      select(plus)(i) += h;
      select(minus)(i) -= h;
      const double numeric = static_cast<double>((objective(plus) - objective(minus)) / (2 * static_cast<long double>(h)));
      const double ratio = std::abs(analytic(i) - numeric) / (1e-4 * std::abs(numeric) + 1e-8);
      ++out.entries;
      out.worst = std::max(out.worst, ratio);
      if (!(ratio <= 1.0)) {
        if (out.violations++ == 0) {
          std::ostringstream msg;
          msg << name << "[" << i << "] adjoint " << analytic(i) << " fd " << numeric;
          out.first_violation = msg.str();
        }
      }
    }
  };
  compare("A", grad.A, [](LearnableParams& p) -> Matrix& { return p.A; });
  compare("B", grad.B, [](LearnableParams& p) -> Matrix& { return p.B; });
  compare("C", grad.C, [](LearnableParams& p) -> Matrix& { return p.C; });
  compare("x0", grad.x0, [](LearnableParams& p) -> Vector& { return p.x0; });
  return out;
}

}  // namespace leo::testing_support
