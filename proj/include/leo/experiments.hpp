#pragma once

// Monte Carlo comparison of nominal and learning-enhanced observers.

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "leo/learning.hpp"
#include "leo/stats.hpp"

namespace leo {

/// Threshold below which a reference state component is left out of the normalized error.
inline constexpr double kReferenceFloor = 1e-8;

/// Mean of |(x^_{k,i} - x_{k,i}) / x_{k,i}| over k in [k0, k0 + K] and all components,
/// skipping components whose reference magnitude is below kReferenceFloor.
inline double normalized_error(const Signal& estimate, const Signal& reference, Eigen::Index k0, Eigen::Index window) {
  if (estimate.rows() != reference.rows()) throw ShapeError("normalized_error: state dimensions differ");
  const Eigen::Index last = k0 + window;
  if (k0 < 0 || window < 0 || estimate.cols() <= last || reference.cols() <= last) {
    throw ShapeError("normalized_error: trajectories do not cover the window");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index k = k0; k <= last; ++k) {
    for (Eigen::Index i = 0; i < reference.rows(); ++i) {
      const double x = reference(i, k);
      if (std::abs(x) < kReferenceFloor) continue;
      sum += std::abs((estimate(i, k) - x) / x);
      ++count;
    }
  }
  if (count == 0) throw DegenerateReference("normalized_error: every reference component in the window is ~0");
  return sum / static_cast<double>(count);
}

inline double normalized_error(const Trajectory& estimate, const Trajectory& reference, Eigen::Index k0,
                               Eigen::Index window) {
  return normalized_error(estimate.states, reference.states, k0, window);
}

/// Sampling protocol of one trial.
struct TrialSpec {
  Eigen::Index n = 2, p = 1, q = 1;
  Eigen::Index horizon = 260;
  double process_noise_std = 0.1;      // covariance 0.01 I_n
  double measurement_noise_std = 0.1;  // covariance 0.01 I_q
  double perturbation_std = 0.05;
  double x0_std = 1.0;
  double x0_hat_offset_std = 10.0;
  double input_std = 1.0;
  double target_radius = 0.9;
  std::uint64_t seed = 0;
  int max_regenerations = 10;

  void validate(const TrainConfig& cfg) const {
    if (n < 1 || p < 1 || q < 1) throw DomainError("TrialSpec: dimensions must be positive");
    if (p > n) throw DomainError("TrialSpec: p must not exceed n");
    if (horizon < cfg.window_end()) throw DomainError("TrialSpec: horizon shorter than k0 + K");
  }
};

struct TrialResult {
  std::uint64_t seed = 0;
  double e_nom_open = 0.0;
  double e_enh_open = 0.0;
  double e_nom_cl = 0.0;
  double e_enh_cl = 0.0;
  double red_open_pct = 0.0;
  double red_cl_pct = 0.0;
  int gain_fallbacks = 0;
  bool final_gain_fallback = false;
  bool diverged = false;
  bool failed = false;
  int regenerations = 0;
  std::string message;

  std::string flags() const {
    std::string f;
    auto add = [&](const char* s) { f += f.empty() ? s : std::string("|") + s; };
    if (failed) add("failed");
    if (diverged) add("diverged");
    if (gain_fallbacks > 0 || final_gain_fallback) add("gain_fallback");
    if (regenerations > 0) add("regenerated");
    return f;
  }
};

/// Everything the observers see and produce in one run of the comparison.
struct PipelineInput {
  TrueSystem truth;
  LtiParams nominal;
  Vector x0_hat;
  Signal inputs;
  NoiseRealization noise;
  Eigen::Index horizon = 260;
};

struct PipelineOutput {
  Trajectory real;
  Trajectory open_nominal, open_enhanced, luenberger_nominal, luenberger_enhanced;
  ObserverGain gain_nominal, gain_enhanced;
  TrainResult training;
  TrialResult result;
};

inline double reduction_pct(double nominal, double enhanced) {
  if (!(nominal > 0.0)) return 0.0;
  return 100.0 * (nominal - enhanced) / nominal;
}

/// Simulates the truth, builds the nominal observers, refines the model, builds the enhanced
/// observers from the refined parameters and scores all four on the same realization.
inline PipelineOutput run_pipeline(const PipelineInput& in, const TrainConfig& cfg) {
  PipelineOutput out;
  const Eigen::Index T = in.horizon;
  const std::vector<Complex> poles = cfg.poles_for(in.nominal.n());
  out.real = simulate_true(in.truth, in.inputs, in.noise, T);
  const Signal& y = out.real.outputs;

  out.gain_nominal = place_observer_poles(in.nominal.A, in.nominal.C, poles);
  out.open_nominal = run_open_loop(in.nominal, in.inputs, in.x0_hat, T);
  out.luenberger_nominal = run_luenberger(in.nominal, out.gain_nominal, in.inputs, y, in.x0_hat, T);

  out.training = train(LearnableParams::from(in.nominal, in.x0_hat), in.inputs, y, cfg, out.gain_nominal);
  TrialResult& r = out.result;
  r.gain_fallbacks = out.training.gain_fallbacks;
  const LearnableParams& opt = out.training.params;

  if (out.training.status == TrainStatus::diverged) {
    r.diverged = true;
    r.failed = true;
    r.message = out.training.message;
  }

  const LtiParams learned = r.failed ? in.nominal : opt.system();
  const Vector x0_learned = r.failed ? in.x0_hat : opt.x0;
  try {
    out.gain_enhanced = place_observer_poles(learned.A, learned.C, poles);
  } catch (const Error&) {
    out.gain_enhanced = out.gain_nominal;
    r.final_gain_fallback = true;
  }
  out.open_enhanced = run_open_loop(learned, in.inputs, x0_learned, T);
  out.luenberger_enhanced = run_luenberger(learned, out.gain_enhanced, in.inputs, y, x0_learned, T);

  const Eigen::Index k0 = cfg.k0, K = cfg.window;
  r.e_nom_open = normalized_error(out.open_nominal, out.real, k0, K);
  r.e_nom_cl = normalized_error(out.luenberger_nominal, out.real, k0, K);
  r.e_enh_open = normalized_error(out.open_enhanced, out.real, k0, K);
  r.e_enh_cl = normalized_error(out.luenberger_enhanced, out.real, k0, K);
  if (!std::isfinite(r.e_enh_open) || !std::isfinite(r.e_enh_cl)) {
    r.failed = true;
    r.message = "enhanced observer produced non-finite estimates";
  }
  if (r.failed) {
    r.e_enh_open = r.e_nom_open;
    r.e_enh_cl = r.e_nom_cl;
  }
  r.red_open_pct = r.failed ? 0.0 : reduction_pct(r.e_nom_open, r.e_enh_open);
  r.red_cl_pct = r.failed ? 0.0 : reduction_pct(r.e_nom_cl, r.e_enh_cl);
  return out;
}

/// Draws the system, inputs, noise and initial estimate of one trial. Attempt `a` uses the
/// sub-stream (seed, a); draws whose nominal pair is unobservable are regenerated.
inline PipelineInput sample_trial(const TrialSpec& spec, int& regenerations) {
  GenConfig gen;
  gen.perturbation_std = spec.perturbation_std;
  gen.x0_std = spec.x0_std;
  gen.target_radius = spec.target_radius;
  const Eigen::Index T = spec.horizon;
  for (int attempt = 0; attempt <= spec.max_regenerations; ++attempt) {
    RngStream rng(spec.seed, static_cast<std::uint64_t>(attempt));
    PipelineInput in;
    in.horizon = T;
    in.truth = random_system(spec.n, spec.p, spec.q, rng, gen);
    in.nominal = in.truth.nominal();
    in.inputs = rng.normal_matrix(spec.p, T + 1, spec.input_std);
    in.noise.w = rng.normal_matrix(spec.n, T + 1, spec.process_noise_std);
    in.noise.v = rng.normal_matrix(spec.q, T + 1, spec.measurement_noise_std);
    in.x0_hat = in.truth.x0_real + rng.normal_vector(spec.n, spec.x0_hat_offset_std);
    if (is_observable(in.nominal.A, in.nominal.C)) {
      regenerations = attempt;
      return in;
    }
  }
  throw GenerationError("sample_trial: nominal pair unobservable in every regeneration");
}

inline TrialResult run_trial(const TrialSpec& spec, const TrainConfig& cfg) {
  spec.validate(cfg);
  cfg.validate();
  int regenerations = 0;
  const PipelineInput in = sample_trial(spec, regenerations);
  TrialResult r = run_pipeline(in, cfg).result;
  r.seed = spec.seed;
  r.regenerations = regenerations;
  return r;
}

struct Dims {
  Eigen::Index n = 0, p = 0, q = 0;
  bool operator==(const Dims&) const = default;
};

/// The fifteen (n, p, q) configurations with 2 <= n <= 4, p >= floor(n/2), q <= p, q < n.
inline std::vector<Dims> table_dims() {
  std::vector<Dims> out;
  for (Eigen::Index n = 2; n <= 4; ++n)
    for (Eigen::Index p = std::max<Eigen::Index>(1, n / 2); p <= n; ++p)
      for (Eigen::Index q = 1; q <= p && q < n; ++q) out.push_back({n, p, q});
  return out;
}

inline std::uint64_t trial_seed(std::uint64_t master_seed, const Dims& d, std::size_t index) {
  const auto code = static_cast<std::uint64_t>((d.n << 32) ^ (d.p << 16) ^ d.q);
  return mix64(mix64(master_seed) ^ mix64(code) ^ mix64(~static_cast<std::uint64_t>(index)));
}

struct McSummary {
  Dims dims;
  std::size_t trials = 0;
  std::uint64_t master_seed = 0;
  double err_open = 0.0;
  double err_closed = 0.0;
  double sr_open = 0.0;
  double sr_closed = 0.0;
  double p_open = 1.0;
  double p_closed = 1.0;
  std::size_t failures = 0;
};

struct McConfigResult {
  McSummary summary;
  std::vector<TrialResult> trials;
};

struct McOptions {
  std::size_t trials = 100;
  std::uint64_t master_seed = 1;
  unsigned parallel = 1;
  Alternative alternative = Alternative::greater;
  /// Template for every trial; dims and seed are overwritten per trial.
  TrialSpec spec;
};

inline McSummary summarize(const Dims& dims, const std::vector<TrialResult>& trials, std::uint64_t master_seed,
                           Alternative alt) {
  std::vector<double> nom_o, enh_o, nom_c, enh_c, red_o, red_c;
  McSummary s;
  s.dims = dims;
  s.trials = trials.size();
  s.master_seed = master_seed;
  for (const TrialResult& t : trials) {
    nom_o.push_back(t.e_nom_open);
    enh_o.push_back(t.e_enh_open);
    nom_c.push_back(t.e_nom_cl);
    enh_c.push_back(t.e_enh_cl);
    red_o.push_back(t.red_open_pct);
    red_c.push_back(t.red_cl_pct);
    s.failures += t.failed ? 1 : 0;
  }
  s.err_open = trimmed_mean_reduction(red_o);
  s.err_closed = trimmed_mean_reduction(red_c);
  s.sr_open = success_rate(nom_o, enh_o);
  s.sr_closed = success_rate(nom_c, enh_c);
  s.p_open = wilcoxon_signed_rank(nom_o, enh_o, alt).p_value;
  s.p_closed = wilcoxon_signed_rank(nom_c, enh_c, alt).p_value;
  return s;
}

/// Runs `trials` seeded trials per configuration. Trial i of configuration d always uses
/// trial_seed(master, d, i), and results are stored by index, so the summaries do not
/// depend on the number of workers or their scheduling.
inline std::vector<McConfigResult> run_monte_carlo(const std::vector<Dims>& dims_list, const McOptions& opt,
                                                   const TrainConfig& cfg) {
  if (opt.trials < 10) throw DomainError("run_monte_carlo: at least 10 trials are required");
  if (dims_list.empty()) throw DomainError("run_monte_carlo: empty configuration list");
  cfg.validate();

  struct Job {
    std::size_t config;
    std::size_t index;
  };
  std::vector<Job> jobs;
  std::vector<McConfigResult> out(dims_list.size());
  for (std::size_t c = 0; c < dims_list.size(); ++c) {
    TrialSpec spec = opt.spec;
    spec.n = dims_list[c].n;
    spec.p = dims_list[c].p;
    spec.q = dims_list[c].q;
    spec.validate(cfg);
    out[c].trials.resize(opt.trials);
    for (std::size_t i = 0; i < opt.trials; ++i) jobs.push_back({c, i});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) {
      const Job& job = jobs[j];
      const Dims& d = dims_list[job.config];
      TrialSpec spec = opt.spec;
      spec.n = d.n;
      spec.p = d.p;
      spec.q = d.q;
      spec.seed = trial_seed(opt.master_seed, d, job.index);
      TrialResult r;
      try {
        r = run_trial(spec, cfg);
      } catch (const Error& e) {
        r.seed = spec.seed;
        r.failed = true;
        r.message = e.what();
      }
      out[job.config].trials[job.index] = std::move(r);
    }
  };

  const unsigned workers = std::max(1u, opt.parallel);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (std::size_t c = 0; c < dims_list.size(); ++c) {
    out[c].summary = summarize(dims_list[c], out[c].trials, opt.master_seed, opt.alternative);
  }
  return out;
}

}  // namespace leo
