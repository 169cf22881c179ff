// Command-line front end: demo, trial, montecarlo and theory-check subcommands.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "leo/leo.hpp"

#ifndef LEO_VERSION
#define LEO_VERSION "unknown"
#endif

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Union of every setting a subcommand can read from flags or the config file.
struct RunConfig {
  leo::TrainConfig train;
  leo::TrialSpec spec;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "leo_out";
  std::string format = "csv";
  std::string rollout = "luenberger";
  std::string dims;
  std::size_t trials = 100;
  unsigned parallel = 1;
  bool two_sided = false;
  std::size_t cases = 100;
  std::string inject_fault;
  std::string dump_params;

  std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("LEO_SEED")) {
      try {
        return std::stoull(env);
      } catch (const std::exception&) {
        throw UsageError(std::string("LEO_SEED is not an unsigned integer: ") + env);
      }
    }
    return 1;
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Flat `key = value` file; '#' starts a comment. Keys are long option names of the subcommand.
/// Values only fill options that were not given on the command line.
void apply_config_file(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key == "config" || key == "help") throw UsageError(path + ": key '" + key + "' is not allowed in a config file");
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(path + ": bad value for '" + key + "': " + e.what());
    }
  }
}

leo::RolloutMode parse_rollout(const std::string& s) {
  return s == "open_loop" ? leo::RolloutMode::open_loop : leo::RolloutMode::luenberger;
}

std::vector<leo::Dims> parse_dims(const std::string& text) {
  if (text == "table") return leo::table_dims();
  std::vector<leo::Dims> out;
  std::stringstream groups(text);
  std::string group;
  while (std::getline(groups, group, ';')) {
    group = trim(group);
    if (group.empty()) continue;
    std::stringstream parts(group);
    std::string item;
    std::vector<long> v;
    while (std::getline(parts, item, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stol(trim(item), &used));
        if (used != trim(item).size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw UsageError("--dims: '" + group + "' is not n,p,q");
      }
    }
    if (v.size() != 3) throw UsageError("--dims: '" + group + "' is not n,p,q");
    const leo::Dims d{v[0], v[1], v[2]};
    if (d.n < 1 || d.p < 1 || d.q < 1) throw UsageError("--dims: dimensions must be positive");
    if (d.p > d.n) throw UsageError("--dims: input dimension p must not exceed n in '" + group + "'");
    if (d.n > 16) throw UsageError("--dims: n above 16 is not supported");
    out.push_back(d);
  }
  if (out.empty()) throw UsageError("--dims: no configuration given");
  return out;
}

void add_seed_option(CLI::App& sub, RunConfig& rc) {
  sub.add_option("--seed", rc.seed, "Master seed (falls back to $LEO_SEED, then 1)");
}

void add_training_options(CLI::App& sub, RunConfig& rc) {
  sub.add_option("--epochs", rc.train.epochs, "Training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub.add_option("--lr", rc.train.lr0, "Initial learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--decay-every", rc.train.decay_every, "Epochs between learning-rate decays")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--decay-factor", rc.train.decay_factor, "Learning-rate divisor per decay")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--weight-decay", rc.train.weight_decay, "Decoupled weight decay")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub.add_option("--k0", rc.train.k0, "First index of the steady-state window")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub.add_option("--window", rc.train.window, "Steady-state window length K")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--conditioning-threshold", rc.train.conditioning_threshold,
                 "Observability condition number that triggers re-conditioning")->capture_default_str();
  sub.add_option("--rollout", rc.rollout, "Observer used inside the loss")
      ->capture_default_str()
      ->check(CLI::IsMember({"luenberger", "open_loop"}));
}

void add_spec_options(CLI::App& sub, RunConfig& rc) {
  sub.add_option("--horizon", rc.spec.horizon, "Simulation horizon T")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--process-noise-std", rc.spec.process_noise_std, "Std of each process-noise component")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub.add_option("--measurement-noise-std", rc.spec.measurement_noise_std, "Std of each measurement-noise component")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub.add_option("--perturbation-std", rc.spec.perturbation_std, "Std of each parameter perturbation")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub.add_option("--x0-hat-std", rc.spec.x0_hat_offset_std, "Std of the initial-estimate offset")->capture_default_str()->check(CLI::NonNegativeNumber);
}

void finalize_training(RunConfig& rc) {
  rc.train.rollout_mode = parse_rollout(rc.rollout);
  try {
    rc.train.validate();
  } catch (const leo::Error& e) {
    throw UsageError(e.what());
  }
}

void print_table_header() {
  std::printf("%-10s | %9s %6s %10s | %9s %6s %10s | %s\n", "(n,p,q)", "ERR", "SR", "p-value", "ERR", "SR", "p-value",
              "failures");
  std::printf("%-10s | %-28s | %-28s |\n", "", "open-loop", "closed-loop");
}

int cmd_demo(RunConfig& rc) {
  finalize_training(rc);
  const std::uint64_t seed = rc.resolved_seed();
  const leo::PipelineInput in = leo::demo_input(seed);
  const leo::PipelineOutput out = leo::run_pipeline(in, rc.train);

  namespace fs = std::filesystem;
  const fs::path dir(rc.out_dir);
  leo::io::write_atomic(dir / "demo.csv", leo::demo_csv(in, out));
  leo::io::write_atomic(dir / "demo_training.jsonl", leo::io::training_log_jsonl(out.training.log));
  leo::io::json observers = {
      {"nominal", leo::io::observer_to_json(in.nominal, out.gain_nominal)},
      {"enhanced", leo::io::observer_to_json(out.training.params.system(), out.gain_enhanced)},
      {"x0_hat_enhanced", leo::io::to_json(leo::Matrix(out.training.params.x0))}};
  leo::io::write_atomic(dir / "demo_observers.json", observers.dump(2) + "\n");

  const leo::TrialResult& r = out.result;
  std::printf("steady-state normalized error, k in [%ld, %ld], seed %llu\n", static_cast<long>(rc.train.k0),
              static_cast<long>(rc.train.window_end()), static_cast<unsigned long long>(seed));
  std::printf("%-12s %14s %14s %10s\n", "observer", "nominal", "enhanced", "reduction");
  std::printf("%-12s %14.6g %14.6g %9.2f%%\n", "open-loop", r.e_nom_open, r.e_enh_open, r.red_open_pct);
  std::printf("%-12s %14.6g %14.6g %9.2f%%\n", "luenberger", r.e_nom_cl, r.e_enh_cl, r.red_cl_pct);
  if (!r.flags().empty()) std::printf("flags: %s\n", r.flags().c_str());
  std::printf("wrote %s\n", (dir / "demo.csv").string().c_str());
  return kExitOk;
}

int cmd_trial(RunConfig& rc) {
  finalize_training(rc);
  const std::vector<leo::Dims> dims = parse_dims(rc.dims);
  if (dims.size() != 1) throw UsageError("trial: --dims takes exactly one n,p,q triple");
  leo::TrialSpec spec = rc.spec;
  spec.n = dims[0].n;
  spec.p = dims[0].p;
  spec.q = dims[0].q;
  spec.seed = rc.resolved_seed();
  try {
    spec.validate(rc.train);
  } catch (const leo::Error& e) {
    throw UsageError(e.what());
  }

  int regenerations = 0;
  const leo::PipelineInput in = leo::sample_trial(spec, regenerations);
  const leo::PipelineOutput out = leo::run_pipeline(in, rc.train);
  leo::TrialResult r = out.result;
  r.seed = spec.seed;
  r.regenerations = regenerations;

  if (!rc.dump_params.empty()) {
    leo::io::json learned = leo::io::to_json(out.training.params);
    learned["gain"] = leo::io::to_json(out.gain_enhanced);
    leo::io::write_atomic(rc.dump_params, learned.dump(2) + "\n");
  }
  leo::io::json j = leo::io::to_json(r);
  j["n"] = spec.n;
  j["p"] = spec.p;
  j["q"] = spec.q;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_montecarlo(RunConfig& rc) {
  finalize_training(rc);
  const std::vector<leo::Dims> dims = parse_dims(rc.dims);
  if (rc.trials < 10) throw UsageError("montecarlo: --trials must be at least 10 for the signed-rank test");
  leo::McOptions opt;
  opt.trials = rc.trials;
  opt.master_seed = rc.resolved_seed();
  opt.parallel = rc.parallel;
  opt.alternative = rc.two_sided ? leo::Alternative::two_sided : leo::Alternative::greater;
  opt.spec = rc.spec;
  for (const leo::Dims& d : dims) {
    leo::TrialSpec s = rc.spec;
    s.n = d.n;
    s.p = d.p;
    s.q = d.q;
    try {
      s.validate(rc.train);
    } catch (const leo::Error& e) {
      throw UsageError(e.what());
    }
  }

  const std::vector<leo::McConfigResult> results = leo::run_monte_carlo(dims, opt, rc.train);

  namespace fs = std::filesystem;
  const fs::path dir(rc.out_dir);
  leo::io::json entries = leo::io::json::array();
  for (const leo::McConfigResult& res : results) {
    const leo::Dims& d = res.summary.dims;
    const std::string stem = "trials_" + std::to_string(d.n) + "_" + std::to_string(d.p) + "_" + std::to_string(d.q);
    if (rc.format == "json") {
      leo::io::json rows = leo::io::json::array();
      for (const leo::TrialResult& t : res.trials) rows.push_back(leo::io::to_json(t));
      leo::io::write_atomic(dir / (stem + ".json"), rows.dump(2) + "\n");
    } else {
      leo::io::write_atomic(dir / (stem + ".csv"), leo::io::trials_csv(res.trials));
    }
    entries.push_back(leo::io::to_json(res.summary));
  }
  leo::io::json config = {{"trials", rc.trials},
                          {"master_seed", opt.master_seed},
                          {"epochs", rc.train.epochs},
                          {"lr", rc.train.lr0},
                          {"decay_every", rc.train.decay_every},
                          {"decay_factor", rc.train.decay_factor},
                          {"weight_decay", rc.train.weight_decay},
                          {"k0", rc.train.k0},
                          {"window", rc.train.window},
                          {"rollout", rc.rollout},
                          {"conditioning_threshold", rc.train.conditioning_threshold},
                          {"horizon", rc.spec.horizon},
                          {"process_noise_std", rc.spec.process_noise_std},
                          {"measurement_noise_std", rc.spec.measurement_noise_std},
                          {"perturbation_std", rc.spec.perturbation_std},
                          {"x0_hat_std", rc.spec.x0_hat_offset_std},
                          {"two_sided", rc.two_sided}};
  leo::io::json summary = {{"version", LEO_VERSION}, {"config", config}, {"summaries", entries}};
  leo::io::write_atomic(dir / "summary.json", summary.dump(2) + "\n");

  print_table_header();
  for (const leo::McConfigResult& res : results) {
    const leo::McSummary& s = res.summary;
    const std::string label = "(" + std::to_string(s.dims.n) + "," + std::to_string(s.dims.p) + "," +
                              std::to_string(s.dims.q) + ")";
    std::printf("%-10s | %8.2f%% %5.0f%% %10.2e | %8.2f%% %5.0f%% %10.2e | %zu\n", label.c_str(), s.err_open,
                100.0 * s.sr_open, s.p_open, s.err_closed, 100.0 * s.sr_closed, s.p_closed, s.failures);
  }
  std::printf("wrote %s\n", (dir / "summary.json").string().c_str());
  return kExitOk;
}

int cmd_theory_check(RunConfig& rc) {
  leo::TheoryCheckConfig cfg;
  cfg.cases = rc.cases;
  cfg.seed = rc.resolved_seed();
  cfg.fault_skip_pinv = rc.inject_fault == "skip-pinv";
  bool all = true;
  for (const leo::CheckOutcome& c : leo::run_theory_checks(cfg)) {
    std::printf("%-26s %s  worst %.3e  (tolerance %.1e, %zu cases)", c.name.c_str(), c.passed ? "PASS" : "FAIL",
                c.worst, c.tolerance, c.cases);
    if (c.failing_case) {
      std::printf("  first failure: seed %llu case %zu", static_cast<unsigned long long>(cfg.seed), *c.failing_case);
    }
    std::printf("\n");
    all = all && c.passed;
  }
  return all ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-enhanced observers for uncertain discrete-time LTI systems"};
  app.set_version_flag("--version", std::string(LEO_VERSION));
  app.require_subcommand(1);
  const std::string footer =
      "Every long option of a subcommand may also be set as `key = value` in a file passed with --config;\n"
      "command-line flags win over the file, and unknown keys are rejected. Exit codes: 0 success,\n"
      "1 failed check, 2 usage or configuration error.";
  app.footer(footer);

  RunConfig rc;
  std::string config_path;

  auto* demo = app.add_subcommand("demo", "Run the two-state worked example and write per-step plot data");
  auto* trial = app.add_subcommand("trial", "Run one seeded random trial and print its result as JSON");
  auto* mc = app.add_subcommand("montecarlo", "Run seeded Monte Carlo comparisons and write CSV/JSON results");
  auto* theory = app.add_subcommand("theory-check", "Run the local-LTI oracle suites");

  for (CLI::App* sub : {demo, trial, mc, theory}) {
    sub->footer(footer);
    sub->add_option("--config", config_path, "Flat key = value configuration file");
    add_seed_option(*sub, rc);
  }
  for (CLI::App* sub : {demo, trial, mc}) add_training_options(*sub, rc);
  for (CLI::App* sub : {trial, mc}) add_spec_options(*sub, rc);
  for (CLI::App* sub : {demo, mc}) {
    sub->add_option("--out-dir", rc.out_dir, "Directory for result files")->capture_default_str();
  }

  // Required, but checked after the config file is merged so the file may supply it.
  trial->add_option("--dims", rc.dims, "System dimensions n,p,q (required)");
  trial->add_option("--dump-params", rc.dump_params, "Write the learned (A, B, C, x0) and gain as JSON");

  rc.dims = "2,1,1";
  mc->add_option("--dims", rc.dims, "Configurations n,p,q[;n,p,q...] or 'table' for all fifteen")->capture_default_str();
  mc->add_option("--trials", rc.trials, "Trials per configuration (minimum 10)")->capture_default_str();
  mc->add_option("--format", rc.format, "Per-trial output format")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
  mc->add_option("--parallel", rc.parallel, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  mc->add_flag("--two-sided", rc.two_sided, "Two-sided signed-rank test instead of one-sided");

  theory->add_option("--cases", rc.cases, "Random cases per check")->capture_default_str()->check(CLI::PositiveNumber);
  theory->add_option("--inject-fault", rc.inject_fault, "Test hook; 'skip-pinv' fits the output matrix without the pseudoinverse")
      ->check(CLI::IsMember({"skip-pinv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    if (!config_path.empty()) apply_config_file(*active, config_path);
    if (active == demo) return cmd_demo(rc);
    if (active == trial) {
      if (trial->get_option("--dims")->count() == 0) throw UsageError("--dims is required");
      return cmd_trial(rc);
    }
    if (active == mc) return cmd_montecarlo(rc);
    return cmd_theory_check(rc);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}
