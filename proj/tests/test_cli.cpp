#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(LEO_CLI_PATH) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  size_t got = 0;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("leo_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    ADD_FAILURE() << "missing column " << name;
    return 0;
  }
};

Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string f;
    std::vector<double> row;
    while (std::getline(fields, f, ',')) {
      if (first) csv.header.push_back(f);
      else row.push_back(std::strtod(f.c_str(), nullptr));
    }
    if (!first) csv.rows.push_back(row);
    first = false;
  }
  return csv;
}

double steady_error(const Csv& csv, const std::string& suffix) {
  double sum = 0.0;
  int count = 0;
  for (const auto& row : csv.rows) {
    const auto k = static_cast<int>(row[csv.col("k")]);
    if (k < 201 || k > 251) continue;
    for (const char* e : {"e1_", "e2_"}) {
      sum += row[csv.col(e + suffix)];
      ++count;
    }
  }
  return sum / count;
}

TEST(CliDemoTest, WritesPlotDataAndImprovesClosedLoop) {
  const fs::path dir = fresh_dir("demo");
  const CliRun r = run("demo --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0);
  const Csv csv = parse_csv(slurp(dir / "demo.csv"));
  EXPECT_EQ(csv.rows.size(), 261u);
  const std::vector<std::string> expected_prefix = {"k", "u", "v", "w1", "w2", "x1_real", "x1_open_nom", "x1_open_enh",
                                                    "x1_luen_nom", "x1_luen_enh"};
  ASSERT_GE(csv.header.size(), expected_prefix.size());
  for (std::size_t i = 0; i < expected_prefix.size(); ++i) EXPECT_EQ(csv.header[i], expected_prefix[i]);
  EXPECT_LT(steady_error(csv, "luen_enh"), steady_error(csv, "luen_nom"));
  EXPECT_TRUE(fs::exists(dir / "demo_training.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "demo_observers.json"));
}

TEST(CliDemoTest, SameSeedGivesIdenticalBytes) {
  const fs::path a = fresh_dir("demo_a"), b = fresh_dir("demo_b");
  ASSERT_EQ(run("demo --seed 4 --out-dir " + a.string()).code, 0);
  ASSERT_EQ(run("demo --seed 4 --out-dir " + b.string()).code, 0);
  EXPECT_EQ(slurp(a / "demo.csv"), slurp(b / "demo.csv"));
  EXPECT_FALSE(slurp(a / "demo.csv").empty());
}

TEST(CliDemoTest, ZeroEpochsEnhancedEqualsNominal) {
  const fs::path dir = fresh_dir("demo_zero");
  ASSERT_EQ(run("demo --epochs 0 --out-dir " + dir.string()).code, 0);
  const Csv csv = parse_csv(slurp(dir / "demo.csv"));
  for (const auto& row : csv.rows) {
    for (const char* x : {"x1_", "x2_"}) {
      EXPECT_NEAR(row[csv.col(std::string(x) + "open_enh")], row[csv.col(std::string(x) + "open_nom")], 1e-12);
      EXPECT_NEAR(row[csv.col(std::string(x) + "luen_enh")], row[csv.col(std::string(x) + "luen_nom")], 1e-12);
    }
  }
}

TEST(CliTrialTest, DeterministicJson) {
  const CliRun a = run("trial --dims 2,1,1 --seed 7"), b = run("trial --dims 2,1,1 --seed 7");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const json j = json::parse(a.out);
  for (const char* key : {"e_nom_open", "e_enh_open", "e_nom_cl", "e_enh_cl"}) {
    ASSERT_TRUE(j.contains(key)) << key;
    EXPECT_GE(j.at(key).get<double>(), 0.0) << key;
  }
  EXPECT_EQ(j.at("seed"), 7);
}

TEST(CliTrialTest, DumpParams) {
  const fs::path dir = fresh_dir("trial_dump");
  ASSERT_EQ(run("trial --dims 3,2,1 --seed 2 --dump-params " + (dir / "learned.json").string()).code, 0);
  const json j = json::parse(slurp(dir / "learned.json"));
  for (const char* key : {"A", "B", "C", "x0", "gain"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j.at("A").at("rows"), 3);
}

TEST(CliTrialTest, InvalidDimsAreUsageErrors) {
  EXPECT_EQ(run("trial --dims 2,3,1").code, 2);
  EXPECT_EQ(run("trial --dims 2,1").code, 2);
  EXPECT_EQ(run("trial --dims a,b,c").code, 2);
  EXPECT_EQ(run("trial").code, 2);
}

TEST(CliMonteCarloTest, WritesSummaryAndRows) {
  const fs::path dir = fresh_dir("mc");
  const CliRun r = run("montecarlo --dims 2,1,1 --trials 20 --seed 1 --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0);
  const json summary = json::parse(slurp(dir / "summary.json"));
  ASSERT_EQ(summary.at("summaries").size(), 1u);
  EXPECT_EQ(summary.at("summaries")[0].at("trials"), 20);
  EXPECT_TRUE(summary.contains("version"));
  EXPECT_EQ(summary.at("config").at("master_seed"), 1);
  const Csv csv = parse_csv(slurp(dir / "trials_2_1_1.csv"));
  EXPECT_EQ(csv.rows.size(), 20u);
  EXPECT_NE(r.out.find("(2,1,1)"), std::string::npos);
}

TEST(CliMonteCarloTest, JsonFormatAndParallelAgree) {
  const fs::path a = fresh_dir("mc_a"), b = fresh_dir("mc_b");
  ASSERT_EQ(run("montecarlo --dims '2,1,1;3,2,1' --trials 10 --format json --out-dir " + a.string()).code, 0);
  ASSERT_EQ(run("montecarlo --dims '2,1,1;3,2,1' --trials 10 --format json --parallel 3 --out-dir " + b.string()).code, 0);
  EXPECT_EQ(slurp(a / "trials_3_2_1.json"), slurp(b / "trials_3_2_1.json"));
  EXPECT_EQ(json::parse(slurp(a / "summary.json")).at("summaries"), json::parse(slurp(b / "summary.json")).at("summaries"));
}

TEST(CliMonteCarloTest, FullTableRowSet) {
  const fs::path dir = fresh_dir("mc_table");
  ASSERT_EQ(run("montecarlo --dims table --trials 100 --out-dir " + dir.string()).code, 0);
  const json s = json::parse(slurp(dir / "summary.json")).at("summaries");
  ASSERT_EQ(s.size(), 15u);
  EXPECT_EQ(s[0].at("n"), 2);
  EXPECT_EQ(s[14].at("n"), 4);
  EXPECT_EQ(s[14].at("p"), 4);
  EXPECT_EQ(s[14].at("q"), 3);
}

TEST(CliMonteCarloTest, TooFewTrialsRefused) {
  EXPECT_EQ(run("montecarlo --trials 5").code, 2);
}

TEST(CliTheoryCheckTest, DefaultPasses) {
  const CliRun r = run("theory-check");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(CliTheoryCheckTest, Deterministic) {
  const CliRun a = run("theory-check --cases 1000 --seed 3"), b = run("theory-check --cases 1000 --seed 3");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(CliTheoryCheckTest, InjectedFaultFails) {
  const CliRun r = run("theory-check --inject-fault skip-pinv");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("local LTI match            FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("seed 1"), std::string::npos);
}

TEST(CliConfigTest, FileValuesApplyAndFlagsWin) {
  const fs::path dir = fresh_dir("config");
  std::ofstream(dir / "run.conf") << "# trial settings\nseed = 7\ndims = 2,1,1\nepochs = 250\n";
  const CliRun from_file = run("trial --config " + (dir / "run.conf").string());
  ASSERT_EQ(from_file.code, 0);
  EXPECT_EQ(from_file.out, run("trial --dims 2,1,1 --seed 7").out);
  const CliRun overridden = run("trial --config " + (dir / "run.conf").string() + " --seed 8");
  EXPECT_EQ(overridden.out, run("trial --dims 2,1,1 --seed 8").out);
}

TEST(CliConfigTest, UnknownKeysAndBadValuesRejected) {
  const fs::path dir = fresh_dir("config_bad");
  std::ofstream(dir / "unknown.conf") << "dims = 2,1,1\nlearning_speed = 3\n";
  EXPECT_EQ(run("trial --config " + (dir / "unknown.conf").string()).code, 2);
  std::ofstream(dir / "bad.conf") << "dims = 2,1,1\nepochs = many\n";
  EXPECT_EQ(run("trial --config " + (dir / "bad.conf").string()).code, 2);
  EXPECT_EQ(run("trial --config " + (dir / "missing.conf").string()).code, 2);
}

TEST(CliSeedTest, EnvironmentFallback) {
  EXPECT_EQ(run("trial --dims 2,1,1", "LEO_SEED=7").out, run("trial --dims 2,1,1 --seed 7").out);
  EXPECT_EQ(run("trial --dims 2,1,1 --seed 7", "LEO_SEED=9").out, run("trial --dims 2,1,1 --seed 7").out);
  EXPECT_EQ(run("trial --dims 2,1,1", "LEO_SEED=abc").code, 2);
}

TEST(CliHelpTest, EverySubcommandDocumentsItsKeys) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> subs = {
      {"demo", {"--seed", "--out-dir", "--epochs", "--lr", "--rollout", "--config"}},
      {"trial", {"--dims", "--seed", "--dump-params", "--perturbation-std"}},
      {"montecarlo", {"--dims", "--trials", "--format", "--two-sided", "--parallel", "--rollout"}},
      {"theory-check", {"--cases", "--seed", "--inject-fault"}}};
  for (const auto& [name, keys] : subs) {
    const CliRun r = run(name + " --help");
    EXPECT_EQ(r.code, 0) << name;
    for (const std::string& k : keys) EXPECT_NE(r.out.find(k), std::string::npos) << name << " " << k;
  }
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("nonsense").code, 2);
  EXPECT_EQ(run("--version").code, 0);
}

}  // namespace
