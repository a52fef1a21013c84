#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "graphssm/graphssm.hpp"

namespace {

namespace fs = std::filesystem;
using namespace graphssm;

struct Result {
  int code{};
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("graphssm_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string(GRAPHSSM_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

void expect_usage_error(const Result& r) {
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(count_lines(r.err), 1) << r.err;
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
}

TEST_F(Cli, HelpMatchesGolden) {
  for (const std::string sub : {"main", "gen", "verify", "metrics", "run", "bench"}) {
    const Result r = run(sub == "main" ? "--help" : sub + " --help");
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_EQ(r.out, slurp(fs::path(GRAPHSSM_GOLDEN) / ("help_" + sub + ".txt"))) << sub;
  }
}

TEST_F(Cli, UsageErrors) {
  expect_usage_error(run(""));
  expect_usage_error(run("frobnicate"));
  expect_usage_error(run("gen --seed 7"));
  expect_usage_error(run("gen --out " + path("x") + " --bogus 1"));
  expect_usage_error(run("run --variant s9"));
  expect_usage_error(run("verify --instances 0"));
  expect_usage_error(run("bench --backend gpu"));
}

TEST_F(Cli, GenIsDeterministicAndReloads) {
  ASSERT_EQ(run("gen --seed 7 --v 200 --l 16 --out " + path("a.gssm")).code, 0);
  ASSERT_EQ(run("gen --seed 7 --v 200 --l 16 --out " + path("b.gssm")).code, 0);
  EXPECT_EQ(slurp(path("a.gssm")), slurp(path("b.gssm")));
  EXPECT_EQ(slurp(path("a.gssm.labels")), slurp(path("b.gssm.labels")));
  const auto seq = io::load_sequence(path("a.gssm"));
  EXPECT_EQ(seq.size(), 16u);
  EXPECT_EQ(seq.num_nodes(), 200u);
  std::ifstream labels(path("a.gssm.labels"));
  EXPECT_EQ(io::read_labels(labels).labels.size(), 200u);
  ASSERT_EQ(run("gen --seed 8 --v 200 --l 16 --out " + path("c.gssm")).code, 0);
  EXPECT_NE(slurp(path("a.gssm")), slurp(path("c.gssm")));
}

TEST_F(Cli, GenUnwritablePath) {
  const Result r = run("gen --out /nonexistent/dir/task.gssm");
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(count_lines(r.err), 1);
}

TEST_F(Cli, MetricsOnIdenticalSnapshots) {
  Matrix x(3, 2);
  x << 1, 2, 3, 4, -1, 0.5;
  const Graph g(3, {Edge(0, 1), Edge(1, 2)});
  io::save_sequence(path("same.gssm"), SnapshotSequence({{g, x, 1.0}, {g, x, 2.0}, {g, x, 3.0}}));
  const Result r = run("metrics " + path("same.gssm"));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "tc_structure=1.000000\ntc_feature=1.000000\n");
}

TEST_F(Cli, MetricsRejectsBadFiles) {
  expect_usage_error(run("metrics " + path("missing.gssm")));
  std::ofstream(path("bad.gssm")) << "GSSM v1 2 1 2\nT 2\nE 0\nX\n1\n1\nT 1\nE 0\nX\n1\n1\n";
  const Result r = run("metrics " + path("bad.gssm"));
  expect_usage_error(r);
  EXPECT_NE(r.err.find("line"), std::string::npos) << r.err;
}

TEST_F(Cli, VerifyDefaultPasses) {
  const Result r = run("verify");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS projection_oracle"), std::string::npos);
  EXPECT_NE(r.out.find("PASS zoh_oracle"), std::string::npos);
  EXPECT_NE(r.out.find("PASS lambda_convexity"), std::string::npos);
  EXPECT_NE(r.out.find("PASS hippo_reduction"), std::string::npos);
  EXPECT_NE(r.out.find("PASS verify checks=4"), std::string::npos);
}

TEST_F(Cli, VerifyAlphaRouting) {
  const Result with_zero = run("verify --alpha 0 --instances 3 --schedules 20");
  EXPECT_EQ(with_zero.code, 0);
  EXPECT_NE(with_zero.out.find("hippo_reduction"), std::string::npos);
  const Result without = run("verify --alpha 0.5 2 --instances 3 --schedules 20");
  EXPECT_EQ(without.code, 0);
  EXPECT_EQ(without.out.find("hippo_reduction"), std::string::npos);
}

TEST_F(Cli, VerifyCoarseStepsFail) {
  const Result r = run("verify --ode-steps 2 --instances 4 --schedules 20");
  EXPECT_EQ(r.code, 1);
  const auto pos = r.out.find("FAIL projection_oracle value=");
  ASSERT_NE(pos, std::string::npos) << r.out;
  const double value = std::stod(r.out.substr(pos + std::string("FAIL projection_oracle value=").size()));
  EXPECT_GT(value, 1e-3);
  EXPECT_NE(r.out.find("FAIL verify"), std::string::npos);
}

TEST_F(Cli, RunIsDeterministic) {
  const std::string args = "run --seeds 3 4 --init hippo random --v 40 --l 5 --epochs 40 --hidden 6 --state 4";
  ASSERT_EQ(run(args + " --out " + path("a.csv")).code, 0);
  const Result second = run(args + " --out " + path("b.csv"));
  ASSERT_EQ(second.code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  const std::string csv = slurp(path("a.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "seed,variant,init,micro_f1,macro_f1");
  EXPECT_EQ(count_lines(csv), 7);
  EXPECT_NE(second.out.find("micro_f1"), std::string::npos);
  const Result to_stdout = run(args);
  EXPECT_EQ(to_stdout.out, csv);
}

TEST_F(Cli, RunSavesLoadableCheckpoint) {
  ASSERT_EQ(run("run --seeds 1 --v 40 --l 4 --epochs 5 --variant s6 --blocks 2 --save-params " + path("m.params") +
                " --out " + path("r.csv"))
                .code,
            0);
  std::ifstream in(path("m.params"));
  const Model model = model_from_params(io::read_params(in));
  EXPECT_EQ(model.blocks.size(), 2u);
  EXPECT_EQ(model.blocks[0].layer.variant, SsmVariant::S6);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  std::ofstream(path("run.cfg")) << "# small run\nseeds=[5,6]\ninit=[const]\nv=40\nl=4\nepochs=20\nhidden=4\nstate=3\n";
  ASSERT_EQ(run("run --config " + path("run.cfg") + " --out " + path("a.csv")).code, 0);
  std::string csv = slurp(path("a.csv"));
  EXPECT_EQ(count_lines(csv), 5);
  EXPECT_NE(csv.find("5,s4,const"), std::string::npos);
  ASSERT_EQ(run("run --config " + path("run.cfg") + " --seeds 9 --out " + path("b.csv")).code, 0);
  csv = slurp(path("b.csv"));
  EXPECT_EQ(count_lines(csv), 3);
  EXPECT_NE(csv.find("9,s4,const"), std::string::npos);
  std::ofstream(path("bad.cfg")) << "bogus=1\n";
  expect_usage_error(run("run --config " + path("bad.cfg")));
  expect_usage_error(run("run --config " + path("missing.cfg")));
}

TEST_F(Cli, CommittedConfigParses) {
  const Result r = run(std::string("run --config ") + GRAPHSSM_CONFIGS + "/default.cfg --seeds 1 --init hippo --v 40 "
                       "--l 4 --epochs 5");
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(Cli, BenchSchema) {
  const Result r = run("bench --min-log 4 --max-log 6 --lanes 4 --chunk 8 --repeats 1 --threads 2");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "L,lanes,backend,ns_per_element");
  std::vector<std::string> keys;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::string l, lanes, backend, ns;
    std::getline(fields, l, ',');
    std::getline(fields, lanes, ',');
    std::getline(fields, backend, ',');
    std::getline(fields, ns, ',');
    EXPECT_EQ(lanes, "4");
    EXPECT_GT(std::stod(ns), 0.0);
    keys.push_back(l + "/" + backend);
  }
  EXPECT_EQ(keys, (std::vector<std::string>{"16/sequential", "16/parallel", "32/sequential", "32/parallel",
                                            "64/sequential", "64/parallel"}));
  expect_usage_error(run("bench --min-log 8 --max-log 4"));
}

}  // namespace
