#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "contagion/cascade.hpp"
#include "contagion/io.hpp"

using namespace contagion;

namespace {

const std::filesystem::path& workdir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() / ("contagion_cli_" + std::to_string(::getpid()));
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& leaf) { return (workdir() / leaf).string(); }

struct Outcome {
  int code;
  std::string out;
};

Outcome lab(const std::string& args) {
  const std::string cmd = std::string(CONTAGION_LAB) + " " + args + " 2>" + at("stderr.txt");
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return {-1, {}};
  std::string out;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, GenIsSeedDeterministic) {
  ASSERT_EQ(lab("gen -n 400 --seed 3 -o " + at("a.txt")).code, 0);
  ASSERT_EQ(lab("gen -n 400 --seed 3 --workers 2 -o " + at("b.txt")).code, 0);
  ASSERT_EQ(lab("gen -n 400 --seed 4 -o " + at("c.txt")).code, 0);
  EXPECT_EQ(slurp(at("a.txt")), slurp(at("b.txt")));
  EXPECT_NE(slurp(at("a.txt")), slurp(at("c.txt")));
  const auto net = deserialize_text(slurp(at("a.txt")));
  EXPECT_EQ(net.size(), 400u);
}

TEST(Cli, GenJsonMatchesText) {
  const Outcome text = lab("gen -n 200 --seed 9 --exposures pareto:2.5 --capital max-exposure");
  const Outcome json = lab("gen -n 200 --seed 9 --exposures pareto:2.5 --capital max-exposure --format json");
  ASSERT_EQ(text.code, 0);
  ASSERT_EQ(json.code, 0);
  EXPECT_EQ(serialize_text(deserialize_json(json.out)), text.out);
}

TEST(Cli, CascadeAgreesWithLibrary) {
  ASSERT_EQ(lab("gen -n 2000 --seed 5 -o " + at("net.txt")).code, 0);
  const Outcome r = lab("cascade " + at("net.txt") + " --shock uniform:0.02 --seed 7 --rounds-csv " + at("rounds.csv"));
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  const auto net = deserialize_text(slurp(at("net.txt")));
  const auto ref = run_cascade(net, ShockModel::uniform(0.02, 0), 0.0, 7);
  EXPECT_EQ(j["defaulted"].get<std::vector<BankId>>(), ref.defaulted);
  EXPECT_DOUBLE_EQ(j["final_fraction"].get<double>(), ref.final_fraction);
  const std::string rounds = slurp(at("rounds.csv"));
  EXPECT_EQ(rounds.rfind("round,new_defaults,cumulative\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(rounds.begin(), rounds.end(), '\n')), ref.per_round_sizes.size() + 1);
}

TEST(Cli, FixedPointReportsTheRoot) {
  const Outcome r = lab("fixedpoint --tau const:2 -p 0.01 --curve " + at("curve.csv") + " --curve-points 50");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["z_hat"].get<double>(), 1.94433, 5e-4);
  EXPECT_NEAR(j["final_importance"].get<double>(), 0.845434, 5e-4);
  EXPECT_EQ(j["mode"], "quadrature");
  const std::string curve = slurp(at("curve.csv"));
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 52);
}

TEST(Cli, ResilienceVerdicts) {
  const Outcome up = lab("resilience --tau buffered:0.1 --fixed-point --amplification");
  ASSERT_EQ(up.code, 0);
  const auto a = nlohmann::json::parse(up.out);
  EXPECT_EQ(a["threshold_rule"]["verdict"], "resilient");
  EXPECT_EQ(a["fixed_point"]["verdict"], "resilient");
  EXPECT_GE(a["amplification"]["factor"].get<double>(), 1.0);
  const Outcome down = lab("resilience --tau buffered:-0.1");
  ASSERT_EQ(down.code, 0);
  EXPECT_EQ(nlohmann::json::parse(down.out)["threshold_rule"]["verdict"], "non-resilient");
  const Outcome marg = lab("resilience --tau buffered:-0.1 --tail marginals");
  EXPECT_EQ(nlohmann::json::parse(marg.out)["threshold_rule"]["verdict"], "indeterminate");
}

TEST(Cli, CapitalRequirementsOneRowPerBank) {
  ASSERT_EQ(lab("gen -n 300 --seed 2 --exposures pareto:2.5277 -o " + at("exp.txt")).code, 0);
  for (const std::string rule : {"robust", "average", "no-contagious-links"}) {
    const Outcome r = lab("capreq " + at("exp.txt") + " --rule " + rule);
    ASSERT_EQ(r.code, 0) << rule;
    EXPECT_EQ(r.out.rfind("id,w_minus,tau,mu,requirement,mu_estimated\n", 0), 0u);
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 301) << rule;
  }
}

TEST(Cli, ExperimentWritesManifest) {
  {
    std::ofstream f(at("spec.txt"));
    f << "name = average_fraction\nn = 200\nrepetitions = 2\ndelta = -0.1, 0\np = 0.02\n";
  }
  const Outcome print = lab("experiment --config " + at("spec.txt") + " --seed 77 --print-spec");
  ASSERT_EQ(print.code, 0);
  EXPECT_NE(print.out.find("seed = 77\n"), std::string::npos);
  const Outcome r = lab("experiment --config " + at("spec.txt") + " --out " + at("exp_out"));
  ASSERT_EQ(r.code, 0);
  const auto m = nlohmann::json::parse(r.out);
  EXPECT_EQ(m["status"], "complete");
  EXPECT_TRUE(std::filesystem::exists(at("exp_out") + "/average_fraction.csv"));
  EXPECT_TRUE(std::filesystem::exists(at("exp_out") + "/manifest.json"));
}

TEST(Cli, ErrorsGiveNonzeroExit) {
  {
    std::ofstream f(at("bad.txt"));
    f << "this is not a network\n";
  }
  EXPECT_EQ(lab("cascade " + at("bad.txt")).code, 2);
  EXPECT_EQ(lab("cascade " + at("missing.txt")).code, 1);
  EXPECT_EQ(lab("gen --capital wobbly").code, 1);
  EXPECT_NE(lab("nosuchcommand").code, 0);
  EXPECT_NE(lab("").code, 0);
  EXPECT_EQ(lab("experiment").code, 1);
}
