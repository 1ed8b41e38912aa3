#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output; // stdout and stderr combined
};

CommandResult run_cli(const std::string& args) {
  const std::string cmd = std::string(PREDICT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CommandResult res;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe)) res.output.append(buf, got);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string fresh_dir(const std::string& tag) {
  std::string tmpl = (fs::temp_directory_path() / ("predict_cli_" + tag + "_XXXXXX")).string();
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  REQUIRE(mkdtemp(buf.data()) != nullptr);
  return std::string(buf.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

int data_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int rows = -1; // discount the header
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  return rows;
}

} // namespace

TEST_CASE("version and experiments subcommands") {
  const auto v = run_cli("version");
  CHECK(v.exit_code == 0);
  CHECK(v.output.find("0.1.0") != std::string::npos);

  const auto e = run_cli("experiments");
  CHECK(e.exit_code == 0);
  for (const char* name : {"linear-interpolant", "linear-evolve", "nonlinear-covariance",
                           "nonlinear-effective", "nonlinear-ensemble", "nonlinear-compare",
                           "spread"})
    CHECK(e.output.find(name) != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("").exit_code == 2);                       // no subcommand
  CHECK(run_cli("run").exit_code == 2);                    // no experiment selected
  CHECK(run_cli("frobnicate").exit_code == 2);             // unknown subcommand
  const auto bad_set = run_cli("run --experiment spread --set ensemble.cuont=5");
  CHECK(bad_set.exit_code == 2);
  CHECK(bad_set.output.find("unknown config key") != std::string::npos);
  CHECK(run_cli("run --experiment spread --set no_equals_sign").exit_code == 2);
  CHECK(run_cli("run --experiment bogus").exit_code == 2); // unknown experiment
  const auto neg = run_cli("run --experiment spread --set ensemble.count=-5");
  CHECK(neg.exit_code == 2);
}

TEST_CASE("config files are honored and flags override them") {
  const std::string dir = fresh_dir("cfg");
  const std::string cfg_path = dir + "/config.json";
  {
    std::ofstream out(cfg_path);
    out << R"({"experiment":"linear-interpolant","seed":5,"output_dir":")" << dir << R"("})";
  }
  const auto res = run_cli("run --config " + cfg_path + " --seed 99");
  CHECK(res.exit_code == 0);
  const json manifest = json::parse(slurp(fs::path(dir) / "manifest.json"));
  CHECK(manifest.at("master_seed").get<std::uint64_t>() == 99); // flag wins
  CHECK(manifest.at("experiment") == "linear-interpolant");

  // a config file with an unknown key is a config error
  const std::string bad_path = dir + "/bad.json";
  {
    std::ofstream out(bad_path);
    out << R"({"experiment":"spread","sede":5})";
  }
  const auto bad = run_cli("run --config " + bad_path);
  CHECK(bad.exit_code == 2);
  CHECK(bad.output.find("unknown config key") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("numerical failures exit with code 1") {
  const std::string dir = fresh_dir("ill");
  const auto res =
      run_cli("run --experiment linear-interpolant --out " + dir + " --set linear.sigma_frac=50");
  CHECK(res.exit_code == 1);
  fs::remove_all(dir);
}

TEST_CASE("the interpolant experiment writes the documented files") {
  const std::string dir = fresh_dir("interp");
  const auto res = run_cli("run --experiment linear-interpolant --out " + dir + " --seed 14");
  REQUIRE(res.exit_code == 0);

  for (const char* label : {"1", "0.5", "0.1"}) {
    const fs::path interp = fs::path(dir) / (std::string("interpolant_sigma") + label + ".csv");
    const fs::path points = fs::path(dir) / (std::string("points_sigma") + label + ".csv");
    REQUIRE(fs::exists(interp));
    REQUIRE(fs::exists(points));
    CHECK(first_line(interp) == "x,interp_p,interp_q");
    CHECK(first_line(points) == "x_alpha,V_p,V_q");
    CHECK(data_rows(interp) == 256);
    CHECK(data_rows(points) == 5);
  }

  const json manifest = json::parse(slurp(fs::path(dir) / "manifest.json"));
  CHECK(manifest.at("master_seed").get<std::uint64_t>() == 14);
  CHECK(manifest.at("sub_seeds").contains("linear_values"));
  fs::remove_all(dir);
}

TEST_CASE("evolution runs are deterministic across processes and thread counts") {
  const std::string dir1 = fresh_dir("evolve1");
  const std::string dir2 = fresh_dir("evolve2");
  REQUIRE(run_cli("run --experiment linear-evolve --out " + dir1 + " --threads 1").exit_code == 0);
  REQUIRE(run_cli("run --experiment linear-evolve --out " + dir2 + " --threads 2").exit_code == 0);
  for (const char* label : {"1", "0.5", "0.1"}) {
    const std::string name = std::string("evolve_sigma") + label + ".csv";
    CAPTURE(name);
    const std::string a = slurp(fs::path(dir1) / name);
    const std::string b = slurp(fs::path(dir2) / name);
    REQUIRE(!a.empty());
    CHECK(a == b);
    CHECK(a.substr(0, 2) == "t,");
  }
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("a shortened covariance run produces the documented table") {
  const std::string dir = fresh_dir("cov");
  const auto res = run_cli(
      "run --experiment nonlinear-covariance --out " + dir +
      " --set chain.sweeps=20000 --set chain.burn_in=2000 --set chain.thinning=5"
      " --set chain.replicas=2 --set chain.batches=10");
  REQUIRE(res.exit_code == 0);
  const fs::path csv = fs::path(dir) / "covariance.csv";
  REQUIRE(fs::exists(csv));
  CHECK(first_line(csv) == "r,c,stderr");
  CHECK(data_rows(csv) == 16);
  fs::remove_all(dir);
}

TEST_CASE("a shortened spread run produces the documented histogram table") {
  const std::string dir = fresh_dir("spread");
  const auto res = run_cli(
      "run --experiment spread --out " + dir +
      " --set ensemble.count=16 --set ensemble.t_end=0.1 --set ensemble.member_spacing=5"
      " --set ensemble.burn_in=500 --set ensemble.replicas=2 --set ensemble.batches=4");
  REQUIRE(res.exit_code == 0);
  const fs::path csv = fs::path(dir) / "spread.csv";
  REQUIRE(fs::exists(csv));
  CHECK(first_line(csv) == "t,bin_lo,bin_hi,density");
  CHECK(data_rows(csv) == 3 * 40); // three time levels, forty bins each
  fs::remove_all(dir);
}
