#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(GRSLAB_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "grslab_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  REQUIRE(f.good());
}

}  // namespace

TEST_CASE("configuration mistakes exit with the config code") {
  const fs::path cfg = work_dir() / "bad.cfg";
  spit(cfg, "grid.bogus = 3\n");
  CHECK(run_cli("verify --config " + cfg.string()).exit_code == 2);

  CHECK(run_cli("spectrum --model torus").exit_code == 2);
  CHECK(run_cli("stability --model generic:ellipsoid").exit_code == 2);
  CHECK(run_cli("verify --no-such-flag").exit_code == 2);
}

TEST_CASE("an unbuildable model exits with the build code") {
  CHECK(run_cli("spectrum --model product:n1=2,r1=1,n2=3,r2=1").exit_code == 3);
}

TEST_CASE("the spectrum command writes the documented report and table") {
  const fs::path out = work_dir() / "spec.json";
  const fs::path csv = work_dir() / "spec.csv";
  const std::string args =
      "spectrum --model s2 --L 1 --res 12x24 --seed 7 --out " + out.string();

  const CliResult first = run_cli(args);
  REQUIRE(first.exit_code == 0);
  REQUIRE(fs::exists(out));
  REQUIRE(fs::exists(csv));

  const nlohmann::json doc = nlohmann::json::parse(slurp(out));
  CHECK(doc.at("tool_version") == "grslab 1.0.0");
  CHECK(doc.at("config_echo").at("grid.L") == "1");
  CHECK(doc.at("model").at("name") == "s2");
  CHECK(doc.at("model").at("exact_soliton") == true);
  CHECK(doc.at("model").at("curvature") == "closed-form");
  CHECK(doc.at("grid").at("L") == 1);
  CHECK(doc.at("verdict") == "pass");

  bool saw_lambda1 = false;
  bool saw_table = false;
  for (const auto& entry : doc.at("results")) {
    if (entry.value("name", "") == "scalar_spectrum") {
      for (const auto& v : entry.at("eigenvalues"))
        if (std::abs(v.get<double>() + 2.0) < 1e-6) saw_lambda1 = true;
    }
    if (entry.value("name", "") == "eigenvalue_table") {
      saw_table = true;
      CHECK(entry.at("written_to") == csv.string());
    }
  }
  CHECK(saw_lambda1);
  CHECK(saw_table);

  const std::string csv_text = slurp(csv);
  CHECK(csv_text.rfind("index,eigenvalue,residual,tags\n", 0) == 0);

  // Rerunning the same command reproduces both artifacts byte for byte.
  const std::string json_bytes = slurp(out);
  const CliResult second = run_cli(args);
  REQUIRE(second.exit_code == 0);
  CHECK(slurp(out) == json_bytes);
  CHECK(slurp(csv) == csv_text);
}

TEST_CASE("command-line flags override config-file entries") {
  const fs::path cfg = work_dir() / "override.cfg";
  spit(cfg, "# run settings\nmodel.spec = s2\ngrid.L = 2\ngrid.res = 12x24\n");
  const fs::path out = work_dir() / "override.json";
  const CliResult r =
      run_cli("spectrum --config " + cfg.string() + " --L 1 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  const nlohmann::json doc = nlohmann::json::parse(slurp(out));
  CHECK(doc.at("config_echo").at("grid.L") == "1");
  CHECK(doc.at("grid").at("L") == 1);
}

TEST_CASE("verify passes on an exact fixture") {
  const fs::path out = work_dir() / "verify.json";
  const CliResult r = run_cli("verify --model s2 --L 1 --res 8x16 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  const nlohmann::json doc = nlohmann::json::parse(slurp(out));
  CHECK(doc.at("verdict") == "pass");
  CHECK(!doc.at("results").empty());
}

TEST_CASE("stability certifies the sphere at level one") {
  const fs::path out = work_dir() / "stability.json";
  const CliResult r =
      run_cli("stability --model s2 --L 1 --res 12x24 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  const nlohmann::json doc = nlohmann::json::parse(slurp(out));
  CHECK(doc.at("verdict") == "stable (sufficient, L=1)");

  bool saw_scan = false;
  for (const auto& entry : doc.at("results")) {
    if (entry.value("name", "") == "necessary_scan") {
      saw_scan = true;
      CHECK(entry.at("rows").empty());
    }
    if (entry.value("name", "") == "sufficient_check")
      CHECK(entry.at("verdict") == "stable (sufficient, L=1)");
  }
  CHECK(saw_scan);
}

TEST_CASE("reports stream to stdout when no output path is given") {
  const CliResult r = run_cli("spectrum --model s2 --L 1 --res 12x24");
  REQUIRE(r.exit_code == 0);
  const nlohmann::json doc = nlohmann::json::parse(r.out);
  CHECK(doc.at("config_echo").at("out.json") == "-");
  for (const auto& entry : doc.at("results")) {
    if (entry.value("name", "") == "eigenvalue_table")
      CHECK(entry.at("written_to").is_null());
  }
}
