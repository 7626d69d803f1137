#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef BENCHNET_CLI_PATH
#error "BENCHNET_CLI_PATH must be defined by the build"
#endif
#ifndef BENCHNET_FIXTURES_DIR
#error "BENCHNET_FIXTURES_DIR must be defined by the build"
#endif

namespace fs = std::filesystem;

namespace {

const std::string kCli = BENCHNET_CLI_PATH;
const fs::path kFixtures = BENCHNET_FIXTURES_DIR;

int run(const std::string& args, const fs::path& log = {}) {
  std::string cmd = kCli + " " + args;
  if (!log.empty())
    cmd += " > " + log.string() + " 2>&1";
  else
    cmd += " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("clean produces the expected artifacts and refuses silent overwrite") {
  TempDir tmp("benchnet_cli_clean");
  const std::string in = (kFixtures / "raw_fixture.csv").string();
  CHECK(run("clean --input " + in + " --out " + tmp.path.string()) == 0);
  CHECK(fs::exists(tmp.path / "cleaned.csv"));
  CHECK(fs::exists(tmp.path / "report.txt"));
  CHECK(fs::exists(tmp.path / "vocab.json"));

  // second run without --force must fail with the I/O exit code
  CHECK(run("clean --input " + in + " --out " + tmp.path.string()) == 2);
  // and succeed byte-identically with it
  const std::string before = slurp(tmp.path / "cleaned.csv");
  CHECK(run("clean --input " + in + " --out " + tmp.path.string() + " --force") == 0);
  CHECK(slurp(tmp.path / "cleaned.csv") == before);
}

TEST_CASE("cleaning a cleaned file is a fixed point") {
  TempDir a("benchnet_cli_idem_a"), b("benchnet_cli_idem_b");
  const std::string in = (kFixtures / "raw_fixture.csv").string();
  REQUIRE(run("clean --input " + in + " --out " + a.path.string()) == 0);
  REQUIRE(run("clean --input " + (a.path / "cleaned.csv").string() + " --out " +
              b.path.string()) == 0);
  CHECK(slurp(a.path / "cleaned.csv") == slurp(b.path / "cleaned.csv"));
}

TEST_CASE("clean without a target column exits with the config code") {
  TempDir tmp("benchnet_cli_notarget");
  fs::create_directories(tmp.path);
  const fs::path bad = tmp.path / "bad.csv";
  {
    std::ofstream f(bad);
    f << "a,b\n1,2\n";
  }
  CHECK(run("clean --input " + bad.string() + " --out " + (tmp.path / "out").string()) == 3);
}

TEST_CASE("unreadable input exits with the I/O code") {
  TempDir tmp("benchnet_cli_noinput");
  CHECK(run("clean --input /nonexistent/nope.csv --out " + tmp.path.string()) == 2);
}

TEST_CASE("describe prints the layer table for a trapezium mlp") {
  TempDir tmp("benchnet_cli_describe");
  fs::create_directories(tmp.path);
  const fs::path spec = tmp.path / "spec.json";
  {
    std::ofstream f(spec);
    f << R"({"architecture": "tri_mlp", "n": 4, "m": 2, "input_width": 24})";
  }
  const fs::path log = tmp.path / "out.txt";
  CHECK(run("describe --input " + spec.string(), log) == 0);
  const std::string out = slurp(log);
  CHECK(out.find("dense(16)") != std::string::npos);
  CHECK(out.find("dense(8)") != std::string::npos);
  CHECK(out.find("dense(1)") != std::string::npos);
}

TEST_CASE("describe rejects an invalid generator spec with the config code") {
  TempDir tmp("benchnet_cli_badspec");
  fs::create_directories(tmp.path);
  const fs::path spec = tmp.path / "spec.json";
  {
    std::ofstream f(spec);
    f << R"({"architecture": "tri_mlp", "n": 4, "m": 3})";  // n - m <= 1
  }
  CHECK(run("describe --input " + spec.string()) == 3);
}

TEST_CASE("describe handles a multi-stage residual spec") {
  TempDir tmp("benchnet_cli_residual");
  fs::create_directories(tmp.path);
  const fs::path spec = tmp.path / "spec.json";
  {
    std::ofstream f(spec);
    f << R"({"architecture": "residual",
             "stages": [{"r": 2, "p": 6}, {"r": 2, "p": 7}]})";
  }
  const fs::path log = tmp.path / "out.txt";
  CHECK(run("describe --input " + spec.string(), log) == 0);
  const std::string out = slurp(log);
  CHECK(out.find("conv_block(16,16,64)") != std::string::npos);
  CHECK(out.find("identity_block(32,32,128)") != std::string::npos);
}

TEST_CASE("search runs a tiny grid end to end and is repeatable") {
  TempDir clean_dir("benchnet_cli_search_clean");
  TempDir out_a("benchnet_cli_search_a"), out_b("benchnet_cli_search_b");
  const std::string in = (kFixtures / "raw_fixture.csv").string();
  REQUIRE(run("clean --input " + in + " --out " + clean_dir.path.string()) == 0);

  const fs::path grid = clean_dir.path / "grid.json";
  {
    std::ofstream f(grid);
    f << R"({"architectures": ["tri_mlp"], "loss": ["mse"], "optimizer": ["adam"],
             "epochs": [3], "mlp_n": [4], "mlp_m": [2], "activation": ["relu"],
             "seeds": [1, 2]})";
  }
  const std::string cleaned = (clean_dir.path / "cleaned.csv").string();
  REQUIRE(run("search --input " + cleaned + " --grid " + grid.string() + " --out " +
              out_a.path.string()) == 0);
  CHECK(fs::exists(out_a.path / "results_by_r2.csv"));
  CHECK(fs::exists(out_a.path / "results_by_mse.csv"));
  CHECK(fs::exists(out_a.path / "trace_0.csv"));

  REQUIRE(run("search --input " + cleaned + " --grid " + grid.string() + " --out " +
              out_b.path.string()) == 0);
  CHECK(slurp(out_a.path / "results_by_r2.csv") == slurp(out_b.path / "results_by_r2.csv"));
  CHECK(slurp(out_a.path / "trace_0.csv") == slurp(out_b.path / "trace_0.csv"));
}

TEST_CASE("search with an invalid grid document exits with the config code") {
  TempDir clean_dir("benchnet_cli_badgrid_clean");
  TempDir out("benchnet_cli_badgrid_out");
  const std::string in = (kFixtures / "raw_fixture.csv").string();
  REQUIRE(run("clean --input " + in + " --out " + clean_dir.path.string()) == 0);
  const fs::path grid = clean_dir.path / "grid.json";
  {
    std::ofstream f(grid);
    f << "{ not json";
  }
  CHECK(run("search --input " + (clean_dir.path / "cleaned.csv").string() + " --grid " +
            grid.string() + " --out " + out.path.string()) == 3);
}

TEST_CASE("baseline command writes ranked metrics, qq exports, and model files") {
  TempDir clean_dir("benchnet_cli_base_clean");
  TempDir out("benchnet_cli_base_out");
  const std::string in = (kFixtures / "raw_fixture.csv").string();
  REQUIRE(run("clean --input " + in + " --out " + clean_dir.path.string()) == 0);
  REQUIRE(run("baseline --input " + (clean_dir.path / "cleaned.csv").string() + " --out " +
              out.path.string()) == 0);
  for (const char* name : {"baselines.csv", "qq_lr.csv", "qq_rf.csv", "qq_svr.csv",
                           "residuals_lr.csv", "lr_model.json", "rf_model.json",
                           "svr_model.json"})
    CHECK(fs::exists(out.path / name));
  const std::string table = slurp(out.path / "baselines.csv");
  CHECK(table.find("lr") != std::string::npos);
  CHECK(table.find("rf") != std::string::npos);
  CHECK(table.find("svr") != std::string::npos);
}

TEST_CASE("report re-ranks existing results") {
  TempDir clean_dir("benchnet_cli_report_clean");
  TempDir search_dir("benchnet_cli_report_search");
  TempDir out("benchnet_cli_report_out");
  const std::string in = (kFixtures / "raw_fixture.csv").string();
  REQUIRE(run("clean --input " + in + " --out " + clean_dir.path.string()) == 0);
  const fs::path grid = clean_dir.path / "grid.json";
  {
    std::ofstream f(grid);
    f << R"({"architectures": ["tri_mlp"], "loss": ["mse", "mae"], "optimizer": ["adam"],
             "epochs": [2], "mlp_n": [4], "mlp_m": [2], "activation": ["relu"],
             "seeds": [1]})";
  }
  REQUIRE(run("search --input " + (clean_dir.path / "cleaned.csv").string() + " --grid " +
              grid.string() + " --out " + search_dir.path.string()) == 0);
  REQUIRE(run("report --input " + (search_dir.path / "results_by_r2.csv").string() +
              " --out " + out.path.string()) == 0);
  CHECK(fs::exists(out.path / "report_by_r2.csv"));
  CHECK(fs::exists(out.path / "report_by_mse.csv"));
  // the merged table has the same number of data rows as the input
  const std::string merged = slurp(out.path / "report_by_r2.csv");
  const std::string original = slurp(search_dir.path / "results_by_r2.csv");
  CHECK(std::count(merged.begin(), merged.end(), '\n') ==
        std::count(original.begin(), original.end(), '\n'));
}
