#include "udn/matrix.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(UDN_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "udn_cli_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("cli success paths") {
  const auto dir = scratch();
  const std::string d = dir.string();
  CHECK(run("--help") == 0);
  CHECK(run("generate --n 60 --d 40 --sigma 0.05 --seed 3 --out-dir " + d) == 0);
  CHECK(fs::exists(dir / "Z.csv"));
  CHECK(fs::exists(dir / "labels.csv"));
  CHECK(run("denoise --input " + d + "/Z.csv --output " + d + "/Xhat.csv --rank 3 --sigma 0.05 --clean " + d +
            "/X.csv --report " + d + "/denoise.json") == 0);
  CHECK(run("metrics --a " + d + "/Xhat.csv --b " + d + "/X.csv") == 0);
  CHECK(run("cluster --input " + d + "/Xhat.csv --k 2 --truth " + d + "/labels.csv") == 0);
  CHECK(run("laplacian --input " + d + "/Xhat.csv --bandwidth 0.2 --truth " + d + "/labels.csv") == 0);
  CHECK(run("bounds --mode theorem1 --n 100 --d 1000 --sigma 0.05 --lambda-r 5") == 0);
  CHECK(run("bounds --mode lower --n 10 --d 20 --sigma 0.5 --trials 5 --csv " + d + "/lb.csv") == 0);
  CHECK(run("bounds --mode loo --input " + d + "/Z.csv --rank 3 --rows 0,5") == 0);

  std::ofstream(dir / "cfg.json") << R"({"experiment": "fig1b", "grid": {"n": [20], "d": [10]}, "trials": 1})";
  CHECK(run("experiment --config " + d + "/cfg.json --out " + d + "/exp") == 0);
  CHECK(fs::exists(dir / "exp" / "fig1b.csv"));
  CHECK(fs::exists(dir / "exp" / "manifest.json"));
}

TEST_CASE("cli configuration errors exit with 2") {
  const auto dir = scratch();
  const std::string d = dir.string();
  CHECK(run("") != 0);
  CHECK(run("frobnicate") == 2);
  CHECK(run("generate --n notanumber") == 2);
  CHECK(run("metrics --a /nonexistent.csv --b /nonexistent.csv") == 2);
  std::ofstream(dir / "empty_grid.json") << R"({"experiment": "fig1c", "grid": {"sigma": []}})";
  CHECK(run("experiment --config " + d + "/empty_grid.json --out " + d + "/bad") == 2);
  std::ofstream(dir / "zero_sigma.json") << R"({"experiment": "fig1c", "grid": {"sigma": [0.0]}})";
  CHECK(run("experiment --config " + d + "/zero_sigma.json --out " + d + "/bad") == 2);
  std::ofstream(dir / "broken.json") << "{not json";
  CHECK(run("experiment --config " + d + "/broken.json --out " + d + "/bad") == 2);
  CHECK(run("bounds --mode theorem1 --n 100 --d 100 --sigma 0.1 --lambda-r 0") == 2);
}

TEST_CASE("cli numerical failures exit with 3") {
  const auto dir = scratch();
  std::ofstream(dir / "nan.csv") << "1,2\nnan,4\n";
  CHECK(run("denoise --input " + (dir / "nan.csv").string() + " --output " + (dir / "o.csv").string() +
            " --rank 1") == 3);
  udn::io::write_csv(dir / "zeros.csv", udn::Matrix::Zero(20, 10));
  CHECK(run("denoise --input " + (dir / "zeros.csv").string() + " --output " + (dir / "o.csv").string() +
            " --rank 0 --sigma 0.1") == 3);
}
