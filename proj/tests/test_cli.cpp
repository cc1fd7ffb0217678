#include <catch2/catch_amalgamated.hpp>

#include <pbvp/io.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

// Driven end to end through the installed binary: every test here shells out,
// then inspects exit codes and the files left behind.

namespace fs = std::filesystem;
using pbvp::json;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("pbvp_cli_" + tag + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string(PBVP_CLI_PATH) + " " + args + " > " +
                          (dir / "stdout.txt").string() + " 2> " +
                          (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

json report_of(const fs::path& dir) { return json::parse(slurp(dir / "report.json")); }

void write_doc(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

// Rows of a CSV file, split on commas, header dropped.
std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

const char* kTrivialLinear = R"({
  "schema_version": "1",
  "kind": "linear",
  "operator": {"eigenvalues": [1.0]},
  "w": 6.283185307179586,
  "alpha": [[0.0, 0.0]],
  "settings": {"grid_size": 64}
})";

const char* kObstructedLinear = R"({
  "schema_version": "1",
  "kind": "linear",
  "operator": {"eigenvalues": [1.0]},
  "w": 6.283185307179586,
  "alpha": [[0.0, 0.0]],
  "forcing": {"trig": [{
    "x": [{"a": 1.0, "b": 0.0, "omega": -1.0}],
    "y": [{"a": 0.0, "b": 1.0, "omega": -1.0}]
  }]},
  "settings": {"grid_size": 256}
})";

const char* kVdpSmall = R"({
  "schema_version": "1",
  "kind": "vdp",
  "vdp": {"n_modes": 1, "eps": 0.01}
})";

}  // namespace

TEST_CASE("solve-linear on trivial data exits cleanly with a zero trajectory", "[cli]") {
  const fs::path dir = fresh_dir("trivial");
  write_doc(dir / "problem.json", kTrivialLinear);
  const int code = run_cli("solve-linear --input " + (dir / "problem.json").string() +
                               " --out-dir " + dir.string(),
                           dir);
  REQUIRE(code == 0);

  const json rep = report_of(dir);
  REQUIRE(rep.at("command") == "solve-linear");
  REQUIRE(rep.at("solvability").at("solvable") == true);
  REQUIRE(rep.at("verification").at("boundary_residual").get<double>() <= 1e-14);
  REQUIRE(rep.at("green_forms_gap").get<double>() <= 1e-12);

  const auto rows = csv_rows(dir / "trajectory.csv");
  REQUIRE(rows.size() == 65);
  for (const auto& row : rows) {
    REQUIRE(row.size() == 3);
    REQUIRE(row[1] == "0");
    REQUIRE(row[2] == "0");
  }
}

TEST_CASE("solve-linear reports obstructed data through exit code 3", "[cli]") {
  const fs::path dir = fresh_dir("obstructed");
  write_doc(dir / "problem.json", kObstructedLinear);
  const int code = run_cli("solve-linear --input " + (dir / "problem.json").string() +
                               " --out-dir " + dir.string(),
                           dir);
  REQUIRE(code == 3);

  const json rep = report_of(dir);
  REQUIRE(rep.at("solvability").at("pseudo_only") == true);
  const double obstruction = rep.at("solvability").at("obstruction_norm").get<double>();
  REQUIRE(std::abs(obstruction - pbvp::two_pi) <= 1e-8);
  REQUIRE(std::abs(rep.at("pseudo_residual").get<double>() - obstruction) <= 1e-10);
  REQUIRE(fs::exists(dir / "trajectory.csv"));  // best-effort output still lands
}

TEST_CASE("bad invocations exit with code 1", "[cli]") {
  const fs::path dir = fresh_dir("bad");

  SECTION("truncated document") {
    write_doc(dir / "broken.json", "{\"schema_version\": \"1\", ");
    REQUIRE(run_cli("solve-linear --input " + (dir / "broken.json").string() +
                        " --out-dir " + dir.string(),
                    dir) == 1);
  }

  SECTION("missing input file") {
    REQUIRE(run_cli("solve-linear --input " + (dir / "absent.json").string(), dir) == 1);
  }

  SECTION("unknown flag") {
    REQUIRE(run_cli("solve-linear --frobnicate", dir) == 1);
  }

  SECTION("no subcommand") {
    REQUIRE(run_cli("", dir) == 1);
  }

  SECTION("kind mismatch") {
    write_doc(dir / "vdp.json", kVdpSmall);
    REQUIRE(run_cli("solve-linear --input " + (dir / "vdp.json").string() + " --out-dir " +
                        dir.string(),
                    dir) == 1);
  }
}

TEST_CASE("solve-nonlinear corrects the oscillator at small strength", "[cli]") {
  const fs::path dir = fresh_dir("vdp");
  write_doc(dir / "problem.json", kVdpSmall);
  const int code = run_cli("solve-nonlinear --input " + (dir / "problem.json").string() +
                               " --out-dir " + dir.string(),
                           dir);
  REQUIRE(code == 0);

  const json rep = report_of(dir);
  REQUIRE(rep.at("converged") == true);
  REQUIRE(rep.at("newton_ran") == true);
  REQUIRE(rep.at("eps").get<double>() == 0.01);
  REQUIRE(rep.at("history").size() >= 2);
  REQUIRE(rep.at("verification").at("boundary_residual").get<double>() <= 1e-10);

  const json amplitudes = rep.at("root").at("amplitudes");
  const double r = std::hypot(amplitudes.at(0).at(0).get<double>(),
                              amplitudes.at(0).at(1).get<double>());
  REQUIRE(std::abs(r - 2.0) <= 1e-8);

  const auto roots = csv_rows(dir / "roots.csv");
  REQUIRE(roots.size() == 1);
  REQUIRE(std::abs(std::strtod(roots[0][3].c_str(), nullptr) - 2.0) <= 1e-8);
}

TEST_CASE("solve-nonlinear at zero strength returns the generating orbit", "[cli]") {
  const fs::path dir = fresh_dir("eps0");
  write_doc(dir / "problem.json", R"({
    "schema_version": "1",
    "kind": "vdp",
    "vdp": {"n_modes": 1, "eps": 0.0}
  })");
  REQUIRE(run_cli("solve-nonlinear --input " + (dir / "problem.json").string() +
                      " --out-dir " + dir.string(),
                  dir) == 0);

  // Every row sits on the circle of radius 2.
  for (const auto& row : csv_rows(dir / "trajectory.csv")) {
    const double x = std::strtod(row[1].c_str(), nullptr);
    const double y = std::strtod(row[2].c_str(), nullptr);
    REQUIRE(std::abs(std::hypot(x, y) - 2.0) <= 1e-10);
  }
}

TEST_CASE("solve-nonlinear surfaces a diverging iteration as exit code 4", "[cli]") {
  const fs::path dir = fresh_dir("diverge");
  write_doc(dir / "problem.json", R"({
    "schema_version": "1",
    "kind": "vdp",
    "vdp": {"n_modes": 1, "eps": 0.01, "support": [1],
            "start": [[1.0, 0.0]], "skip_newton": true}
  })");
  const int code = run_cli("solve-nonlinear --input " + (dir / "problem.json").string() +
                               " --out-dir " + dir.string(),
                           dir);
  REQUIRE(code == 4);

  const json rep = report_of(dir);
  REQUIRE(rep.at("converged") == false);
  REQUIRE(rep.at("newton_ran") == false);
  REQUIRE(!rep.at("error").get<std::string>().empty());
  REQUIRE(rep.at("history").size() >= 5);
}

TEST_CASE("vdp-torus verifies the predicted radii", "[cli]") {
  struct Case {
    std::string flags;
    double radius;
  };
  const Case cases[] = {
      {"--n-modes 1", 2.0},
      {"--n-modes 2", 2.0 / std::sqrt(3.0)},
      {"--n-modes 5", 2.0 / 3.0},
  };
  for (const Case& c : cases) {
    const fs::path dir = fresh_dir("torus");
    REQUIRE(run_cli("vdp-torus " + c.flags + " --out-dir " + dir.string(), dir) == 0);
    const json rep = report_of(dir);
    REQUIRE(rep.at("torus").at("matches_formula") == true);
    REQUIRE(rep.at("cross_check").at("consistent") == true);
    REQUIRE(std::abs(rep.at("torus").at("shared_radius").get<double>() - c.radius) <= 1e-9);
    for (const auto& row : csv_rows(dir / "roots.csv"))
      REQUIRE(std::abs(std::strtod(row[3].c_str(), nullptr) - c.radius) <= 1e-9);
  }
}

TEST_CASE("vdp-torus restricted to a subset pins the other modes", "[cli]") {
  const fs::path dir = fresh_dir("support");
  REQUIRE(run_cli("vdp-torus --n-modes 3 --support 2 --out-dir " + dir.string(), dir) == 0);
  const auto rows = csv_rows(dir / "roots.csv");
  REQUIRE(rows.size() == 3);
  REQUIRE(std::strtod(rows[0][3].c_str(), nullptr) == 0.0);
  REQUIRE(std::abs(std::strtod(rows[1][3].c_str(), nullptr) - 2.0) <= 1e-9);
  REQUIRE(std::strtod(rows[2][3].c_str(), nullptr) == 0.0);
}

TEST_CASE("vdp-torus under an impossible tolerance exits 5 but still reports", "[cli]") {
  const fs::path dir = fresh_dir("tight");
  REQUIRE(run_cli("vdp-torus --n-modes 2 --tol 1e-18 --out-dir " + dir.string(), dir) == 5);
  const json rep = report_of(dir);
  REQUIRE(rep.at("torus").at("matches_formula") == false);
  REQUIRE(fs::exists(dir / "roots.csv"));
}

TEST_CASE("repeated runs produce byte-identical outputs", "[cli]") {
  const fs::path d1 = fresh_dir("det1");
  const fs::path d2 = fresh_dir("det2");
  write_doc(d1 / "problem.json", kVdpSmall);
  write_doc(d2 / "problem.json", kVdpSmall);
  REQUIRE(run_cli("solve-nonlinear --input " + (d1 / "problem.json").string() +
                      " --out-dir " + d1.string(),
                  d1) == 0);
  REQUIRE(run_cli("solve-nonlinear --input " + (d2 / "problem.json").string() +
                      " --out-dir " + d2.string(),
                  d2) == 0);
  REQUIRE(slurp(d1 / "trajectory.csv") == slurp(d2 / "trajectory.csv"));
  REQUIRE(slurp(d1 / "roots.csv") == slurp(d2 / "roots.csv"));
}
