// End-to-end tests of the command-line tool: exit codes, file outputs, and
// run-to-run determinism. Each test shells out to the built binary.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kcontract/io.hpp"

using namespace kcontract;
namespace fs = std::filesystem;

namespace {

const std::string kCli = KCONTRACT_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("kcontract_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_example31_config(const std::string& path, bool conservative = false) {
  std::ofstream out(path);
  out << R"({"builtin": "example31")";
  if (conservative) out << R"(, "params": {"d1_bound": "conservative"})";
  out << "}\n";
}

}  // namespace

TEST_CASE("compound subcommand") {
  TempDir tmp;
  write_matrix_csv(tmp.file("I4.csv"), Eigen::MatrixXd::Identity(4, 4));
  CHECK(run("compound " + tmp.file("I4.csv") + " --k 2 --mode mult --out " +
            tmp.file("out.csv")) == 0);
  CHECK(read_matrix_csv(tmp.file("out.csv")).isApprox(Eigen::MatrixXd::Identity(6, 6)));

  write_matrix_csv(tmp.file("D.csv"), Eigen::Vector3d(1, 2, 3).asDiagonal());
  CHECK(run("compound " + tmp.file("D.csv") + " --k 2 --mode add --out " +
            tmp.file("add.csv")) == 0);
  CHECK(read_matrix_csv(tmp.file("add.csv"))
            .isApprox(Eigen::Vector3d(3, 4, 5).asDiagonal().toDenseMatrix()));

  Eigen::MatrixXd A(2, 3);
  A << 1, 2, 3, 4, 5, 6;
  write_matrix_csv(tmp.file("A.csv"), A);
  CHECK(run("compound " + tmp.file("A.csv") + " --k 2 --out " + tmp.file("mult.csv")) == 0);
  Eigen::MatrixXd M = read_matrix_csv(tmp.file("mult.csv"));
  CHECK(M(0, 0) == -3);
  CHECK(M(0, 1) == -6);
  CHECK(M(0, 2) == -3);

  // error paths: bad mode, malformed csv, bad k
  CHECK(run("compound " + tmp.file("A.csv") + " --k 2 --mode nope --out " + tmp.file("x1.csv") ) == 1);
  CHECK(run("compound " + tmp.file("A.csv") + " --k 5 --out " + tmp.file("x2.csv") ) == 1);
  std::ofstream bad(tmp.file("bad.csv"));
  bad << "1,x\n";
  bad.close();
  CHECK(run("compound " + tmp.file("bad.csv") + " --k 1 --out " + tmp.file("x3.csv") ) == 1);
}

TEST_CASE("certify subcommand exit codes and report") {
  TempDir tmp;
  write_example31_config(tmp.file("ref.json"));
  write_example31_config(tmp.file("cons.json"), true);

  CHECK(run("certify " + tmp.file("ref.json") + " --k 2 --out " + tmp.file("ref_out")) == 0);
  nlohmann::json cert;
  std::ifstream(tmp.file("ref_out/certificate.json")) >> cert;
  CHECK(cert["verdict"] == "certified");
  CHECK(cert["alpha_k"] == 1.5);
  CHECK(cert["mode"] == "biochem");

  CHECK(run("certify " + tmp.file("cons.json") + " --k 2 --out " + tmp.file("cons_out")) == 2);
  std::ifstream(tmp.file("cons_out/certificate.json")) >> cert;
  CHECK(cert["verdict"] == "not-certified");
  CHECK(cert["alpha_k"] == 1.0);

  // manifest precedes results
  CHECK(fs::exists(tmp.file("ref_out/manifest.json")));

  CHECK(run("certify " + tmp.file("missing.json") + " --k 2 --out " + tmp.file("err_out") ) == 1);
}

TEST_CASE("certify subcommand on an expression model") {
  TempDir tmp;
  std::ofstream cfg(tmp.file("toy.json"));
  cfg << R"({"name": "toy", "n": 1, "m": 1, "p": 1,
             "f": ["-x1 + u1"], "g": ["x1"], "phi": ["0"],
             "state_domain": {"low": [-1], "high": [1]},
             "input_domain": {"low": [-1], "high": [1]}})";
  cfg.close();
  CHECK(run("certify " + tmp.file("toy.json") + " --k 1 --grid 5 --out " +
            tmp.file("toy_out")) == 0);
  nlohmann::json cert;
  std::ifstream(tmp.file("toy_out/certificate.json")) >> cert;
  CHECK(cert["verdict"] == "certified");
  CHECK(cert["rate"] == doctest::Approx(0.5));
}

TEST_CASE("simulate subcommand") {
  TempDir tmp;
  write_example31_config(tmp.file("m.json"));

  SUBCASE("fixed start at the origin stays put") {
    CHECK(run("simulate " + tmp.file("m.json") + " --x0 0,0,0 --tend 5 --out " +
              tmp.file("s1")) == 0);
    Eigen::MatrixXd traj = [&] {
      std::ifstream in(tmp.file("s1/traj_1.csv"));
      std::string header;
      std::getline(in, header);
      CHECK(header == "t,x1,x2,x3");
      std::vector<double> vals;
      std::string line;
      std::size_t rows = 0;
      while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        ++rows;
      }
      return Eigen::MatrixXd(Eigen::Map<Eigen::MatrixXd>(vals.data(), 4, rows).transpose());
    }();
    CHECK(traj.rightCols(3).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("sampled batch with volume traces and plot") {
    CHECK(run("simulate " + tmp.file("m.json") +
              " --sample 3 --seed 42 --tend 20 --volume 2 --plot --out " + tmp.file("s2")) == 0);
    for (int i = 1; i <= 3; ++i) {
      CHECK(fs::exists(tmp.file("s2/traj_" + std::to_string(i) + ".csv")));
      CHECK(fs::exists(tmp.file("s2/volume_" + std::to_string(i) + ".csv")));
    }
    CHECK(fs::exists(tmp.file("s2/trajectories.svg")));
    // the volume trace decreases overall
    std::ifstream vin(tmp.file("s2/volume_1.csv"));
    std::string line, last, first;
    std::getline(vin, line);  // header
    std::getline(vin, first);
    while (std::getline(vin, line))
      if (!line.empty()) last = line;
    auto logvol_of = [](const std::string& row) {
      std::stringstream ss(row);
      std::string cell;
      std::getline(ss, cell, ',');
      std::getline(ss, cell, ',');
      return std::stod(cell);
    };
    CHECK(logvol_of(last) < logvol_of(first));
  }

  SUBCASE("identical seeds give bit-identical outputs") {
    REQUIRE(run("simulate " + tmp.file("m.json") + " --sample 2 --seed 7 --tend 3 --out " +
                tmp.file("d1")) == 0);
    REQUIRE(run("simulate " + tmp.file("m.json") + " --sample 2 --seed 7 --tend 3 --out " +
                tmp.file("d2")) == 0);
    CHECK(slurp(tmp.file("d1/traj_1.csv")) == slurp(tmp.file("d2/traj_1.csv")));
    CHECK(slurp(tmp.file("d1/traj_2.csv")) == slurp(tmp.file("d2/traj_2.csv")));
    REQUIRE(run("simulate " + tmp.file("m.json") + " --sample 2 --seed 8 --tend 3 --out " +
                tmp.file("d3")) == 0);
    CHECK(slurp(tmp.file("d1/traj_1.csv")) != slurp(tmp.file("d3/traj_1.csv")));
  }
}

TEST_CASE("certify resolves a tridiagonal-auto metric from the config") {
  TempDir tmp;
  std::ofstream cfg(tmp.file("tri.json"));
  cfg << R"json({"name": "tri", "n": 3, "m": 1, "p": 1,
             "f": ["-3*x1 - (2 + sin(x2))*x2 + u1",
                   "(1 + 0.5*cos(x1))*x1 - 3*x2 - (3 + tanh(x3))*x3",
                   "(2 + 0.25*sin(x2))*x2 - 3*x3"],
             "g": ["x2"],
             "phi": ["0.5*tanh(s)"],
             "state_domain": {"low": [-0.4, -0.4, -0.4], "high": [0.4, 0.4, 0.4]},
             "input_domain": {"low": [-0.5], "high": [0.5]},
             "metric": {"kind": "tridiagonal-auto"}})json";
  cfg.close();
  CHECK(run("certify " + tmp.file("tri.json") + " --k 2 --grid 4 --out " +
            tmp.file("tri_out")) == 0);
  nlohmann::json cert;
  std::ifstream(tmp.file("tri_out/certificate.json")) >> cert;
  CHECK(cert["verdict"] == "certified");
  CHECK(cert["metric"].get<std::string>().find("tridiagonal") != std::string::npos);
}

TEST_CASE("unknown flags are errors") {
  TempDir tmp;
  write_example31_config(tmp.file("m.json"));
  CHECK(run("simulate " + tmp.file("m.json") + " --frobnicate --out " + tmp.file("fr") ) == 1);
  CHECK(run("nonsense-subcommand") == 1);
  CHECK(run("--help") == 0);
}

TEST_CASE("reproduction harness writes the full report") {
  TempDir tmp;
  // a short horizon keeps this test quick; convergence there is still deep
  CHECK(run("reproduce-biochem --tend 60 --seed 42 --out " + tmp.file("rep")) == 0);
  CHECK(fs::exists(tmp.file("rep/manifest.json")));
  CHECK(fs::exists(tmp.file("rep/cert_reference_bounds.json")));
  CHECK(fs::exists(tmp.file("rep/cert_conservative_bounds.json")));
  CHECK(fs::exists(tmp.file("rep/equilibria.csv")));
  for (int i = 1; i <= 5; ++i) {
    CHECK(fs::exists(tmp.file("rep/traj_" + std::to_string(i) + ".csv")));
    CHECK(fs::exists(tmp.file("rep/volume_" + std::to_string(i) + ".csv")));
  }
  CHECK(fs::exists(tmp.file("rep/trajectories_x1x3.svg")));
  CHECK(fs::exists(tmp.file("rep/volume_decay.svg")));

  const std::string report = slurp(tmp.file("rep/report.md"));
  CHECK(report.find("1.5") != std::string::npos);
  CHECK(report.find("alpha_2 = (-1 + 3)/2 = 1") != std::string::npos);
  CHECK(report.find("not certified") != std::string::npos);

  nlohmann::json ref, cons;
  std::ifstream(tmp.file("rep/cert_reference_bounds.json")) >> ref;
  std::ifstream(tmp.file("rep/cert_conservative_bounds.json")) >> cons;
  CHECK(ref["alpha_k"] == 1.5);
  CHECK(ref["verdict"] == "certified");
  CHECK(cons["alpha_k"] == 1.0);
  CHECK(cons["verdict"] == "not-certified");

  // at least three listed roots with tiny residuals
  std::ifstream eq(tmp.file("rep/equilibria.csv"));
  std::string line;
  std::getline(eq, line);
  CHECK(line == "e3,residual,e1,e2");
  int roots = 0;
  while (std::getline(eq, line)) {
    std::stringstream ss(line);
    std::string e3s, rs;
    std::getline(ss, e3s, ',');
    std::getline(ss, rs, ',');
    CHECK(std::abs(std::stod(rs)) < 1e-10);
    ++roots;
  }
  CHECK(roots >= 3);
}
