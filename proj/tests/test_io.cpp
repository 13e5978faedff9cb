#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "kcontract/io.hpp"
#include "kcontract/svg.hpp"

using namespace kcontract;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("kcontract_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("matrix CSV round trip") {
  TempDir tmp;
  Eigen::MatrixXd M(2, 3);
  M << 1.5, -2, 3.25e-7, 0, 1.0 / 3, 7;
  write_matrix_csv(tmp.file("m.csv"), M);
  Eigen::MatrixXd back = read_matrix_csv(tmp.file("m.csv"));
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == 3);
  CHECK(back == M);  // 17 significant digits reproduce doubles exactly
}

TEST_CASE("matrix CSV errors carry line numbers") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.csv"));
    out << "1,2\n3,oops\n";
  }
  CHECK_THROWS_WITH_AS(read_matrix_csv(tmp.file("bad.csv")), doctest::Contains(":2:"),
                       ConfigError);
  {
    std::ofstream out(tmp.file("ragged.csv"));
    out << "1,2\n3\n";
  }
  CHECK_THROWS_WITH_AS(read_matrix_csv(tmp.file("ragged.csv")), doctest::Contains(":2:"),
                       ConfigError);
  CHECK_THROWS_AS(read_matrix_csv(tmp.file("missing.csv")), ConfigError);
}

TEST_CASE("trajectory and volume CSV headers") {
  TempDir tmp;
  Trajectory traj;
  traj.times = {0.0, 0.5};
  traj.states = {Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)};
  traj.derivatives = traj.states;
  write_trajectory_csv(tmp.file("t.csv"), traj);
  std::ifstream in(tmp.file("t.csv"));
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x1,x2");
  std::string row;
  std::getline(in, row);
  CHECK(row == "0,1,2");

  VolumeTrace trace;
  trace.times = {0.0};
  trace.logvol = {-1.5};
  trace.weighted_logvol = {-2.5};
  write_volume_csv(tmp.file("v.csv"), trace);
  std::ifstream vin(tmp.file("v.csv"));
  std::getline(vin, header);
  CHECK(header == "t,logvol,weighted_logvol");
}

TEST_CASE("certificate JSON carries the full schema") {
  Certificate cert;
  cert.k = 2;
  cert.eta1 = 0.5;
  cert.eta2 = 0.25;
  cert.rate = 0.375;
  cert.certified = true;
  cert.worst_margin = 0.75;
  cert.mode = "thm1-B";
  cert.argmin_x = Eigen::Vector2d(1, 2);
  cert.sigma1 = 1;
  cert.sigma2 = 4;
  cert.samples = 625;
  cert.seed = 17;
  nlohmann::json j = certificate_to_json(cert);
  CHECK(j["k"] == 2);
  CHECK(j["verdict"] == "certified");
  CHECK(j["eta1"] == 0.5);
  CHECK(j["rate"] == 0.375);
  CHECK(j["mode"] == "thm1-B");
  CHECK(j["worst_margin"] == 0.75);
  CHECK(j["argmin_point"].size() == 2);
  CHECK(j["sigma1"] == 1);
  CHECK(j["sigma2"] == 4);
  CHECK(j["samples"] == 625);
  CHECK(j["seed"] == 17);

  Certificate empty;
  empty.mode = "networked";
  nlohmann::json je = certificate_to_json(empty);
  CHECK(je["verdict"] == "not-certified");
  CHECK(je["eta1"].is_null());
}

TEST_CASE("expression model config") {
  nlohmann::json doc = {
      {"name", "toy"},
      {"n", 1},
      {"m", 1},
      {"p", 1},
      {"f", {"-x1 + u1"}},
      {"g", {"x1"}},
      {"phi", {"tanh(s)"}},  // s resolves to y1 when p = 1
      {"state_domain", {{"low", {-1.0}}, {"high", {1.0}}}},
      {"input_domain", {{"low", {-1.0}}, {"high", {1.0}}}},
      {"metric", {{"kind", "scalar"}, {"q", 2.0}}},
  };
  LoadedModel lm = model_from_json(doc);
  REQUIRE(lm.is_gls());
  CHECK(lm.gls().n == 1);
  CHECK(lm.metric.kind == MetricSpec::Kind::Scalar);
  CHECK(lm.metric.q == 2.0);
  Eigen::VectorXd x(1);
  x << 0.5;
  CHECK(closed_loop_field(lm.gls(), x)(0) ==
        doctest::Approx(-0.5 - std::tanh(0.5)).epsilon(1e-14));
}

TEST_CASE("builtin configs") {
  SUBCASE("example31 with both bound choices") {
    LoadedModel a = model_from_json({{"builtin", "example31"}});
    REQUIRE(!a.is_gls());
    CHECK(a.networked().d_prime_bounds[0].first == 0.0);
    LoadedModel b = model_from_json(
        {{"builtin", "example31"}, {"params", {{"d1_bound", "conservative"}}}});
    CHECK(b.networked().d_prime_bounds[0].first == -1.0);
    CHECK(*b.networked().r_prime_bound == 0.25);
  }

  SUBCASE("lti builtin") {
    nlohmann::json doc = {
        {"builtin", "lti_lurie"},
        {"params",
         {{"A", {{-1.0, 0.0}, {0.0, -2.0}}},
          {"B", {{1.0}, {0.0}}},
          {"C", {{1.0, 0.0}}},
          {"phi", {"tanh(s)"}}}},
    };
    LoadedModel lm = model_from_json(doc);
    REQUIRE(lm.is_gls());
    CHECK(lm.gls().n == 2);
    CHECK(lm.gls().m == 1);
  }

  SUBCASE("unknown builtin") {
    CHECK_THROWS_AS(model_from_json({{"builtin", "nonsense"}}), ConfigError);
  }

  SUBCASE("tridiagonal metric request flag") {
    nlohmann::json doc = {
        {"name", "tri"},   {"n", 1},
        {"m", 1},          {"p", 1},
        {"f", {"-x1 + u1"}}, {"g", {"x1"}},
        {"phi", {"0"}},    {"metric", {{"kind", "tridiagonal-auto"}}},
    };
    LoadedModel lm = model_from_json(doc);
    CHECK(lm.metric_is_tridiagonal_request);
  }
}

TEST_CASE("config errors are wrapped with context") {
  CHECK_THROWS_AS(model_from_json({{"n", 1}}), nlohmann::json::exception);
  CHECK_THROWS_AS(load_model_config("/nonexistent/rando.json"), ConfigError);
}

TEST_CASE("SVG plots are well-formed enough to open") {
  TempDir tmp;
  PlotSeries s;
  s.label = "decay";
  for (int i = 0; i <= 100; ++i) {
    s.xs.push_back(i * 0.1);
    s.ys.push_back(std::exp(-i * 0.1));
  }
  write_svg_lineplot(tmp.file("p.svg"), "test", "t", "x", {s});
  std::ifstream in(tmp.file("p.svg"));
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all.find("<svg") != std::string::npos);
  CHECK(all.find("</svg>") != std::string::npos);
  CHECK(all.find("polyline") != std::string::npos);
  CHECK(all.find("decay") != std::string::npos);
}
