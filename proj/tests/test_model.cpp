#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kcontract/model.hpp"
#include "kcontract/rng.hpp"
#include "oracles.hpp"

using namespace kcontract;

namespace {

// f = -x + u, g = x, phi = 0 in one dimension.
GlsModel decoupled_toy() {
  return make_gls("toy", 1, 1, 1, VectorFunction({parse("-x1 + u1")}, 1, 1, 0),
                  VectorFunction({parse("x1")}, 1, 0, 0), VectorFunction({parse("0")}, 0, 0, 1),
                  Box::cube(1, -2, 2), Box::cube(1, -1, 1));
}

GlsModel example31_gls(double gamma = 1.0) { return networked_to_gls(builtin_example31(), gamma); }

Eigen::Vector3d v3(double a, double b, double c) { return Eigen::Vector3d(a, b, c); }

std::vector<Eigen::VectorXd> sample_pts(const Box& box, int count = 60, std::uint64_t seed = 5) {
  SplitMix64 rng(seed);
  std::vector<Eigen::VectorXd> pts;
  for (int t = 0; t < count; ++t) {
    Eigen::VectorXd x(box.dim());
    for (int i = 0; i < box.dim(); ++i) x(i) = rng.uniform(box.low(i), box.high(i));
    pts.push_back(std::move(x));
  }
  return pts;
}

}  // namespace

TEST_CASE("closed-loop field of the decoupled toy") {
  GlsModel mdl = decoupled_toy();
  Eigen::VectorXd x(1);
  x << 2;
  CHECK(closed_loop_field(mdl, x)(0) == doctest::Approx(-2).epsilon(1e-15));
}

TEST_CASE("the feedback-chain origin is an equilibrium") {
  GlsModel mdl = example31_gls();
  CHECK(closed_loop_field(mdl, v3(0, 0, 0)).norm() == doctest::Approx(0).epsilon(1e-15));
  Eigen::VectorXd f = closed_loop_field(mdl, v3(0, 0, 2));
  CHECK(f(0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(f(1) == doctest::Approx(0).epsilon(1e-14));
  CHECK(f(2) == doctest::Approx(-6).epsilon(1e-14));
}

TEST_CASE("closed-loop Jacobian composition") {
  // f = -x + u, g = x, phi = y: J = -1 - 1 = -2
  GlsModel mdl = make_gls("t", 1, 1, 1, VectorFunction({parse("-x1 + u1")}, 1, 1, 0),
                          VectorFunction({parse("x1")}, 1, 0, 0),
                          VectorFunction({parse("y1")}, 0, 0, 1), Box::cube(1, -1, 1));
  Eigen::VectorXd x(1);
  x << 0.3;
  CHECK(closed_loop_jacobian(mdl, x)(0, 0) == doctest::Approx(-2).epsilon(1e-15));
}

TEST_CASE("feedback-chain Jacobian at the origin") {
  GlsModel mdl = example31_gls();
  Eigen::MatrixXd J = closed_loop_jacobian(mdl, v3(0, 0, 0));
  Eigen::MatrixXd expected(3, 3);
  expected << -1, 0, 0.25, 1, -3, 0, 0, 1, -3;
  CHECK((J - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("LTI with zero feedback has constant closed-loop Jacobian A") {
  SplitMix64 rng(41);
  Eigen::MatrixXd A = oracle::random_matrix(3, 3, rng);
  Eigen::MatrixXd B = oracle::random_matrix(3, 2, rng);
  Eigen::MatrixXd C = oracle::random_matrix(2, 3, rng);
  GlsModel mdl = builtin_lti_lurie(A, B, C, {parse("0"), parse("0")});
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd x = oracle::random_matrix(3, 1, rng);
    CHECK(closed_loop_jacobian(mdl, x).isApprox(A, 1e-12));
  }
}

TEST_CASE("closed-loop Jacobian matches finite differences of the field") {
  SplitMix64 rng(42);
  GlsModel chain = example31_gls(0.7);
  GlsModel hop = builtin_hopfield(Eigen::MatrixXd::Identity(3, 3),
                                  oracle::random_matrix(3, 2, rng),
                                  oracle::random_matrix(2, 3, rng),
                                  {parse("tanh(y1)"), parse("tanh(y2)")});
  for (const GlsModel* mdl : {&chain, &hop}) {
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd x(3);
      for (int i = 0; i < 3; ++i) x(i) = rng.uniform(0.1, 2.0);
      Eigen::MatrixXd J = closed_loop_jacobian(*mdl, x);
      Eigen::MatrixXd Jfd = oracle::fd_jacobian(
          [&](const Eigen::VectorXd& z) { return closed_loop_field(*mdl, z); }, x);
      CHECK((J - Jfd).cwiseAbs().maxCoeff() <= 1e-5 * (1 + J.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("networked GLS representation reproduces the network field") {
  SplitMix64 rng(43);
  // non-square W2 exercises the symbolic composition of Phi
  Eigen::MatrixXd W1 = oracle::random_matrix(3, 2, rng);
  Eigen::MatrixXd W2 = oracle::random_matrix(2, 3, rng);
  NetworkedModel net = make_networked(
      "net", W1, W2, {parse("2*x1 + 0.1*sin(x1)"), parse("3*x2"), parse("x3^3 + x3")},
      VectorFunction({parse("tanh(y1)"), parse("tanh(y1 - y2)")}, 0, 0, 2),
      Eigen::VectorXd::Ones(3), {{1.9, 2.1}, {3, 3}, {1, 4}}, 1.5);
  for (double gamma : {0.5, 1.0, 2.0}) {
    GlsModel gls = networked_to_gls(net, gamma);
    for (int t = 0; t < 20; ++t) {
      Eigen::VectorXd x = oracle::random_matrix(3, 1, rng);
      CHECK((closed_loop_field(gls, x) - networked_field(net, x)).norm() <= 1e-12);
      CHECK((closed_loop_jacobian(gls, x) - networked_jacobian(net, x)).norm() <= 1e-10);
    }
  }
}

TEST_CASE("networked Jacobian matches finite differences") {
  NetworkedModel net = builtin_example31();
  SplitMix64 rng(44);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x(i) = rng.uniform(0.0, 5.0);
    Eigen::MatrixXd J = networked_jacobian(net, x);
    Eigen::MatrixXd Jfd = oracle::fd_jacobian(
        [&](const Eigen::VectorXd& z) { return networked_field(net, z); }, x);
    CHECK((J - Jfd).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("hopfield with identity weights and tanh vanishes at the origin") {
  GlsModel mdl = builtin_hopfield(Eigen::MatrixXd::Identity(2, 2),
                                  Eigen::MatrixXd::Identity(2, 2),
                                  Eigen::MatrixXd::Identity(2, 2),
                                  {parse("tanh(y1)"), parse("tanh(y2)")});
  CHECK(closed_loop_field(mdl, Eigen::Vector2d::Zero()).norm() == 0);
  // d/dx(-x + tanh(x)) = -1 + 1 = 0 at the origin
  CHECK(closed_loop_jacobian(mdl, Eigen::Vector2d::Zero()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("metric evaluation") {
  GlsModel mdl = example31_gls();

  SUBCASE("constant metric has zero derivative") {
    Eigen::MatrixXd T(3, 3);
    T << 2, 0, 0, 0, 1, 0.2, 0, 0.2, 1;
    MetricSpec ms = MetricSpec::constant(T);
    ThetaEval te = theta_eval_cl(ms, mdl, v3(1, 2, 3));
    CHECK(te.theta.isApprox(T, 1e-15));
    CHECK(te.theta_dot.cwiseAbs().maxCoeff() == 0);
    CHECK((te.theta * te.theta_inv).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-12));
  }

  SUBCASE("scalar metric inverts to 1/q") {
    MetricSpec ms = MetricSpec::scalar(4.0);
    ThetaEval te = theta_eval_cl(ms, mdl, v3(1, 1, 1));
    CHECK(te.theta_inv.isApprox(0.25 * Eigen::MatrixXd::Identity(3, 3), 1e-15));
  }

  SUBCASE("state-dependent diagonal: entry (2,2) follows the first field component") {
    // delta_2 = x1 makes theta_dot(2,2) = d delta_2/dt = f_1(x)
    MetricSpec ms = MetricSpec::diagonal({parse("1"), parse("x1"), parse("1")}, 3);
    Eigen::VectorXd x = v3(1.5, 0.5, 0.25);
    ThetaEval te = theta_eval_cl(ms, mdl, x);
    CHECK(te.theta_dot(1, 1) ==
          doctest::Approx(closed_loop_field(mdl, x)(0)).epsilon(1e-14));
    CHECK(te.theta_dot(0, 0) == 0);

    // the open-loop derivative at the closed-loop input is the same code path
    ThetaEval ol = theta_eval_ol(ms, mdl, x, closed_loop_input(mdl, x));
    CHECK(ol.theta_dot(1, 1) == te.theta_dot(1, 1));  // bitwise
  }

  SUBCASE("singular metric is rejected") {
    MetricSpec ms = MetricSpec::diagonal({parse("x1"), parse("1"), parse("1")}, 3);
    CHECK_THROWS_AS(theta_at(ms, v3(0, 1, 1), 3), SingularMatrixError);
  }
}

TEST_CASE("metric time derivative matches finite differences along the flow") {
  GlsModel mdl = example31_gls();
  MetricSpec ms = MetricSpec::diagonal(
      {parse("1 + 0.1*x2^2"), parse("2 + sin(x1)*0.2"), parse("1")}, 3);
  Eigen::VectorXd x = v3(1.0, 0.8, 0.6);
  ThetaEval te = theta_eval_cl(ms, mdl, x);
  const double h = 1e-6;
  Eigen::VectorXd fwd = x + h * closed_loop_field(mdl, x);
  Eigen::VectorXd bck = x - h * closed_loop_field(mdl, x);
  Eigen::MatrixXd fd = (theta_at(ms, fwd, 3) - theta_at(ms, bck, 3)) / (2 * h);
  CHECK((te.theta_dot - fd).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("Riemannian Jacobians collapse to the plain Jacobian for scalar metrics") {
  GlsModel mdl = example31_gls();
  Eigen::VectorXd x = v3(0.5, 1.0, 1.5);
  CHECK(riemannian_jacobian_cl(mdl, MetricSpec::identity(), x)
            .isApprox(closed_loop_jacobian(mdl, x), 1e-12));
  CHECK(riemannian_jacobian_cl(mdl, MetricSpec::scalar(3.0), x)
            .isApprox(closed_loop_jacobian(mdl, x), 1e-12));
}

TEST_CASE("metric bound estimation") {
  MetricSpec ms = MetricSpec::diagonal({parse("1"), parse("1 + x1^2"), parse("2")}, 3);
  std::vector<Eigen::VectorXd> pts = {v3(0, 0, 0), v3(1, 0, 0), v3(2, 0, 0)};
  estimate_metric_bounds(ms, 3, pts);
  CHECK(ms.sigma1 == doctest::Approx(1.0));
  CHECK(ms.sigma2 == doctest::Approx(25.0));  // (1 + 2^2)^2
}

TEST_CASE("tridiagonal metric construction") {
  SUBCASE("unit off-diagonal signs give the identity metric") {
    // x1' = -x1 - x2, x2' = x1 - x2: h12 = -1, h21 = 1
    GlsModel mdl = make_gls("tri", 2, 1, 1,
                            VectorFunction({parse("-x1 - x2 + u1"), parse("x1 - x2")}, 2, 1, 0),
                            VectorFunction({parse("x1")}, 2, 0, 0),
                            VectorFunction({parse("0")}, 0, 0, 1), Box::cube(2, -1, 1));
    MetricSpec ms = tridiagonal_theta(mdl, sample_pts(mdl.state_domain));
    CHECK(theta_at(ms, Eigen::Vector2d(0.3, -0.4), 2)
              .isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-14));
  }

  SUBCASE("constant ratio -h12/h21 = 4 gives delta_2 = 2") {
    GlsModel mdl = make_gls("tri", 2, 1, 1,
                            VectorFunction({parse("-x1 - 4*x2 + u1"), parse("x1 - x2")}, 2, 1, 0),
                            VectorFunction({parse("x1")}, 2, 0, 0),
                            VectorFunction({parse("0")}, 0, 0, 1), Box::cube(2, -1, 1));
    MetricSpec ms = tridiagonal_theta(mdl, sample_pts(mdl.state_domain));
    Eigen::MatrixXd T = theta_at(ms, Eigen::Vector2d(0.1, 0.2), 2);
    CHECK(T(0, 0) == doctest::Approx(1));
    CHECK(T(1, 1) == doctest::Approx(2));
  }

  SUBCASE("conjugated Jacobian has skew off-diagonal part") {
    GlsModel mdl = make_gls(
        "tri", 3, 1, 1,
        VectorFunction({parse("-x1 - (2 + sin(x2))*x2 + u1"),
                        parse("(1 + 0.5*cos(x1))*x1 - x2 - (3 + tanh(x3))*x3"),
                        parse("(2 + 0.25*sin(x2))*x2 - x3")},
                       3, 1, 0),
        VectorFunction({parse("x2")}, 3, 0, 0), VectorFunction({parse("0")}, 0, 0, 1),
        Box::cube(3, -0.4, 0.4));
    auto pts = sample_pts(mdl.state_domain);
    MetricSpec ms = tridiagonal_theta(mdl, pts);
    CHECK(ms.tridiagonal_auto);
    int checked = 0;
    for (const auto& x : pts) {
      Eigen::MatrixXd Jol = riemannian_jacobian_ol(mdl, ms, x, Eigen::VectorXd::Zero(1));
      Eigen::MatrixXd sym = Jol + Jol.transpose();
      Eigen::MatrixXd off = sym - Eigen::MatrixXd(sym.diagonal().asDiagonal());
      CHECK(off.cwiseAbs().maxCoeff() <= 1e-8);
      ++checked;
    }
    CHECK(checked >= 50);
  }

  SUBCASE("sign violations are reported with the sample point") {
    GlsModel mdl = make_gls("tri", 2, 1, 1,
                            VectorFunction({parse("-x1 + x2*x2 + u1"), parse("x1 - x2")}, 2, 1, 0),
                            VectorFunction({parse("x1")}, 2, 0, 0),
                            VectorFunction({parse("0")}, 0, 0, 1), Box::cube(2, -1, 1));
    CHECK_THROWS_WITH_AS(tridiagonal_theta(mdl, sample_pts(mdl.state_domain)),
                         doctest::Contains("sign condition violated"), DimensionError);
  }

  SUBCASE("non-tridiagonal fields are rejected") {
    GlsModel mdl = make_gls("nontri", 3, 1, 1,
                            VectorFunction({parse("-x1 + x3 - x2"), parse("x1 - x2 - x3"),
                                            parse("x2 - x3 + u1")},
                                           3, 1, 0),
                            VectorFunction({parse("x1")}, 3, 0, 0),
                            VectorFunction({parse("0")}, 0, 0, 1), Box::cube(3, -1, 1));
    CHECK_THROWS_WITH_AS(tridiagonal_theta(mdl, sample_pts(mdl.state_domain)),
                         doctest::Contains("outside the tridiagonal band"), DimensionError);
  }
}

TEST_CASE("the nonnegative orthant traps the feedback chain") {
  // on each boundary face x_i = 0 the normal component points inward
  NetworkedModel net = builtin_example31();
  SplitMix64 rng(45);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x(i) = rng.uniform(0.0, 5.0);
    const int face = static_cast<int>(rng.next() % 3);
    x(face) = 0.0;
    CHECK(networked_field(net, x)(face) >= -1e-12);
  }
}

TEST_CASE("model validation errors") {
  CHECK_THROWS_AS(make_gls("bad", 2, 1, 1, VectorFunction({parse("x1")}, 2, 1, 0),
                           VectorFunction({parse("x1")}, 2, 0, 0),
                           VectorFunction({parse("y1")}, 0, 0, 1), Box::cube(2, -1, 1)),
                  DimensionError);
  CHECK_THROWS_AS(make_networked("bad", Eigen::MatrixXd::Identity(2, 2),
                                 Eigen::MatrixXd::Identity(2, 2),
                                 {parse("x1"), parse("x1")},  // d2 must depend on x2 only
                                 VectorFunction({parse("y1"), parse("y2")}, 0, 0, 2),
                                 Eigen::VectorXd::Zero(2), {}, 1.0),
                  DimensionError);
  Box b;
  b.low = Eigen::Vector2d(1, 0);
  b.high = Eigen::Vector2d(0, 1);
  CHECK_THROWS_AS(b.validate(), DimensionError);
}
