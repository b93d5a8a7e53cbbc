#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "hb/dynamics.hpp"
#include "hb/losses.hpp"
#include "hb/manifold.hpp"

using hb::Mat;
using hb::Vec;

namespace {

hb::OraclePtr quad1d() {
  return std::make_shared<hb::QuadraticLoss>(Mat{{1.0}}, Vec{0.0});
}

hb::OraclePtr sinusoid1d() {
  // Negative amplitude puts the minimizer of a cos(omega theta) at 0, so
  // heavy-ball runs stay inside the manifold grid.
  nlohmann::json params = {
      {"dimension", 1}, {"amplitude", -0.8}, {"omega", 1.7}};
  return hb::builtin_loss("sinusoid", params);
}

}  // namespace

TEST_CASE("grid function: interpolation and clamping") {
  // Catmull-Rom reproduces quadratics exactly in the interior.
  hb::GridFunction g;
  g.xmin = -1.0;
  g.dx = 0.1;
  g.vals.resize(21);
  for (int i = 0; i < 21; ++i) {
    double x = g.xmin + i * g.dx;
    g.vals[i] = 2.0 * x * x - 0.5 * x + 0.3;
  }
  for (double x : {-0.73, -0.2, 0.0, 0.41, 0.86}) {
    CHECK(g.eval(x) == Catch::Approx(2.0 * x * x - 0.5 * x + 0.3).margin(1e-12));
    CHECK(g.deriv(x) == Catch::Approx(4.0 * x - 0.5).margin(1e-10));
  }
  CHECK_FALSE(g.clamped);
  (void)g.eval(1.5);  // outside [-1, 1]
  CHECK(g.clamped);
}

TEST_CASE("quadratic manifold: linear with the closed-form slope") {
  const double beta = 0.5, h = 0.05;  // h < (1 - sqrt(beta))^2 ~ 0.0858
  hb::OraclePtr loss = quad1d();
  hb::ManifoldResult res = hb::manifold_fixed_point(*loss, beta, h, 1.0);
  REQUIRE(res.converged);
  CHECK(res.residual <= 1e-9);
  CHECK(res.newton_failures == 0);
  double slope = hb::quad_manifold_slope(beta, h);
  for (double th : {-0.8, -0.3, 0.0, 0.45, 0.9})
    CHECK(res.g.eval(th) == Catch::Approx(slope * th).margin(1e-8));
  // Consistency with the manifold initial velocity of the dynamics module:
  // on the manifold v = -L'(theta)/(1-beta) + h g(theta).
  double th = 0.6;
  double v_manifold = hb::quad_manifold_velocity(th, beta, h);
  CHECK(v_manifold ==
        Catch::Approx(-th / (1 - beta) + h * slope * th).margin(1e-10));
}

TEST_CASE("flat loss has the zero manifold") {
  auto flat = std::make_shared<hb::QuadraticLoss>(Mat{{0.0}}, Vec{0.0});
  hb::ManifoldResult res = hb::manifold_fixed_point(*flat, 0.5, 0.05, 1.0);
  REQUIRE(res.converged);
  CHECK(res.iterations <= 2);
  for (double v : res.g.vals) CHECK(v == 0.0);
  CHECK(res.residual == 0.0);
}

TEST_CASE("sinusoid manifold: convergence and invariance residual") {
  const double beta = 0.5, h = 0.01;
  hb::OraclePtr loss = sinusoid1d();
  hb::ManifoldResult res = hb::manifold_fixed_point(*loss, beta, h, 1.0);
  REQUIRE(res.converged);
  CHECK(res.residual <= 1e-8);
  CHECK(res.newton_failures == 0);
  // The manifold function is nontrivial for a nonlinear loss.
  CHECK(std::fabs(res.g.eval(0.5)) > 1e-3);
}

TEST_CASE("off-manifold starts contract at the momentum rate") {
  const double beta = 0.5, h = 0.02;
  hb::OraclePtr loss = quad1d();
  hb::ManifoldResult res = hb::manifold_fixed_point(*loss, beta, h, 1.0);
  REQUIRE(res.converged);
  hb::AttractivityReport rep =
      hb::manifold_attractivity(*loss, res.g, beta, h, 0.5, 0.0, 80,
                                beta + 0.05);
  CHECK(rep.satisfied);
  REQUIRE(rep.r.size() == 81);
  CHECK(rep.r[80] <= std::pow(beta + 0.05, 80) * rep.r[0] + 1e-12);

  // Sinusoid at h = 0.01: the secondary root lambda_- ~ 0.526 stays below
  // the rate envelope beta + 0.05 (at h = 0.02 it would not: ~0.558).
  const double hs = 0.01;
  hb::OraclePtr sinus = sinusoid1d();
  hb::ManifoldResult sres = hb::manifold_fixed_point(*sinus, beta, hs, 1.0);
  REQUIRE(sres.converged);
  hb::AttractivityReport srep =
      hb::manifold_attractivity(*sinus, sres.g, beta, hs, 0.4, 0.0, 80,
                                beta + 0.05);
  CHECK(srep.satisfied);
}

TEST_CASE("input validation") {
  hb::OraclePtr loss = quad1d();
  auto loss2d = std::make_shared<hb::QuadraticLoss>(
      Mat{{1.0, 0.0}, {0.0, 1.0}}, Vec{0.0, 0.0});
  CHECK_THROWS_AS(hb::manifold_fixed_point(*loss2d, 0.5, 0.05, 1.0),
                  hb::CapabilityError);
  CHECK_THROWS_AS(hb::manifold_fixed_point(*loss, 0.5, 0.05, 1.0, 3),
                  std::invalid_argument);
  // Slope formula only exists below the branch point h = (1 - sqrt(beta))^2.
  CHECK_THROWS_AS(hb::quad_manifold_slope(0.5, 0.2), hb::CapabilityError);
}
